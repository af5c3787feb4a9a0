"""
Per-image candidate scores, prior distributions and DR loss parameters
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import (
    BadBaseError,
    BadPriorMaskError,
    EmptyNegativesError,
    NonFiniteError,
    OutOfRangeError,
)
from .surrogate import SurrogateSpec

logger = logging.getLogger(__name__)


def _frozen_vector(values: ArrayLike) -> NDArray[np.float64]:
    vector = np.array(values, dtype=np.float64).reshape(-1)
    vector.flags.writeable = False
    return vector


@dataclass(frozen=True, eq=False)
class ImageScores:
    """Positive and negative sigmoid scores of one image"""

    positives: NDArray[np.float64] = field(
        default_factory=lambda: _frozen_vector([])
    )
    negatives: NDArray[np.float64] = field(
        default_factory=lambda: _frozen_vector([])
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "positives", _frozen_vector(self.positives))
        object.__setattr__(self, "negatives", _frozen_vector(self.negatives))

    @property
    def n_pos(self) -> int:
        return int(self.positives.size)

    @property
    def n_neg(self) -> int:
        return int(self.negatives.size)

    def replace(
        self,
        positives: ArrayLike | None = None,
        negatives: ArrayLike | None = None,
    ) -> ImageScores:
        """Copy with one or both score vectors swapped out"""
        return ImageScores(
            positives=self.positives if positives is None else positives,
            negatives=self.negatives if negatives is None else negatives,
        )


class Prior(BaseModel):
    """
    Original distribution o over one class of candidates

    uniform weights every candidate 1/n. mask weights a fixed index set
    1/n_hat and the rest 0. hardest re-selects, per image, the k hardest
    candidates (highest negatives, lowest positives) and then acts as a mask.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform", "mask", "hardest"] = "uniform"
    indices: tuple[int, ...] = ()
    k: int = Field(default=0, ge=0)

    def __init__(self, **data: Any) -> None:
        # model_validate skips __init__ and reports through _check_kind instead
        if data.get("kind") == "mask" and len(data.get("indices", ())) == 0:
            raise BadPriorMaskError("mask prior needs a non-empty index set")
        super().__init__(**data)

    @model_validator(mode="after")
    def _check_kind(self) -> Prior:
        if self.kind == "mask" and not self.indices:
            raise ValueError("mask prior needs a non-empty index set")
        if self.kind == "hardest" and self.k < 1:
            raise ValueError("hardest prior needs k >= 1")
        return self

    @classmethod
    def uniform(cls) -> Prior:
        return cls()

    @classmethod
    def mask(cls, indices: ArrayLike) -> Prior:
        selected = tuple(int(i) for i in np.asarray(indices).reshape(-1))
        return cls(kind="mask", indices=selected)

    @classmethod
    def hardest(cls, k: int) -> Prior:
        return cls(kind="hardest", k=k)

    def resolve(
        self, scores: NDArray[np.float64], hard_high: bool
    ) -> NDArray[np.intp] | None:
        """
        Selected candidate indices for this score vector

        Args:
            scores: Scores of one class in one image
            hard_high: True when high scores are the hard ones (negatives)

        Returns:
            Sorted unique indices, or None when every candidate is weighted
            equally
        """
        n = int(scores.size)
        if self.kind == "uniform":
            return None

        if self.kind == "hardest":
            if self.k >= n:
                return None
            keys = -scores if hard_high else scores
            return np.sort(np.argsort(keys, kind="stable")[: self.k])

        selected = np.unique(np.asarray(self.indices, dtype=np.intp))
        if selected.size == 0:
            raise BadPriorMaskError("mask prior selects no candidates")
        if selected[0] < 0 or selected[-1] >= n:
            raise BadPriorMaskError(
                f"mask prior index out of range for {n} candidates"
            )
        return selected


class DrParams(BaseModel):
    """Parameters of the distributional ranking loss"""

    model_config = ConfigDict(frozen=True)

    lambda_pos: float = Field(default=1.0, gt=0, description="Positive tilt")
    lambda_neg: float = Field(default=0.1, gt=0, description="Negative tilt")
    gamma: float = Field(default=0.5, ge=0, le=1, description="Ranking margin")
    surrogate: SurrogateSpec = Field(default_factory=SurrogateSpec)
    prior_pos: Prior = Field(default_factory=Prior)
    prior_neg: Prior = Field(default_factory=Prior)

    @classmethod
    def tuned(cls, h_pos: float, h_neg: float, **kwargs: Any) -> DrParams:
        """Parameters with lambdas derived from logarithm bases"""
        lambda_pos, lambda_neg = tuned_lambdas(h_pos, h_neg)
        return cls(lambda_pos=lambda_pos, lambda_neg=lambda_neg, **kwargs)


def check_scores(scores: ImageScores) -> tuple[bool, str]:
    """
    Check image scores without raising

    Returns:
        Tuple of (is_valid, reason)
    """
    if scores.n_neg == 0:
        return False, "image has no negative scores"

    classes = (("positive", scores.positives), ("negative", scores.negatives))
    for name, values in classes:
        if not np.all(np.isfinite(values)):
            return False, f"{name} scores contain NaN or Inf"
    for name, values in classes:
        if values.size and (values.min() <= 0.0 or values.max() >= 1.0):
            return False, f"{name} scores must lie strictly inside (0, 1)"

    return True, "scores are valid"


def validate(scores: ImageScores) -> None:
    """
    Validate image scores

    Raises:
        EmptyNegativesError: no negative scores
        NonFiniteError: a score is NaN or infinite
        OutOfRangeError: a score is outside (0, 1)
    """
    ok, reason = check_scores(scores)
    if ok:
        return

    logger.debug(f"Rejected image scores: {reason}")
    if scores.n_neg == 0:
        raise EmptyNegativesError(reason)
    if "NaN" in reason:
        raise NonFiniteError(reason)
    raise OutOfRangeError(reason)


def tuned_lambdas(h_pos: float, h_neg: float) -> tuple[float, float]:
    """
    Tilt temperatures from logarithm bases: (1 / ln h+, 0.1 / ln h-)

    Raises:
        BadBaseError: a base is not greater than 1
    """
    for name, base in (("h_pos", h_pos), ("h_neg", h_neg)):
        if not math.isfinite(base) or base <= 1.0:
            raise BadBaseError(f"{name} must be greater than 1, got {base}")

    return 1.0 / math.log(h_pos), 0.1 / math.log(h_neg)
