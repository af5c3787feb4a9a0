"""
Forward and backward passes of the DR loss and its comparison losses

Every loss takes the scores of one image and returns the loss value together
with its gradient with respect to each positive and negative score. Gradients
are closed form; gradcheck verifies them numerically.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from .errors import NoPositivesError
from .scores import DrParams, ImageScores, validate
from .surrogate import SurrogateSpec, evaluate
from .tilt import tilt_negative, tilt_positive, tilted_expectation_gradient

logger = logging.getLogger(__name__)

LossName = Literal[
    "dr", "neg_only", "all_pairs", "worst_case", "cross_entropy", "focal"
]
LOSS_NAMES: tuple[LossName, ...] = (
    "dr",
    "neg_only",
    "all_pairs",
    "worst_case",
    "focal",
    "cross_entropy",
)

# score of an absent positive class
EMPTY_POSITIVE_EXPECTATION = 1.0


@dataclass(frozen=True, eq=False)
class LossResult:
    """Loss value and its gradient with respect to the image scores"""

    loss: float
    grad_pos: NDArray[np.float64]
    grad_neg: NDArray[np.float64]


@dataclass(frozen=True)
class MarginReport:
    """Extreme scores of one image against the classification criterion"""

    min_pos: float
    max_neg: float
    satisfies: bool


def _require_positives(scores: ImageScores, loss: str) -> None:
    if scores.n_pos == 0:
        raise NoPositivesError(f"{loss} needs at least one positive score")


def dr_loss(scores: ImageScores, params: DrParams | None = None) -> LossResult:
    """
    Distributional ranking loss of one image

    loss = l(P_neg - P_pos + gamma) where P_neg and P_pos are the tilted
    expectations of the negative and positive scores. An image without
    positives uses P_pos = 1.

    Args:
        scores: Image scores
        params: Loss parameters, defaults when omitted

    Returns:
        LossResult with gradients for both classes
    """
    params = params or DrParams()
    validate(scores)

    neg_dist = tilt_negative(scores.negatives, params.lambda_neg, params.prior_neg)
    if scores.n_pos:
        pos_dist = tilt_positive(
            scores.positives, params.lambda_pos, params.prior_pos
        )
        p_pos = pos_dist.expectation
    else:
        p_pos = EMPTY_POSITIVE_EXPECTATION

    z = neg_dist.expectation - p_pos + params.gamma
    loss, slope = evaluate(params.surrogate, z)

    grad_neg = float(slope) * tilted_expectation_gradient(
        neg_dist, scores.negatives, params.lambda_neg, 1.0
    )
    if scores.n_pos:
        grad_pos = -float(slope) * tilted_expectation_gradient(
            pos_dist, scores.positives, params.lambda_pos, -1.0
        )
    else:
        grad_pos = np.zeros(0)

    return LossResult(loss=float(loss), grad_pos=grad_pos, grad_neg=grad_neg)


def all_pairs_loss(
    scores: ImageScores, gamma: float = 0.5, surrogate: SurrogateSpec | None = None
) -> LossResult:
    """Mean surrogate loss over every positive/negative pair of the image"""
    validate(scores)
    _require_positives(scores, "all_pairs_loss")
    surrogate = surrogate or SurrogateSpec()

    # rows are positives, columns negatives
    z = scores.negatives[None, :] - scores.positives[:, None] + gamma
    losses, slopes = evaluate(surrogate, z)
    n_pairs = z.size

    return LossResult(
        loss=float(losses.sum() / n_pairs),
        grad_pos=-slopes.sum(axis=1) / n_pairs,
        grad_neg=slopes.sum(axis=0) / n_pairs,
    )


def worst_case_loss(
    scores: ImageScores, gamma: float = 0.5, surrogate: SurrogateSpec | None = None
) -> LossResult:
    """Surrogate loss of the highest negative against the lowest positive"""
    validate(scores)
    _require_positives(scores, "worst_case_loss")
    surrogate = surrogate or SurrogateSpec()

    # argmax/argmin return the first index among ties
    i_neg = int(np.argmax(scores.negatives))
    i_pos = int(np.argmin(scores.positives))
    z = scores.negatives[i_neg] - scores.positives[i_pos] + gamma
    loss, slope = evaluate(surrogate, z)

    grad_pos = np.zeros(scores.n_pos)
    grad_neg = np.zeros(scores.n_neg)
    grad_pos[i_pos] = -float(slope)
    grad_neg[i_neg] = float(slope)
    return LossResult(loss=float(loss), grad_pos=grad_pos, grad_neg=grad_neg)


def neg_only_loss(scores: ImageScores, params: DrParams | None = None) -> LossResult:
    """
    Ranking loss with only the negatives tilted

    loss = mean over positives of l(P_neg - p_pos + gamma)
    """
    params = params or DrParams()
    validate(scores)
    _require_positives(scores, "neg_only_loss")

    neg_dist = tilt_negative(scores.negatives, params.lambda_neg, params.prior_neg)
    z = neg_dist.expectation - scores.positives + params.gamma
    losses, slopes = evaluate(params.surrogate, z)

    grad_neg = float(slopes.mean()) * tilted_expectation_gradient(
        neg_dist, scores.negatives, params.lambda_neg, 1.0
    )
    return LossResult(
        loss=float(losses.mean()),
        grad_pos=-slopes / scores.n_pos,
        grad_neg=grad_neg,
    )


def cross_entropy_loss(scores: ImageScores) -> LossResult:
    """Binary cross entropy summed over every candidate of the image"""
    validate(scores)
    p_pos, p_neg = scores.positives, scores.negatives

    loss = -np.log(p_pos).sum() - np.log1p(-p_neg).sum()
    return LossResult(
        loss=float(loss),
        grad_pos=-1.0 / p_pos,
        grad_neg=1.0 / (1.0 - p_neg),
    )


def focal_loss(
    scores: ImageScores, alpha: float = 0.25, gamma_f: float = 2.0
) -> LossResult:
    """
    Focal loss summed over every candidate of the image

    -alpha (1-p)^g log p on positives, -(1-alpha) p^g log(1-p) on negatives.
    """
    validate(scores)
    p_pos, p_neg = scores.positives, scores.negatives
    log_p = np.log(p_pos)
    log_q = np.log1p(-p_neg)

    loss_pos = -alpha * (1.0 - p_pos) ** gamma_f * log_p
    loss_neg = -(1.0 - alpha) * p_neg**gamma_f * log_q

    # gamma_f * x**(gamma_f - 1) is written as gamma_f * x**gamma_f / x so
    # gamma_f = 0 stays finite
    grad_pos = alpha * (
        gamma_f * (1.0 - p_pos) ** gamma_f / (1.0 - p_pos) * log_p
        - (1.0 - p_pos) ** gamma_f / p_pos
    )
    grad_neg = (1.0 - alpha) * (
        -gamma_f * p_neg**gamma_f / p_neg * log_q + p_neg**gamma_f / (1.0 - p_neg)
    )
    return LossResult(
        loss=float(loss_pos.sum() + loss_neg.sum()),
        grad_pos=grad_pos,
        grad_neg=grad_neg,
    )


def margin_check(scores: ImageScores, gamma: float = 0.5) -> MarginReport:
    """
    Report the extreme scores of an image against the margin criterion

    satisfies is min(positives) > gamma and max(negatives) <= 1 - gamma.
    """
    validate(scores)
    _require_positives(scores, "margin_check")

    min_pos = float(scores.positives.min())
    max_neg = float(scores.negatives.max())
    return MarginReport(
        min_pos=min_pos,
        max_neg=max_neg,
        satisfies=bool(min_pos > gamma and max_neg <= 1.0 - gamma),
    )


class LossSpec(BaseModel):
    """Selects one loss and carries the parameters it needs"""

    model_config = ConfigDict(frozen=True)

    name: LossName = "dr"
    params: DrParams = Field(default_factory=DrParams)
    focal_alpha: float = Field(default=0.25, gt=0, lt=1)
    focal_gamma: float = Field(default=2.0, ge=0)


def requires_positives(name: LossName) -> bool:
    """Whether the loss is undefined for images without positives"""
    return name in ("neg_only", "all_pairs", "worst_case")


def loss_function(spec: LossSpec) -> Callable[[ImageScores], LossResult]:
    """Bind a loss specification into a single-argument evaluator"""
    params = spec.params
    if spec.name == "dr":
        return lambda scores: dr_loss(scores, params)
    if spec.name == "neg_only":
        return lambda scores: neg_only_loss(scores, params)
    if spec.name == "all_pairs":
        return lambda scores: all_pairs_loss(scores, params.gamma, params.surrogate)
    if spec.name == "worst_case":
        return lambda scores: worst_case_loss(
            scores, params.gamma, params.surrogate
        )
    if spec.name == "focal":
        return lambda scores: focal_loss(scores, spec.focal_alpha, spec.focal_gamma)
    return cross_entropy_loss


def evaluate_loss(spec: LossSpec, scores: ImageScores) -> LossResult:
    """Evaluate the selected loss on one image"""
    return loss_function(spec)(scores)


def batch_loss(
    images: Sequence[ImageScores], spec: LossSpec, workers: int = 1
) -> float:
    """
    Sum of per-image losses over a mini-batch

    Images may be evaluated on several threads; the sum is always taken in
    image order.
    """
    fn = loss_function(spec)
    if workers > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, images))
    else:
        results = [fn(scores) for scores in images]
    return float(sum(result.loss for result in results))
