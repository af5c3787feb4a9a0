"""
Surrogate losses for the ranking gap z

Hinge [z]_+ and its two smooth replacements: the quadratic loss with
half-width rho and the logistic loss with sharpness L.
"""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from .errors import NonFiniteError

logger = logging.getLogger(__name__)

SurrogateKind = Literal["hinge", "quadratic", "logistic"]


class SurrogateSpec(BaseModel):
    """Surrogate selection and its smoothing parameter"""

    model_config = ConfigDict(frozen=True)

    kind: SurrogateKind = Field(default="logistic", description="Surrogate family")
    rho: float = Field(default=0.5, gt=0, description="Quadratic half-width")
    L: float = Field(default=6.0, gt=0, description="Logistic sharpness")

    @classmethod
    def hinge(cls) -> SurrogateSpec:
        return cls(kind="hinge")

    @classmethod
    def quadratic(cls, rho: float) -> SurrogateSpec:
        return cls(kind="quadratic", rho=rho)

    @classmethod
    def logistic(cls, L: float) -> SurrogateSpec:
        return cls(kind="logistic", L=L)


def evaluate(
    spec: SurrogateSpec, z: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Evaluate the surrogate and its derivative

    Args:
        spec: Surrogate to evaluate
        z: Scalar or array of ranking gaps

    Returns:
        Tuple of (loss, dloss/dz), both shaped like z
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("surrogate input must be finite")

    if spec.kind == "hinge":
        loss = np.maximum(z, 0.0)
        # subgradient 0 at the kink
        deriv = (z > 0).astype(np.float64)
    elif spec.kind == "quadratic":
        rho = spec.rho
        inside = (z + rho) ** 2 / (4.0 * rho)
        loss = np.where(z >= rho, z, np.where(z <= -rho, 0.0, inside))
        deriv = np.where(
            z >= rho, 1.0, np.where(z <= -rho, 0.0, (z + rho) / (2.0 * rho))
        )
    else:
        lz = spec.L * z
        loss = np.logaddexp(0.0, lz) / spec.L
        deriv = expit(lz)

    return loss, deriv


def column_name(spec: SurrogateSpec) -> str:
    """CSV column header for a surrogate curve"""
    if spec.kind == "hinge":
        return "hinge"
    if spec.kind == "quadratic":
        return f"quadratic_rho{spec.rho:g}"
    return f"logistic_L{spec.L:g}"
