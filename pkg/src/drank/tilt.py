"""
KL-tilted distributions over one class of scores

Maximizing sum(q * p) - lam * KL(q || o) over the simplex has the closed form
q = o * exp(p / lam) / Z. Negatives are tilted toward high scores and
positives toward low scores (p replaced by -p). All exponentials are shifted by
the maximum exponent over the prior support.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .errors import BadLambdaError, EmptyInputError
from .scores import Prior

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TiltedDistribution:
    """Tilted weights q over one score vector and the expectation under q"""

    weights: NDArray[np.float64]
    log_normalizer: float
    expectation: float


def _tilt(
    scores: ArrayLike, lam: float, prior: Prior | None, sign: float
) -> TiltedDistribution:
    values = np.asarray(scores, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise EmptyInputError("cannot tilt an empty score vector")
    if not lam > 0:
        raise BadLambdaError(f"tilt temperature must be positive, got {lam}")

    prior = prior or Prior.uniform()
    selected = prior.resolve(values, hard_high=sign > 0)
    support = values if selected is None else values[selected]

    exponents = sign * support / lam
    shifted = exponents - exponents.max()
    # the prior is constant on its support, so it cancels from q
    log_norm = float(logsumexp(shifted))
    support_weights = np.exp(shifted - log_norm)
    log_norm -= float(np.log(support.size))

    if selected is None:
        weights = support_weights
    else:
        weights = np.zeros_like(values)
        weights[selected] = support_weights

    expectation = float(np.dot(support_weights, support))
    # rounding can push the dot product a hair outside the score range
    expectation = min(max(expectation, float(support.min())), float(support.max()))

    return TiltedDistribution(
        weights=weights, log_normalizer=log_norm, expectation=expectation
    )


def tilt_negative(
    scores: ArrayLike, lam: float, prior: Prior | None = None
) -> TiltedDistribution:
    """
    Tilt negative scores toward the hardest (highest) candidates

    Args:
        scores: Negative scores of one image
        lam: Tilt temperature, > 0
        prior: Original distribution, uniform by default

    Returns:
        TiltedDistribution with q proportional to o * exp(p / lam)
    """
    return _tilt(scores, lam, prior, 1.0)


def tilt_positive(
    scores: ArrayLike, lam: float, prior: Prior | None = None
) -> TiltedDistribution:
    """
    Tilt positive scores toward the hardest (lowest) candidates

    Returns:
        TiltedDistribution with q proportional to o * exp(-p / lam)
    """
    return _tilt(scores, lam, prior, -1.0)


def tilted_expectation_gradient(
    dist: TiltedDistribution, scores: ArrayLike, lam: float, sign: float
) -> NDArray[np.float64]:
    """
    Gradient of the tilted expectation with respect to every score

    dP/dp_j = q_j * (1 + sign * (p_j - P) / lam), with sign +1 for negatives
    and -1 for positives. Candidates outside the prior support have q_j = 0.
    """
    values = np.asarray(scores, dtype=np.float64).reshape(-1)
    return dist.weights * (1.0 + sign * (values - dist.expectation) / lam)
