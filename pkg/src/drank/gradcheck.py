"""
Finite-difference oracle for hand-written gradients

The oracle treats the loss as a black box: it perturbs one score at a time by
+/- step, takes the central difference and compares it with the analytic
gradient the loss returned for the unperturbed input.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .drloss import LossResult
from .errors import StepOutOfRangeError
from .scores import ImageScores

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_THRESHOLD = 1e-5
ABSOLUTE_FLOOR = 1e-8
# relative errors are floored at this fraction of the largest analytic entry
RELATIVE_FLOOR = 1e-3

LossFn = Callable[[ImageScores], LossResult]


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of comparing analytic and numeric gradients"""

    max_rel_error: float
    worst_index: tuple[Literal["pos", "neg", "param"], int]
    passed: bool
    threshold: float


def relative_errors(
    analytic: NDArray[np.float64], numeric: NDArray[np.float64]
) -> NDArray[np.float64]:
    """
    Per-coordinate |a - n| / max(|a|, |n|, floor)

    floor is max(1e-8, 1e-3 * max|a|). With a bare 1e-8 floor, tilted
    weights of far negatives (true gradient around 1e-10) fail on central
    difference roundoff alone: dr and neg_only then miss 1e-5 on a few of
    200 random instances with errors near 1e-4. A 10% error in the largest
    entry still scores about 0.1.
    """
    scale = float(np.abs(analytic).max(initial=0.0))
    floor = max(ABSOLUTE_FLOOR, RELATIVE_FLOOR * scale)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.asarray(np.abs(analytic - numeric) / denom, dtype=np.float64)


def _report(
    errors: NDArray[np.float64],
    labels: list[tuple[Literal["pos", "neg", "param"], int]],
    threshold: float,
) -> GradCheckReport:
    if errors.size == 0:
        return GradCheckReport(0.0, ("neg", 0), True, threshold)
    worst = int(np.argmax(errors))
    max_error = float(errors[worst])
    return GradCheckReport(
        max_rel_error=max_error,
        worst_index=labels[worst],
        passed=max_error < threshold,
        threshold=threshold,
    )


def check(
    loss_fn: LossFn,
    scores: ImageScores,
    step: float = DEFAULT_STEP,
    threshold: float = DEFAULT_THRESHOLD,
) -> GradCheckReport:
    """
    Compare a loss's analytic score gradient with central differences

    Args:
        loss_fn: Deterministic evaluator returning a LossResult
        scores: Point at which to check
        step: Perturbation applied to each score
        threshold: Largest accepted relative error

    Returns:
        GradCheckReport naming the coordinate with the largest error

    Raises:
        StepOutOfRangeError: a perturbed score would leave (0, 1)
    """
    for values in (scores.positives, scores.negatives):
        if values.size and (values.min() - step <= 0.0 or values.max() + step >= 1.0):
            raise StepOutOfRangeError(
                f"step {step} moves a score outside (0, 1)"
            )

    result = loss_fn(scores)
    analytic = np.concatenate([result.grad_pos, result.grad_neg])
    labels: list[tuple[Literal["pos", "neg", "param"], int]] = [
        ("pos", i) for i in range(scores.n_pos)
    ] + [("neg", j) for j in range(scores.n_neg)]

    numeric = np.empty_like(analytic)
    for slot, (cls, index) in enumerate(labels):
        numeric[slot] = _central_difference(loss_fn, scores, cls, index, step)

    report = _report(relative_errors(analytic, numeric), labels, threshold)
    logger.debug(
        f"Gradient check: max relative error {report.max_rel_error:.3e} "
        f"at {report.worst_index}"
    )
    return report


def _central_difference(
    loss_fn: LossFn,
    scores: ImageScores,
    cls: Literal["pos", "neg", "param"],
    index: int,
    step: float,
) -> float:
    source = scores.positives if cls == "pos" else scores.negatives
    plus = source.copy()
    minus = source.copy()
    plus[index] += step
    minus[index] -= step

    if cls == "pos":
        f_plus = loss_fn(scores.replace(positives=plus)).loss
        f_minus = loss_fn(scores.replace(positives=minus)).loss
    else:
        f_plus = loss_fn(scores.replace(negatives=plus)).loss
        f_minus = loss_fn(scores.replace(negatives=minus)).loss
    return (f_plus - f_minus) / (2.0 * step)


def check_vector(
    fn: Callable[[NDArray[np.float64]], float],
    x: ArrayLike,
    analytic: ArrayLike,
    step: float = DEFAULT_STEP,
    threshold: float = DEFAULT_THRESHOLD,
) -> GradCheckReport:
    """Central-difference check of a gradient over an unconstrained vector"""
    point = np.array(x, dtype=np.float64).reshape(-1)
    grad = np.asarray(analytic, dtype=np.float64).reshape(-1)

    numeric = np.empty_like(point)
    for i in range(point.size):
        shifted = point.copy()
        shifted[i] = point[i] + step
        f_plus = fn(shifted)
        shifted[i] = point[i] - step
        f_minus = fn(shifted)
        numeric[i] = (f_plus - f_minus) / (2.0 * step)

    labels: list[tuple[Literal["pos", "neg", "param"], int]] = [
        ("param", i) for i in range(point.size)
    ]
    return _report(relative_errors(grad, numeric), labels, threshold)


def corrupt(
    loss_fn: LossFn,
    factor: float = 1.1,
    target: tuple[Literal["pos", "neg"], int] | None = None,
) -> LossFn:
    """
    Wrap a loss so one analytic gradient entry is scaled by factor

    Without an explicit target the entry with the largest magnitude is
    corrupted.
    """

    def corrupted(scores: ImageScores) -> LossResult:
        result = loss_fn(scores)
        grads = {"pos": result.grad_pos.copy(), "neg": result.grad_neg.copy()}
        if target is None:
            joined = np.abs(np.concatenate([grads["pos"], grads["neg"]]))
            flat = int(np.argmax(joined))
            if flat < scores.n_pos:
                cls, index = "pos", flat
            else:
                cls, index = "neg", flat - scores.n_pos
        else:
            cls, index = target
        if index < grads[cls].size:
            grads[cls][index] *= factor
        return LossResult(
            loss=result.loss, grad_pos=grads["pos"], grad_neg=grads["neg"]
        )

    return corrupted


def random_instance(
    rng: np.random.Generator,
    max_pos: int = 20,
    max_neg: int = 500,
    low: float = 0.02,
    high: float = 0.98,
    min_pos: int = 1,
    min_gap: float = 0.0,
) -> ImageScores:
    """
    Random image scores drawn uniformly from [low, high]

    With min_gap > 0 instances are redrawn until the two highest negatives
    and the two lowest positives are at least min_gap apart, so a
    perturbation smaller than min_gap cannot change which candidate is the
    extreme one.
    """
    while True:
        n_pos = int(rng.integers(min_pos, max_pos + 1))
        n_neg = int(rng.integers(1, max_neg + 1))
        positives = rng.uniform(low, high, size=n_pos)
        negatives = rng.uniform(low, high, size=n_neg)
        if _extremes_separated(positives, negatives, min_gap):
            return ImageScores(positives=positives, negatives=negatives)


def _extremes_separated(
    positives: NDArray[np.float64], negatives: NDArray[np.float64], min_gap: float
) -> bool:
    if min_gap <= 0.0:
        return True
    top = np.sort(negatives)[-2:]
    bottom = np.sort(positives)[:2]
    return bool(
        (top.size < 2 or top[1] - top[0] >= min_gap)
        and (bottom.size < 2 or bottom[1] - bottom[0] >= min_gap)
    )
