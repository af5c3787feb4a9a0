"""
Mini-batch SGD over a linear scorer with sigmoid output

Every iteration samples a batch of images with replacement, scores all of
their candidates, evaluates the selected loss per image and backpropagates the
score gradients through the sigmoid into the weights and bias.
"""

from __future__ import annotations

import json
import logging
import math
import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import expit, logit

from .drloss import (
    LossResult,
    LossSpec,
    loss_function,
    margin_check,
    requires_positives,
)
from .errors import (
    BadAlphaError,
    BadConfigError,
    BadSpecError,
    DivergenceError,
    EmptyInputError,
    NoPositivesError,
)
from .export import write_csv
from .scores import ImageScores
from .synth import GroupedDataset, ImageGroup

logger = logging.getLogger(__name__)

# Configuration from environment variables
CLAMP_EPS = float(os.getenv("DRANK_CLAMP_EPS", "1e-7"))

INIT_WEIGHT_SCALE = 0.01
# offset mixed into the seed so batch sampling and weight init use separate streams
BATCH_STREAM = 1

AuxLoss = Callable[["Model"], tuple[float, NDArray[np.float64], float]]


@dataclass(eq=False)
class Model:
    """Linear scorer: score(x) = sigmoid(w . x + b)"""

    weights: NDArray[np.float64]
    bias: float

    def logits(self, features: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias

    def score(self, features: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(expit(self.logits(features)))

    def copy(self) -> Model:
        return Model(weights=self.weights.copy(), bias=float(self.bias))

    @property
    def parameters(self) -> NDArray[np.float64]:
        """Weights followed by the bias"""
        return np.append(self.weights, self.bias)

    @classmethod
    def from_parameters(cls, theta: ArrayLike) -> Model:
        values = np.asarray(theta, dtype=np.float64).reshape(-1)
        return cls(weights=values[:-1].copy(), bias=float(values[-1]))


def init_model(d: int, initial_probability: float = 0.5, seed: int = 0) -> Model:
    """
    Small random weights and a bias placing the initial score near
    initial_probability

    Raises:
        BadSpecError: d < 1 or initial_probability outside (0, 1)
    """
    if d < 1:
        raise BadSpecError(f"feature dimension must be at least 1, got {d}")
    if not 0.0 < initial_probability < 1.0:
        raise BadSpecError(
            f"initial probability must lie in (0, 1), got {initial_probability}"
        )

    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, INIT_WEIGHT_SCALE, size=d)
    return Model(weights=weights, bias=float(logit(initial_probability)))


class TrainerConfig(BaseModel):
    """Settings of one SGD run"""

    model_config = ConfigDict(frozen=True)

    batch_size: int = Field(default=4, ge=1, description="Images per mini-batch")
    iterations: int = Field(default=2000, ge=0)
    learning_rate: float = Field(default=0.5, gt=0)
    seed: int = Field(default=0, ge=0)
    loss: LossSpec = Field(default_factory=LossSpec)
    tau: float = Field(default=4.0, ge=0, description="Weight of the auxiliary loss")
    lr_schedule: list[tuple[int, float]] = Field(
        default_factory=list, description="(iteration, decay factor) steps"
    )
    initial_probability: float = Field(default=0.5, gt=0, lt=1)
    workers: int = Field(default=1, ge=1)

    @field_validator("lr_schedule")
    @classmethod
    def _check_schedule(
        cls, value: list[tuple[int, float]]
    ) -> list[tuple[int, float]]:
        for iteration, factor in value:
            if iteration < 0 or not factor > 0:
                raise ValueError(
                    f"schedule step ({iteration}, {factor}) needs iteration >= 0 "
                    "and factor > 0"
                )
        return sorted(value)

    def learning_rate_at(self, iteration: int) -> float:
        """Base rate times every decay factor whose iteration has been reached"""
        rate = self.learning_rate
        for step, factor in self.lr_schedule:
            if iteration >= step:
                rate *= factor
        return rate


@dataclass(frozen=True)
class TrainRecord:
    """Statistics of one SGD iteration, taken before the update"""

    iteration: int
    loss: float
    grad_norm_sq: float
    lr: float
    clamped: int = 0


@dataclass
class TrainTrace:
    """Per-iteration records of a training run"""

    records: list[TrainRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> NDArray[np.float64]:
        return np.array([record.loss for record in self.records], dtype=np.float64)

    def tail_mean(self, count: int) -> float:
        """Mean loss over the last count iterations"""
        if not self.records:
            raise EmptyInputError("trace has no records")
        return float(self.losses[-count:].mean())

    def to_csv(self, path: Path) -> Path:
        rows = (
            [record.iteration, record.loss, record.grad_norm_sq, record.lr]
            for record in self.records
        )
        return write_csv(path, ["iter", "loss", "grad_norm_sq", "lr"], rows)


@dataclass(frozen=True, eq=False)
class ImageObjective:
    """Loss of one image and its gradient with respect to the model"""

    loss: float
    grad_weights: NDArray[np.float64]
    grad_bias: float
    clamped: int


def _clamped_scores(
    model: Model, features: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    raw = model.score(features)
    active = (raw > CLAMP_EPS) & (raw < 1.0 - CLAMP_EPS)
    return np.clip(raw, CLAMP_EPS, 1.0 - CLAMP_EPS), active


def image_scores(model: Model, image: ImageGroup) -> ImageScores:
    """Clamped scores of every candidate of one image"""
    positives, _ = _clamped_scores(model, image.positives)
    negatives, _ = _clamped_scores(model, image.negatives)
    return ImageScores(positives=positives, negatives=negatives)


def image_objective(
    model: Model,
    image: ImageGroup,
    spec: LossSpec,
    loss_fn: Callable[[ImageScores], LossResult] | None = None,
) -> ImageObjective:
    """
    Loss of one image and its gradient through the sigmoid

    dlogit = dloss/dp * p (1 - p); clamped scores pass no gradient.
    """
    loss_fn = loss_fn or loss_function(spec)
    p_pos, active_pos = _clamped_scores(model, image.positives)
    p_neg, active_neg = _clamped_scores(model, image.negatives)

    result = loss_fn(ImageScores(positives=p_pos, negatives=p_neg))

    dlogit_pos = result.grad_pos * p_pos * (1.0 - p_pos) * active_pos
    dlogit_neg = result.grad_neg * p_neg * (1.0 - p_neg) * active_neg
    grad_weights = image.positives.T @ dlogit_pos + image.negatives.T @ dlogit_neg
    grad_bias = float(dlogit_pos.sum() + dlogit_neg.sum())

    clamped = int((~active_pos).sum() + (~active_neg).sum())
    return ImageObjective(
        loss=result.loss,
        grad_weights=np.asarray(grad_weights, dtype=np.float64),
        grad_bias=grad_bias,
        clamped=clamped,
    )


def train(
    data: GroupedDataset,
    config: TrainerConfig,
    aux_loss: AuxLoss | None = None,
    model: Model | None = None,
) -> tuple[Model, TrainTrace]:
    """
    Run config.iterations SGD updates

    Args:
        data: Grouped training images
        config: Trainer settings
        aux_loss: Optional extra objective returning (value, grad_w, grad_b),
            weighted by config.tau
        model: Starting point, init_model from the config when omitted

    Returns:
        Tuple of (trained model, trace)

    Raises:
        EmptyInputError: the dataset has no images
        BadConfigError: batch size larger than the dataset
        DivergenceError: the batch loss or gradient became non-finite
    """
    if len(data) == 0:
        raise EmptyInputError("cannot train on an empty dataset")
    if config.batch_size > len(data):
        raise BadConfigError(
            f"batch size {config.batch_size} exceeds {len(data)} images"
        )

    model = (
        model.copy()
        if model is not None
        else init_model(data.n_features, config.initial_probability, config.seed)
    )
    spec = config.loss
    loss_fn = loss_function(spec)
    skip_empty = requires_positives(spec.name)
    if skip_empty and any(image.n_pos == 0 for image in data.images):
        logger.warning(
            f"Loss {spec.name} needs positives; images without positives "
            "contribute nothing"
        )

    rng = np.random.default_rng((config.seed, BATCH_STREAM))
    zero = ImageObjective(0.0, np.zeros(data.n_features), 0.0, 0)

    def evaluate_image(index: int) -> ImageObjective:
        image = data.images[index]
        if skip_empty and image.n_pos == 0:
            return zero
        return image_objective(model, image, spec, loss_fn)

    logger.info(
        f"Training {spec.name} for {config.iterations} iterations "
        f"(batch {config.batch_size}, lr {config.learning_rate})"
    )

    trace = TrainTrace()
    pool = None
    if config.workers > 1:
        pool = ThreadPoolExecutor(max_workers=config.workers)
    warned_clamp = False
    try:
        for iteration in range(config.iterations):
            batch = rng.integers(0, len(data), size=config.batch_size)
            if pool is not None:
                objectives = list(pool.map(evaluate_image, batch.tolist()))
            else:
                objectives = [evaluate_image(int(i)) for i in batch]

            # summed in batch order regardless of worker count
            loss = 0.0
            grad_weights = np.zeros(data.n_features)
            grad_bias = 0.0
            clamped = 0
            for objective in objectives:
                loss += objective.loss
                grad_weights = grad_weights + objective.grad_weights
                grad_bias += objective.grad_bias
                clamped += objective.clamped
            loss /= config.batch_size
            grad_weights /= config.batch_size
            grad_bias /= config.batch_size

            if aux_loss is not None and config.tau > 0:
                aux_value, aux_weights, aux_bias = aux_loss(model)
                loss += config.tau * aux_value
                grad_weights = grad_weights + config.tau * np.asarray(aux_weights)
                grad_bias += config.tau * aux_bias

            grad_norm_sq = float(grad_weights @ grad_weights + grad_bias**2)
            lr = config.learning_rate_at(iteration)

            if not (math.isfinite(loss) and math.isfinite(grad_norm_sq)):
                raise DivergenceError(
                    f"loss became non-finite at iteration {iteration}", trace
                )

            if clamped and iteration > 0 and not warned_clamp:
                logger.warning(
                    f"Score clamp active on {clamped} candidates at iteration "
                    f"{iteration}"
                )
                warned_clamp = True

            trace.records.append(
                TrainRecord(iteration, loss, grad_norm_sq, lr, clamped)
            )
            model.weights = model.weights - lr * grad_weights
            model.bias = model.bias - lr * grad_bias
    finally:
        if pool is not None:
            pool.shutdown()

    if trace.records:
        logger.info(
            f"Finished {spec.name}: final batch loss {trace.records[-1].loss:.6g}"
        )
    return model, trace


def scaled_config(base: TrainerConfig, alpha: float) -> TrainerConfig:
    """
    Rescale batch size, iterations and learning rate together

    m' = m / alpha, T' = alpha T and eta' = eta / alpha; schedule iterations
    are scaled with T.

    Raises:
        BadAlphaError: alpha is not positive or m / alpha is not a positive
            integer
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise BadAlphaError(f"alpha must be positive, got {alpha}")

    batch = base.batch_size / alpha
    if batch < 1 or not math.isclose(batch, round(batch), abs_tol=1e-9):
        raise BadAlphaError(
            f"batch size {base.batch_size} / alpha {alpha} is not a positive integer"
        )

    return base.model_copy(
        update={
            "batch_size": int(round(batch)),
            "iterations": int(round(base.iterations * alpha)),
            "learning_rate": base.learning_rate / alpha,
            "lr_schedule": [
                (int(round(step * alpha)), factor) for step, factor in base.lr_schedule
            ],
        }
    )


def pooled_scores(
    model: Model, data: GroupedDataset
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Clamped positive and negative scores pooled over every image"""
    positives = [image_scores(model, image).positives for image in data.images]
    negatives = [image_scores(model, image).negatives for image in data.images]
    return np.concatenate(positives), np.concatenate(negatives)


def margin_pass_rate(model: Model, data: GroupedDataset, gamma: float = 0.5) -> float:
    """
    Fraction of images with positives whose scores satisfy margin_check

    Raises:
        NoPositivesError: no image has a positive candidate
    """
    checked = 0
    passed = 0
    for image in data.images:
        if image.n_pos == 0:
            continue
        checked += 1
        passed += margin_check(image_scores(model, image), gamma).satisfies

    if checked == 0:
        raise NoPositivesError("no image has positives to check")
    return passed / checked


def threshold_sweep(
    model: Model, data: GroupedDataset, thresholds: list[float]
) -> list[tuple[float, float, float]]:
    """(threshold, frac_pos_kept, frac_neg_kept) with kept meaning score >= threshold"""
    positives, negatives = pooled_scores(model, data)
    rows = []
    for threshold in thresholds:
        frac_pos = float((positives >= threshold).mean()) if positives.size else 0.0
        frac_neg = float((negatives >= threshold).mean())
        rows.append((threshold, frac_pos, frac_neg))
    return rows


def save_model(model: Model, path: Path) -> Path:
    """Write model parameters as JSON"""
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"weights": model.weights.tolist(), "bias": float(model.bias)}
    path.write_text(json.dumps(payload, indent=2) + "\n")
    logger.info(f"Saved model to {path}")
    return path


def load_model(path: Path) -> Model:
    payload = json.loads(path.read_text())
    return Model(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        bias=float(payload["bias"]),
    )
