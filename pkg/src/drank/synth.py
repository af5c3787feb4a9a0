"""
Synthetic data generators

Two kinds of data are produced: raw Gaussian score samples, used to watch the
tilted distribution drift, and grouped feature datasets where every image owns
a few positive candidates and many negative candidates split into an easy and
a hard cluster.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import BadSpecError, EmptyInputError
from .export import write_csv

logger = logging.getLogger(__name__)

# sampled scores are clamped into [SCORE_EPS, 1 - SCORE_EPS]
SCORE_EPS = 1e-7
DEFAULT_BINS = 100


@dataclass(frozen=True, eq=False)
class ScoreSample:
    """Gaussian draws clamped into (0, 1) and the Gaussian that produced them"""

    values: NDArray[np.float64]
    mean: float
    stddev: float

    @property
    def count(self) -> int:
        return int(self.values.size)


def sample_scores(mean: float, stddev: float, count: int, seed: int) -> ScoreSample:
    """
    Draw count i.i.d. Gaussian scores and clamp them into (0, 1)

    Raises:
        BadSpecError: stddev is not positive or count < 1
    """
    if not stddev > 0:
        raise BadSpecError(f"stddev must be positive, got {stddev}")
    if count < 1:
        raise BadSpecError(f"count must be at least 1, got {count}")

    rng = np.random.default_rng(seed)
    values = np.clip(rng.normal(mean, stddev, size=count), SCORE_EPS, 1.0 - SCORE_EPS)
    logger.debug(f"Sampled {count} scores from N({mean}, {stddev}^2)")
    return ScoreSample(values=values, mean=mean, stddev=stddev)


class GeneratorSpec(BaseModel):
    """Shape, imbalance and cluster geometry of a grouped dataset"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: int = Field(default=8, ge=2, description="Feature dimension")
    images: int = Field(default=100, ge=1)
    pos_per_image: int = Field(default=2, ge=0)
    neg_per_image: int = Field(default=2000, ge=1)
    hard_fraction: float = Field(default=0.01, ge=0, le=1)
    empty_fraction: float = Field(
        default=0.0, ge=0, le=1, description="Share of images without positives"
    )
    # cluster centers sit on the first feature axis, hard negatives 8 pos_std
    # below the positives
    pos_center: float = 0.5
    hard_center: float = 0.25
    easy_center: float = -0.5
    pos_std: float = Field(default=0.03, gt=0)
    neg_std: float = Field(default=0.02, gt=0)
    seed: int = Field(default=0, ge=0)

    @property
    def hard_per_image(self) -> int:
        return int(round(self.hard_fraction * self.neg_per_image))


@dataclass(frozen=True, eq=False)
class ImageGroup:
    """Positive and negative feature matrices of one image"""

    positives: NDArray[np.float64]
    negatives: NDArray[np.float64]

    @property
    def n_pos(self) -> int:
        return int(self.positives.shape[0])

    @property
    def n_neg(self) -> int:
        return int(self.negatives.shape[0])


@dataclass(eq=False)
class GroupedDataset:
    """Images of candidates generated from one GeneratorSpec"""

    images: list[ImageGroup] = field(default_factory=list)
    spec: GeneratorSpec = field(default_factory=GeneratorSpec)

    def __len__(self) -> int:
        return len(self.images)

    @property
    def n_features(self) -> int:
        return self.spec.dim

    @property
    def imbalance_ratio(self) -> float:
        """Declared negatives per positive, inf when images have no positives"""
        if self.spec.pos_per_image == 0:
            return float("inf")
        return self.spec.neg_per_image / self.spec.pos_per_image

    def to_csv(self, path: Path) -> Path:
        """One row per candidate: image_id, label (1 positive, 0 negative), features"""
        header = ["image_id", "label"] + [f"f{i}" for i in range(self.n_features)]

        def rows() -> Any:
            for image_id, image in enumerate(self.images):
                for label, features in ((1, image.positives), (0, image.negatives)):
                    for row in features:
                        yield [image_id, label, *row.tolist()]

        return write_csv(path, header, rows())


def _cluster(
    rng: np.random.Generator, count: int, dim: int, center: float, std: float
) -> NDArray[np.float64]:
    offset = np.zeros(dim)
    offset[0] = center
    return offset + std * rng.standard_normal((count, dim))


def make_dataset(spec: GeneratorSpec | Mapping[str, Any]) -> GroupedDataset:
    """
    Generate a grouped dataset

    Each image gets pos_per_image positives around pos_center, except images
    drawn as empty-positive, and neg_per_image negatives of which
    round(hard_fraction * neg_per_image) sit around hard_center and the rest
    around easy_center.

    Raises:
        BadSpecError: the mapping does not describe a valid GeneratorSpec
    """
    if not isinstance(spec, GeneratorSpec):
        try:
            spec = GeneratorSpec.model_validate(dict(spec))
        except ValidationError as e:
            raise BadSpecError(str(e)) from e

    rng = np.random.default_rng(spec.seed)
    n_hard = spec.hard_per_image
    n_easy = spec.neg_per_image - n_hard

    images = []
    for _ in range(spec.images):
        empty = bool(rng.random() < spec.empty_fraction)
        n_pos = 0 if empty else spec.pos_per_image
        positives = _cluster(rng, n_pos, spec.dim, spec.pos_center, spec.pos_std)
        hard = _cluster(rng, n_hard, spec.dim, spec.hard_center, spec.neg_std)
        easy = _cluster(rng, n_easy, spec.dim, spec.easy_center, spec.neg_std)
        negatives = np.vstack([hard, easy])
        images.append(ImageGroup(positives=positives, negatives=negatives))

    empty_count = sum(1 for image in images if image.n_pos == 0)
    logger.info(
        f"Generated {spec.images} images ({spec.pos_per_image} positives, "
        f"{spec.neg_per_image} negatives, {n_hard} hard; "
        f"{empty_count} without positives)"
    )
    return GroupedDataset(images=images, spec=spec)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Equal-width bins on [0, 1] and their probability densities"""

    edges: NDArray[np.float64]
    densities: NDArray[np.float64]

    @property
    def centers(self) -> NDArray[np.float64]:
        return np.asarray((self.edges[:-1] + self.edges[1:]) / 2.0)

    @property
    def widths(self) -> NDArray[np.float64]:
        return np.diff(self.edges)

    @property
    def mode(self) -> float:
        """Center of the densest bin"""
        return float(self.centers[int(np.argmax(self.densities))])


def empirical_pdf(
    values: ArrayLike, bins: int = DEFAULT_BINS, weights: ArrayLike | None = None
) -> Histogram:
    """
    Histogram density estimate of probability values

    With weights, each value counts in proportion to its weight, which turns
    tilt weights into the PDF of the tilted distribution.

    Raises:
        EmptyInputError: no values
        BadSpecError: fewer than 2 bins
    """
    data = np.asarray(values, dtype=np.float64).reshape(-1)
    if data.size == 0:
        raise EmptyInputError("cannot estimate a PDF from no values")
    if bins < 2:
        raise BadSpecError(f"need at least 2 bins, got {bins}")

    weight_array = None
    if weights is not None:
        weight_array = np.asarray(weights, dtype=np.float64).reshape(-1)

    densities, edges = np.histogram(
        data, bins=bins, range=(0.0, 1.0), weights=weight_array, density=True
    )
    return Histogram(edges=edges, densities=densities)
