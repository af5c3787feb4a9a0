"""
Configuration for drank

Process-level settings come from DRANK_* environment variables. Experiment
settings are a flat ExperimentConfig resolved from defaults, an optional
key/value config file and command-line overrides, in that order.
"""

from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .drloss import LossName, LossSpec
from .errors import BadConfigError
from .scores import DrParams, Prior, tuned_lambdas
from .surrogate import SurrogateKind, SurrogateSpec
from .synth import GeneratorSpec
from .trainer import TrainerConfig

# Configuration from environment variables
LOG_LEVEL = os.getenv("DRANK_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("DRANK_LOG_FILE", "")
OUTPUT_DIR = os.getenv("DRANK_OUTPUT_DIR", "results")
WORKERS = int(os.getenv("DRANK_WORKERS", "1"))

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
MANIFEST_NAME = "manifest.json"

# losses evaluated on every candidate independently
PER_CANDIDATE_LOSSES = ("focal", "cross_entropy")

logger = logging.getLogger(__name__)

_logging_configured = False


def configure_logging(level: str | None = None) -> None:
    """Install console (and optional file) log handlers once"""
    global _logging_configured
    if _logging_configured:
        return

    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if LOG_FILE:
        log_path = Path(LOG_FILE)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path))

    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(), format=LOG_FORMAT, handlers=handlers
    )
    _logging_configured = True
    logger.debug(f"Logging configured at level {level or LOG_LEVEL}")


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ExperimentConfig(BaseModel):
    """Fully resolved settings of one CLI run"""

    model_config = ConfigDict(extra="forbid")

    experiment: str = ""
    seed: int = 0
    out: Path = Field(default_factory=lambda: Path(OUTPUT_DIR))
    workers: int = Field(default=WORKERS, ge=1)

    # loss
    loss: LossName = "dr"
    lambda_pos: float = Field(default=1.0, gt=0)
    lambda_neg: float = Field(default=0.1, gt=0)
    h_pos: float | None = Field(default=None, gt=1)
    h_neg: float | None = Field(default=None, gt=1)
    gamma: float = Field(default=0.5, ge=0, le=1)
    surrogate: SurrogateKind = "logistic"
    L: float = Field(default=6.0, gt=0)
    rho: float = Field(default=0.5, gt=0)
    hard_negatives: int = Field(default=0, ge=0)
    focal_alpha: float = Field(default=0.25, gt=0, lt=1)
    focal_gamma: float = Field(default=2.0, ge=0)

    # dataset
    dim: int = Field(default=8, ge=2)
    images: int = Field(default=100, ge=1)
    pos_per_image: int = Field(default=2, ge=0)
    neg_per_image: int = Field(default=2000, ge=1)
    hard_fraction: float = Field(default=0.01, ge=0, le=1)
    empty_fraction: float = Field(default=0.0, ge=0, le=1)
    pos_center: float = 0.5
    hard_center: float = 0.25
    easy_center: float = -0.5
    pos_std: float = Field(default=0.03, gt=0)
    neg_std: float = Field(default=0.02, gt=0)

    # trainer
    batch_size: int = Field(default=4, ge=1)
    iterations: int = Field(default=2000, ge=0)
    learning_rate: float = Field(default=0.5, gt=0)
    tau: float = Field(default=4.0, ge=0)
    lr_schedule: list[tuple[int, float]] = Field(default_factory=list)
    initial_probability: float = Field(default=0.5, gt=0, lt=1)
    baseline_learning_rate: float = Field(default=0.01, gt=0)
    baseline_initial_probability: float = Field(default=0.01, gt=0, lt=1)
    thresholds: list[float] = Field(
        default_factory=lambda: [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
    )
    compare_seeds: int = Field(default=1, ge=1)

    # tilt demo
    sample_mean: float = 0.3
    sample_stddevs: list[float] = Field(default_factory=lambda: [0.05, 0.2])
    tilt_lambdas: list[float] = Field(
        default_factory=lambda: [1e9, 1.0, 0.1, 0.02, 0.01]
    )
    sample_count: int = Field(default=1_000_000, ge=1)
    full_size: bool = False
    bins: int = Field(default=100, ge=2)

    # loss curves
    curve_rhos: list[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0])
    curve_Ls: list[float] = Field(default_factory=lambda: [2.0, 4.0, 6.0, 10.0])
    curve_points: int = Field(default=201, ge=3)

    # gradient check
    gradcheck_instances: int = Field(default=200, ge=1)
    gradcheck_step: float = Field(default=1e-5, gt=0)
    gradcheck_threshold: float = Field(default=1e-5, gt=0)
    gradcheck_max_pos: int = Field(default=20, ge=1)
    gradcheck_max_neg: int = Field(default=500, ge=1)

    @field_validator(
        "thresholds",
        "sample_stddevs",
        "tilt_lambdas",
        "curve_rhos",
        "curve_Ls",
        mode="before",
    )
    @classmethod
    def _parse_list(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("lr_schedule", mode="before")
    @classmethod
    def _parse_schedule(cls, value: Any) -> Any:
        if isinstance(value, str):
            steps = []
            for item in _split_list(value):
                iteration, _, factor = item.partition(":")
                steps.append((int(iteration), float(factor)))
            return steps
        return value

    @field_validator("curve_points")
    @classmethod
    def _odd_points(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("curve_points must be odd so the grid contains z = 0")
        return value

    @property
    def effective_sample_count(self) -> int:
        return 10_000_000 if self.full_size else self.sample_count

    def dr_params(self) -> DrParams:
        lambda_pos, lambda_neg = self.lambda_pos, self.lambda_neg
        # a base given for one class overrides only that class's lambda
        if self.h_pos is not None:
            lambda_pos = tuned_lambdas(self.h_pos, math.e)[0]
        if self.h_neg is not None:
            lambda_neg = tuned_lambdas(math.e, self.h_neg)[1]

        prior_neg = (
            Prior.hardest(self.hard_negatives) if self.hard_negatives else Prior()
        )
        return DrParams(
            lambda_pos=lambda_pos,
            lambda_neg=lambda_neg,
            gamma=self.gamma,
            surrogate=SurrogateSpec(kind=self.surrogate, rho=self.rho, L=self.L),
            prior_neg=prior_neg,
        )

    def loss_spec(self, name: LossName | None = None) -> LossSpec:
        return LossSpec(
            name=name or self.loss,
            params=self.dr_params(),
            focal_alpha=self.focal_alpha,
            focal_gamma=self.focal_gamma,
        )

    def generator_spec(self, seed: int | None = None) -> GeneratorSpec:
        return GeneratorSpec(
            dim=self.dim,
            images=self.images,
            pos_per_image=self.pos_per_image,
            neg_per_image=self.neg_per_image,
            hard_fraction=self.hard_fraction,
            empty_fraction=self.empty_fraction,
            pos_center=self.pos_center,
            hard_center=self.hard_center,
            easy_center=self.easy_center,
            pos_std=self.pos_std,
            neg_std=self.neg_std,
            seed=self.seed if seed is None else seed,
        )

    def trainer_config(
        self, name: LossName | None = None, seed: int | None = None
    ) -> TrainerConfig:
        loss = self.loss_spec(name)
        baseline = loss.name in PER_CANDIDATE_LOSSES
        return TrainerConfig(
            batch_size=self.batch_size,
            iterations=self.iterations,
            learning_rate=(
                self.baseline_learning_rate if baseline else self.learning_rate
            ),
            seed=self.seed if seed is None else seed,
            loss=loss,
            tau=self.tau,
            lr_schedule=self.lr_schedule,
            initial_probability=(
                self.baseline_initial_probability
                if baseline
                else self.initial_probability
            ),
            workers=self.workers,
        )


def parse_config_file(path: Path) -> dict[str, str]:
    """
    Read a flat key/value configuration file

    Accepts `key = value` and `key value` lines; blank lines and lines
    starting with # are skipped.
    """
    logger.debug(f"Reading experiment config from: {path}")
    if not path.exists():
        raise BadConfigError(f"config file not found: {path}")

    values: dict[str, str] = {}
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        if "=" in line:
            key, value = line.split("=", 1)
        elif " " in line:
            key, value = line.split(" ", 1)
        else:
            raise BadConfigError(f"config line has no value: {line!r}")
        values[key.strip()] = value.strip()
        logger.debug(f"Config {key.strip()}={value.strip()}")

    return values


def parse_overrides(overrides: list[str] | None) -> dict[str, str]:
    """Turn trailing `key=value` arguments into a mapping"""
    values: dict[str, str] = {}
    for item in overrides or []:
        if "=" not in item:
            raise BadConfigError(f"override must look like key=value: {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def resolve_config(
    config_file: Path | None = None,
    seed: int | None = None,
    out: Path | None = None,
    overrides: list[str] | None = None,
) -> ExperimentConfig:
    """
    Merge defaults, config file and flags into one ExperimentConfig

    Flags and overrides take precedence over file values.

    Raises:
        BadConfigError: unknown key, unparsable value or failed validation
    """
    merged: dict[str, Any] = {}
    if config_file is not None:
        merged.update(parse_config_file(config_file))
    merged.update(parse_overrides(overrides))
    if seed is not None:
        merged["seed"] = seed
    if out is not None:
        merged["out"] = out

    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        raise BadConfigError(str(e)) from e


def write_manifest(out_dir: Path, command: str, config: ExperimentConfig) -> Path:
    """Write the resolved configuration next to a run's outputs"""
    from . import __version__

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "config": config.model_dump(mode="json"),
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote manifest to {path}")
    return path
