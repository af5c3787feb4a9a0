"""
Experiment bodies behind the CLI commands

Each function takes a resolved ExperimentConfig, writes its CSV files into
config.out and returns a summary the CLI prints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from .config import ExperimentConfig
from .drloss import LOSS_NAMES, LossName, loss_function
from .errors import DivergenceError
from .export import write_csv
from .gradcheck import check, corrupt, random_instance
from .runs import RunManager
from .surrogate import SurrogateSpec, column_name, evaluate
from .synth import GroupedDataset, empirical_pdf, make_dataset, sample_scores
from .tilt import tilt_negative
from .trainer import (
    Model,
    TrainTrace,
    margin_pass_rate,
    pooled_scores,
    save_model,
    threshold_sweep,
    train,
)

logger = logging.getLogger(__name__)

# iterations averaged into a run's final loss
FINAL_LOSS_WINDOW = 100
# instances are redrawn until extreme scores are this many steps apart
EXTREME_GAP_STEPS = 100


@dataclass(frozen=True)
class TiltSummary:
    stddev: float
    lam: float
    raw_mean: float
    expectation: float
    mode: float
    path: Path


def tilt_pdf_name(stddev: float, lam: float) -> str:
    return f"pdf_{stddev:g}_{lam:g}.csv"


def tilt_demo(config: ExperimentConfig) -> list[TiltSummary]:
    """Tilt Gaussian score samples with each lambda and histogram the result"""
    summaries = []
    for stddev in config.sample_stddevs:
        sample = sample_scores(
            config.sample_mean, stddev, config.effective_sample_count, config.seed
        )
        raw_mean = float(sample.values.mean())
        for lam in config.tilt_lambdas:
            dist = tilt_negative(sample.values, lam)
            histogram = empirical_pdf(
                sample.values, config.bins, weights=dist.weights
            )
            path = write_csv(
                config.out / tilt_pdf_name(stddev, lam),
                ["bin_center", "density"],
                zip(histogram.centers.tolist(), histogram.densities.tolist()),
            )
            summaries.append(
                TiltSummary(
                    stddev, lam, raw_mean, dist.expectation, histogram.mode, path
                )
            )
            logger.info(
                f"stddev {stddev:g}, lambda {lam:g}: expectation "
                f"{dist.expectation:.4f} (raw mean {raw_mean:.4f})"
            )
    return summaries


def curve_surrogates(config: ExperimentConfig) -> list[SurrogateSpec]:
    return (
        [SurrogateSpec.hinge()]
        + [SurrogateSpec.quadratic(rho) for rho in config.curve_rhos]
        + [SurrogateSpec.logistic(sharpness) for sharpness in config.curve_Ls]
    )


def loss_curves(config: ExperimentConfig) -> Path:
    """Tabulate every surrogate on a symmetric grid over [-1, 1] containing 0"""
    half = (config.curve_points - 1) // 2
    z = np.arange(-half, half + 1, dtype=np.float64) / half
    surrogates = curve_surrogates(config)

    columns = [z]
    for spec in surrogates:
        values, _ = evaluate(spec, z)
        columns.append(np.asarray(values))

    header = ["z"] + [column_name(spec) for spec in surrogates]
    rows = np.column_stack(columns).tolist()
    return write_csv(config.out / "losses.csv", header, rows)


class GradCheckSummary(BaseModel):
    """Worst gradient-check outcome of one loss over every instance"""

    loss: str
    instances: int
    max_rel_error: float
    worst_instance: int
    worst_index: str
    passed: bool


GRADCHECK_HEADER = [
    "loss",
    "instances",
    "max_rel_error",
    "worst_instance",
    "worst_index",
    "passed",
]


def gradcheck_sweep(
    config: ExperimentConfig, corrupt_gradients: bool = False
) -> list[GradCheckSummary]:
    """Check every loss on the same seeded random instances"""
    rng = np.random.default_rng(config.seed)
    instances = [
        random_instance(
            rng,
            max_pos=config.gradcheck_max_pos,
            max_neg=config.gradcheck_max_neg,
            min_gap=EXTREME_GAP_STEPS * config.gradcheck_step,
        )
        for _ in range(config.gradcheck_instances)
    ]

    summaries = []
    for name in LOSS_NAMES:
        fn = loss_function(config.loss_spec(name))
        if corrupt_gradients:
            fn = corrupt(fn)

        worst_error = -1.0
        worst_instance = 0
        worst_index = ""
        all_passed = True
        for number, scores in enumerate(instances):
            report = check(
                fn, scores, config.gradcheck_step, config.gradcheck_threshold
            )
            all_passed = all_passed and report.passed
            if report.max_rel_error > worst_error:
                worst_error = report.max_rel_error
                worst_instance = number
                worst_index = f"{report.worst_index[0]}[{report.worst_index[1]}]"

        summaries.append(
            GradCheckSummary(
                loss=name,
                instances=len(instances),
                max_rel_error=worst_error,
                worst_instance=worst_instance,
                worst_index=worst_index,
                passed=all_passed,
            )
        )
        logger.info(f"Gradient check {name}: max relative error {worst_error:.3e}")

    write_csv(
        config.out / "gradcheck.csv",
        GRADCHECK_HEADER,
        ([getattr(s, column) for column in GRADCHECK_HEADER] for s in summaries),
    )
    return summaries


@dataclass(frozen=True)
class RunSummary:
    """Scores of a trained model on its training images"""

    final_loss: float
    margin_pass_rate: float
    mean_pos_score: float
    mean_neg_score: float


def fit(
    config: ExperimentConfig, loss: LossName | None = None, seed: int | None = None
) -> tuple[Model, TrainTrace, GroupedDataset]:
    """Generate the configured dataset and train one model on it"""
    data = make_dataset(config.generator_spec(seed))
    model, trace = train(data, config.trainer_config(loss, seed))
    return model, trace, data


def summarize(
    model: Model, trace: TrainTrace, data: GroupedDataset, gamma: float
) -> RunSummary:
    positives, negatives = pooled_scores(model, data)
    return RunSummary(
        final_loss=trace.tail_mean(FINAL_LOSS_WINDOW) if len(trace) else float("nan"),
        margin_pass_rate=margin_pass_rate(model, data, gamma),
        mean_pos_score=float(positives.mean()),
        mean_neg_score=float(negatives.mean()),
    )


def run_summary(
    config: ExperimentConfig, loss: LossName | None = None, seed: int | None = None
) -> RunSummary:
    model, trace, data = fit(config, loss, seed)
    return summarize(model, trace, data, config.gamma)


def train_run(config: ExperimentConfig) -> RunSummary:
    """
    Train the configured loss and write model, trace, score PDFs and the
    threshold sweep

    Raises:
        DivergenceError: training diverged; the partial trace is still written
    """
    out = config.out
    data = make_dataset(config.generator_spec())
    try:
        model, trace = train(data, config.trainer_config())
    except DivergenceError as e:
        if e.trace is not None:
            e.trace.to_csv(out / "trace.csv")
        raise

    save_model(model, out / "model.json")
    trace.to_csv(out / "trace.csv")

    positives, negatives = pooled_scores(model, data)
    for name, values in (("pdf_pos.csv", positives), ("pdf_neg.csv", negatives)):
        if values.size == 0:
            logger.warning(f"No scores for {name}; skipped")
            continue
        histogram = empirical_pdf(values, config.bins)
        write_csv(
            out / name,
            ["bin_center", "density"],
            zip(histogram.centers.tolist(), histogram.densities.tolist()),
        )

    write_csv(
        out / "thresholds.csv",
        ["threshold", "frac_pos_kept", "frac_neg_kept"],
        threshold_sweep(model, data, config.thresholds),
    )
    return summarize(model, trace, data, config.gamma)


class CompareRow(BaseModel):
    """Seed-averaged outcome of one loss in a comparison sweep"""

    loss: str
    success: bool
    runs: int
    failed_runs: int = 0
    final_loss: float = float("nan")
    final_loss_std: float = float("nan")
    margin_pass_rate: float = float("nan")
    mean_pos_score: float = float("nan")
    mean_neg_score: float = float("nan")
    error_message: str = ""


COMPARE_HEADER = [
    "loss",
    "final_loss",
    "final_loss_std",
    "margin_pass_rate",
    "mean_pos_score",
    "mean_neg_score",
    "failed_runs",
]


def compare(
    config: ExperimentConfig, losses: tuple[LossName, ...] = LOSS_NAMES
) -> list[CompareRow]:
    """Train every loss on shared seeds; failed runs are recorded, not raised"""
    seeds = [config.seed + offset for offset in range(config.compare_seeds)]
    manager = RunManager()
    rows = []

    for loss in losses:
        for seed in seeds:
            manager.execute(loss, seed, partial(run_summary, config, loss, seed))

        runs = manager.for_loss(loss)
        done = [run.result for run in runs if run.status == "completed"]
        failed = [run for run in runs if run.status == "failed"]
        row = CompareRow(
            loss=loss,
            success=bool(done),
            runs=len(runs),
            failed_runs=len(failed),
            error_message="; ".join(run.error_message or "" for run in failed),
        )
        if done:
            final = np.array([summary.final_loss for summary in done])
            row = row.model_copy(
                update={
                    "final_loss": float(final.mean()),
                    "final_loss_std": float(final.std()),
                    "margin_pass_rate": float(
                        np.mean([summary.margin_pass_rate for summary in done])
                    ),
                    "mean_pos_score": float(
                        np.mean([summary.mean_pos_score for summary in done])
                    ),
                    "mean_neg_score": float(
                        np.mean([summary.mean_neg_score for summary in done])
                    ),
                }
            )
        rows.append(row)
        logger.info(
            f"Compared {loss}: {len(done)}/{len(runs)} runs completed, "
            f"pass rate {row.margin_pass_rate:.3f}"
        )

    write_csv(
        config.out / "compare.csv",
        COMPARE_HEADER,
        ([getattr(row, column) for column in COMPARE_HEADER] for row in rows),
    )
    return rows
