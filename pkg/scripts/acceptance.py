#!/usr/bin/env python3
"""
Seeded training checks on the reference 1:1000 dataset
Usage: python scripts/acceptance.py [--seeds N] [--iterations T] [--only NAME]

Each check trains every seed from scratch, so a full run takes a few minutes.
"""

import argparse
import sys
from collections.abc import Callable
from functools import cache

import numpy as np

from drank.config import ExperimentConfig, configure_logging
from drank.drloss import LOSS_NAMES
from drank.experiments import FINAL_LOSS_WINDOW, RunSummary, fit, summarize
from drank.trainer import scaled_config, threshold_sweep, train

Check = Callable[[ExperimentConfig, list[int]], tuple[bool, str]]

HARD_MIXTURE_FRACTION = 0.05


@cache
def _summary(config_json: str, loss: str, seed: int) -> RunSummary:
    config = ExperimentConfig.model_validate_json(config_json)
    model, trace, data = fit(config, loss, seed)
    return summarize(model, trace, data, config.gamma)


def _mean(config: ExperimentConfig, loss: str, seeds: list[int], field: str) -> float:
    config_json = config.model_dump_json()
    return float(
        np.mean([getattr(_summary(config_json, loss, s), field) for s in seeds])
    )


def margin_recovery(config: ExperimentConfig, seeds: list[int]) -> tuple[bool, str]:
    """DR at gamma 0.5 satisfies the margin on 95% of images"""
    rate = _mean(config, "dr", seeds, "margin_pass_rate")
    pos = _mean(config, "dr", seeds, "mean_pos_score")
    neg = _mean(config, "dr", seeds, "mean_neg_score")
    passed = rate >= 0.95 and pos > 0.5 and neg < 0.1
    return passed, f"pass rate {rate:.3f}, mean pos {pos:.3f}, mean neg {neg:.4f}"


def separable_control(config: ExperimentConfig, seeds: list[int]) -> tuple[bool, str]:
    """Every loss satisfies the margin when there are no hard negatives"""
    easy = config.model_copy(update={"hard_fraction": 0.0})
    rates = {
        loss: _mean(easy, loss, seeds, "margin_pass_rate") for loss in LOSS_NAMES
    }
    passed = all(rate >= 0.95 for rate in rates.values())
    detail = ", ".join(f"{loss} {rate:.3f}" for loss, rate in rates.items())
    return passed, detail


def imbalance_pathology(config: ExperimentConfig, seeds: list[int]) -> tuple[bool, str]:
    """Cross entropy leaves positives at least 0.2 below DR"""
    dr = _mean(config, "dr", seeds, "mean_pos_score")
    ce = _mean(config, "cross_entropy", seeds, "mean_pos_score")
    return dr - ce >= 0.2, f"mean pos DR {dr:.3f}, cross entropy {ce:.3f}"


def pairing_order(config: ExperimentConfig, seeds: list[int]) -> tuple[bool, str]:
    """Pass rate orders DR >= neg_only > all_pairs on a harder mixture"""
    hard = config.model_copy(update={"hard_fraction": HARD_MIXTURE_FRACTION})
    rates = {
        loss: _mean(hard, loss, seeds, "margin_pass_rate")
        for loss in ("dr", "neg_only", "all_pairs")
    }
    passed = (
        rates["dr"] >= rates["neg_only"] > rates["all_pairs"]
        and rates["dr"] - rates["all_pairs"] >= 0.10
    )
    detail = ", ".join(f"{loss} {rate:.3f}" for loss, rate in rates.items())
    return passed, detail


def threshold_robustness(
    config: ExperimentConfig, seeds: list[int]
) -> tuple[bool, str]:
    """DR keeps its positives across thresholds; cross entropy loses them"""
    sweep = config.model_copy(update={"thresholds": [0.05, 0.5]})
    drops = {}
    for loss in ("dr", "cross_entropy"):
        losses = []
        for seed in seeds:
            model, _, data = fit(sweep, loss, seed)
            (_, low, _), (_, high, _) = threshold_sweep(model, data, sweep.thresholds)
            losses.append(low - high)
        drops[loss] = float(np.mean(losses))

    passed = drops["dr"] <= 0.02 and drops["cross_entropy"] >= 0.2
    return passed, (
        f"frac_pos_kept drop DR {drops['dr']:.3f}, "
        f"cross entropy {drops['cross_entropy']:.3f}"
    )


def learning_rate_scaling(
    config: ExperimentConfig, seeds: list[int]
) -> tuple[bool, str]:
    """alpha = 2 ends within 20% of the base run's final loss"""
    base_losses, scaled_losses = [], []
    for seed in seeds:
        _, trace, data = fit(config, "dr", seed)
        base_losses.append(trace.tail_mean(FINAL_LOSS_WINDOW))
        scaled = scaled_config(config.trainer_config("dr", seed), 2.0)
        _, scaled_trace = train(data, scaled)
        scaled_losses.append(scaled_trace.tail_mean(FINAL_LOSS_WINDOW))

    base, rescaled = float(np.mean(base_losses)), float(np.mean(scaled_losses))
    relative = abs(rescaled - base) / base
    return relative <= 0.2, f"final loss {base:.4g} vs {rescaled:.4g} ({relative:.1%})"


CHECKS: dict[str, Check] = {
    "margin": margin_recovery,
    "control": separable_control,
    "imbalance": imbalance_pathology,
    "pairing": pairing_order,
    "thresholds": threshold_robustness,
    "scaling": learning_rate_scaling,
}


def main():
    parser = argparse.ArgumentParser(description="drank acceptance checks")
    parser.add_argument("--seeds", type=int, default=5, help="Seeds per check")
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--only", choices=sorted(CHECKS), help="Run a single check")
    parser.add_argument("--log-level", default="WARNING")
    args = parser.parse_args()

    configure_logging(args.log_level)
    config = ExperimentConfig(iterations=args.iterations)
    seeds = list(range(args.seeds))

    success = True
    for name, check in CHECKS.items():
        if args.only and name != args.only:
            continue
        print(f"🔄 {check.__doc__}...")
        passed, detail = check(config, seeds)
        print(f"{'✅' if passed else '❌'} {name}: {detail}")
        success &= passed

    print("🎉 All checks passed!" if success else "💥 Some checks failed!")
    return 0 if success else 1


if __name__ == "__main__":
    sys.exit(main())
