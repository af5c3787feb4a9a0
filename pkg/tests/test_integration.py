"""
End-to-end tests across dataset generation, training and the CLI
"""

from unittest.mock import patch

import numpy as np
import pytest
from typer.testing import CliRunner

from drank.cli import EXIT_OK, app
from drank.config import ExperimentConfig
from drank.drloss import LossSpec
from drank.experiments import FINAL_LOSS_WINDOW, fit, summarize
from drank.scores import DrParams, Prior
from drank.synth import GeneratorSpec, make_dataset
from drank.trainer import (
    TrainerConfig,
    load_model,
    margin_pass_rate,
    pooled_scores,
    save_model,
    scaled_config,
    threshold_sweep,
    train,
)
from tests.conftest import TestConstants

runner = CliRunner()


@pytest.fixture
def imbalanced_dataset():
    """1:200 imbalance with two hard negatives per image"""
    return make_dataset(
        GeneratorSpec(
            dim=4, images=20, pos_per_image=2, neg_per_image=400, hard_fraction=0.005
        )
    )


@pytest.mark.integration
class TestTrainingPipeline:
    """Generate, train, persist and evaluate"""

    def test_dr_separates_classes(self, imbalanced_dataset):
        """DR pushes positives above 0.5 and negatives toward 0"""
        config = TrainerConfig(iterations=500, batch_size=4, seed=1)
        model, trace = train(imbalanced_dataset, config)

        positives, negatives = pooled_scores(model, imbalanced_dataset)
        assert positives.mean() > 0.5
        assert negatives.mean() < 0.1
        assert trace.losses[-20:].mean() < trace.losses[:20].mean()

    def test_hardest_prior_trains(self, imbalanced_dataset):
        """A hardest-k prior on negatives trains to a finite model"""
        params = DrParams(prior_neg=Prior.hardest(10))
        config = TrainerConfig(
            iterations=50, batch_size=4, loss=LossSpec(name="dr", params=params)
        )
        model, trace = train(imbalanced_dataset, config)
        assert np.all(np.isfinite(trace.losses))
        assert 0.0 <= margin_pass_rate(model, imbalanced_dataset) <= 1.0

    def test_saved_model_scores_identically(self, tmp_path, small_dataset):
        """A reloaded model reproduces the trained scores"""
        model, _ = train(small_dataset, TrainerConfig(iterations=20, seed=6))
        loaded = load_model(save_model(model, tmp_path / "model.json"))

        for original, restored in zip(
            pooled_scores(model, small_dataset), pooled_scores(loaded, small_dataset)
        ):
            np.testing.assert_allclose(original, restored, rtol=1e-15)

    def test_scaled_run_comparable(self, small_dataset):
        """Halving the batch with alpha = 2 keeps the final loss finite and low"""
        base = TrainerConfig(batch_size=4, iterations=100, learning_rate=0.5, seed=2)
        _, base_trace = train(small_dataset, base)
        _, scaled_trace = train(small_dataset, scaled_config(base, 2.0))

        assert len(scaled_trace) == 200
        assert np.isfinite(scaled_trace.tail_mean(100))
        assert scaled_trace.tail_mean(100) < scaled_trace.losses[:10].mean()
        assert base_trace.tail_mean(50) < base_trace.losses[:10].mean()


@pytest.mark.integration
class TestCliDeterminism:
    """Reruns with the same seed and config give byte-identical CSVs"""

    @pytest.mark.parametrize(
        "command,extra",
        [
            ("loss-curves", []),
            ("gradcheck", ["gradcheck_instances=2", "gradcheck_max_neg=30"]),
            ("train", TestConstants.SMALL_RUN_OVERRIDES),
            ("compare", TestConstants.SMALL_RUN_OVERRIDES),
        ],
    )
    def test_rerun_byte_identical(self, tmp_path, command, extra):
        """Every CSV matches byte for byte"""
        outputs = [tmp_path / "first", tmp_path / "second"]
        with patch("drank.cli.configure_logging"):
            for out in outputs:
                args = [command, "-o", str(out), "-s", "3", *extra]
                result = runner.invoke(app, args)
                assert result.exit_code == EXIT_OK, result.output

        first, second = outputs
        csvs = sorted(first.glob("*.csv"))
        assert csvs
        for path in csvs:
            assert path.read_bytes() == (second / path.name).read_bytes(), path.name


REDUCED_SCALE = {"images": 50, "neg_per_image": 1000, "iterations": 1000}
SLOW_SEEDS = (0, 1)


@pytest.fixture(scope="module")
def reduced_fits():
    """Seeded fits on a reduced 1:500 reference dataset, shared across tests"""
    cache = {}

    def run(loss, seed, **updates):
        key = (loss, seed, tuple(sorted(updates.items())))
        if key not in cache:
            config = ExperimentConfig(**REDUCED_SCALE, **updates)
            cache[key] = (config, *fit(config, loss, seed))
        return cache[key]

    return run


def _seed_mean(reduced_fits, loss, field, **updates):
    values = []
    for seed in SLOW_SEEDS:
        config, model, trace, data = reduced_fits(loss, seed, **updates)
        values.append(getattr(summarize(model, trace, data, config.gamma), field))
    return float(np.mean(values))


@pytest.mark.slow
@pytest.mark.integration
class TestReferenceBehaviour:
    """Seeded training outcomes on the reduced reference dataset"""

    def test_dr_recovers_margin(self, reduced_fits):
        """DR satisfies the 0.5 margin on nearly every image"""
        rate = _seed_mean(reduced_fits, "dr", "margin_pass_rate")
        assert rate >= 0.95
        assert _seed_mean(reduced_fits, "dr", "mean_pos_score") > 0.5
        assert _seed_mean(reduced_fits, "dr", "mean_neg_score") < 0.1

    def test_cross_entropy_underscores_positives(self, reduced_fits):
        """Cross entropy leaves mean positive scores well below DR"""
        dr = _seed_mean(reduced_fits, "dr", "mean_pos_score")
        ce = _seed_mean(reduced_fits, "cross_entropy", "mean_pos_score")
        assert dr - ce >= 0.2

    def test_pairing_order_on_hard_mixture(self, reduced_fits):
        """Pass rates order DR >= neg_only > all_pairs with hard negatives"""
        rates = {
            loss: _seed_mean(
                reduced_fits, loss, "margin_pass_rate", hard_fraction=0.05
            )
            for loss in ("dr", "neg_only", "all_pairs")
        }
        assert rates["dr"] >= rates["neg_only"] > rates["all_pairs"]
        assert rates["dr"] - rates["all_pairs"] >= 0.10

    def test_threshold_drop(self, reduced_fits):
        """Raising the threshold keeps DR positives and drops CE positives"""
        drops = {}
        for loss in ("dr", "cross_entropy"):
            values = []
            for seed in SLOW_SEEDS:
                _, model, _, data = reduced_fits(loss, seed)
                (_, low, _), (_, high, _) = threshold_sweep(model, data, [0.05, 0.5])
                values.append(low - high)
            drops[loss] = float(np.mean(values))

        assert drops["dr"] <= 0.02
        assert drops["cross_entropy"] >= 0.2

    def test_learning_rate_scaling(self, reduced_fits):
        """Halving the batch and learning rate over twice the steps ends close"""
        base, rescaled = [], []
        for seed in SLOW_SEEDS:
            config, _, trace, data = reduced_fits("dr", seed)
            base.append(trace.tail_mean(FINAL_LOSS_WINDOW))
            _, scaled_trace = train(
                data, scaled_config(config.trainer_config("dr", seed), 2.0)
            )
            rescaled.append(scaled_trace.tail_mean(FINAL_LOSS_WINDOW))

        base_loss = float(np.mean(base))
        assert abs(float(np.mean(rescaled)) - base_loss) / base_loss <= 0.2
