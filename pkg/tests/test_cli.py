"""
Tests for the drank command-line interface
"""

import csv
import json
import math
from unittest.mock import patch

import numpy as np
import pytest
from typer.testing import CliRunner

from drank.cli import EXIT_DIVERGED, EXIT_FAILURE, EXIT_OK, app, main
from drank.errors import DivergenceError
from drank.synth import empirical_pdf, sample_scores
from drank.trainer import TrainTrace
from tests.conftest import TestConstants

runner = CliRunner()


@pytest.fixture(autouse=True)
def no_log_handlers():
    """Keep CLI runs from installing handlers on the runner's streams"""
    with patch("drank.cli.configure_logging") as mock_configure:
        yield mock_configure


def _read_csv(path):
    with path.open() as handle:
        return list(csv.reader(handle))


def _invoke(*args):
    return runner.invoke(app, [str(arg) for arg in args])


class TestLossCurves:
    """Test `drank loss-curves`"""

    def test_logistic_at_zero(self, tmp_path):
        """The z = 0 row of logistic L=6 is ln 2 / 6"""
        result = _invoke("loss-curves", "--out", tmp_path)
        assert result.exit_code == EXIT_OK, result.output

        rows = _read_csv(tmp_path / "losses.csv")
        zero = dict(zip(rows[0], rows[101]))
        assert float(zero["z"]) == 0.0
        value = float(zero["logistic_L6"])
        assert value == pytest.approx(TestConstants.LN2 / 6, rel=1e-8)

    def test_manifest(self, tmp_path):
        """Every command writes a manifest of its resolved config"""
        _invoke("loss-curves", "--out", tmp_path, "--seed", 4, "curve_points=11")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "loss-curves"
        assert manifest["config"]["seed"] == 4
        assert manifest["config"]["curve_points"] == 11
        assert manifest["config"]["experiment"] == "loss-curves"


class TestTiltDemo:
    """Test `drank tilt-demo`"""

    def test_files(self, tmp_path):
        """Ten PDFs plus the manifest are written"""
        result = _invoke("tilt-demo", "--out", tmp_path, "sample_count=20000")
        assert result.exit_code == EXIT_OK, result.output

        pdfs = sorted(path.name for path in tmp_path.glob("pdf_*.csv"))
        assert len(pdfs) == 10
        assert (tmp_path / "manifest.json").exists()
        assert len(list(tmp_path.iterdir())) == 11

    def test_huge_lambda_matches_raw_histogram(self, tmp_path):
        """lambda = 1e9 reproduces the untilted histogram"""
        _invoke("tilt-demo", "--out", tmp_path, "sample_count=20000")
        rows = _read_csv(tmp_path / "pdf_0.05_1e+09.csv")[1:]
        tilted = np.array([float(row[1]) for row in rows])

        raw = empirical_pdf(sample_scores(0.3, 0.05, 20000, seed=0).values)
        np.testing.assert_allclose(tilted, raw.densities, rtol=1e-6, atol=1e-6)

    def test_reruns_are_byte_identical(self, tmp_path):
        """Same seed and config give the same bytes"""
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            _invoke("tilt-demo", "-o", out, "-s", 5, "sample_count=5000")

        for path in first.glob("pdf_*.csv"):
            assert path.read_bytes() == (second / path.name).read_bytes()


class TestGradcheck:
    """Test `drank gradcheck`"""

    def test_passes(self, tmp_path):
        """Exit 0 when every loss passes"""
        result = _invoke(
            "gradcheck", "-o", tmp_path, "gradcheck_instances=3", "gradcheck_max_neg=50"
        )
        assert result.exit_code == EXIT_OK, result.output
        rows = _read_csv(tmp_path / "gradcheck.csv")
        assert len(rows) == 7

    def test_corrupt_fails(self, tmp_path):
        """--corrupt makes every loss fail and exits 1"""
        result = _invoke(
            "gradcheck", "-o", tmp_path, "--corrupt", "gradcheck_instances=2"
        )
        assert result.exit_code == EXIT_FAILURE
        rows = _read_csv(tmp_path / "gradcheck.csv")
        assert all(row[-1] == "0" for row in rows[1:])


class TestTrain:
    """Test `drank train`"""

    def test_outputs(self, tmp_path):
        """A short run writes every artifact"""
        result = _invoke("train", "-o", tmp_path, *TestConstants.SMALL_RUN_OVERRIDES)
        assert result.exit_code == EXIT_OK, result.output
        for name in (
            "manifest.json",
            "model.json",
            "trace.csv",
            "pdf_pos.csv",
            "pdf_neg.csv",
            "thresholds.csv",
        ):
            assert (tmp_path / name).exists(), name

    def test_config_file(self, tmp_path):
        """Settings come from --config with flags on top"""
        config_path = tmp_path / "run.conf"
        config_path.write_text(TestConstants.SAMPLE_CONFIG_CONTENT)
        out = tmp_path / "out"

        result = _invoke(
            "train",
            "-c",
            config_path,
            "-o",
            out,
            *TestConstants.SMALL_RUN_OVERRIDES,
        )
        assert result.exit_code == EXIT_OK, result.output
        config = json.loads((out / "manifest.json").read_text())["config"]
        assert config["learning_rate"] == 0.25
        assert config["iterations"] == 20
        assert len(_read_csv(out / "thresholds.csv")) == 4

    def test_divergence_exit_code(self, tmp_path, mocker):
        """Divergence exits 2"""
        error = DivergenceError("loss became non-finite at iteration 0", TrainTrace())
        mocker.patch("drank.cli.experiments.train_run", side_effect=error)
        result = _invoke("train", "-o", tmp_path)
        assert result.exit_code == EXIT_DIVERGED
        assert "Diverged" in result.output

    def test_unknown_key(self, tmp_path):
        """Unknown config keys exit 1"""
        result = _invoke("train", "-o", tmp_path, "colour=red")
        assert result.exit_code == EXIT_FAILURE
        assert "Error" in result.output

    def test_missing_config_file(self, tmp_path):
        """A missing config file exits 1"""
        result = _invoke("train", "-c", tmp_path / "absent.conf")
        assert result.exit_code == EXIT_FAILURE


class TestCompare:
    """Test `drank compare`"""

    def test_every_loss_row(self, tmp_path):
        """compare.csv holds one row per loss"""
        result = _invoke("compare", "-o", tmp_path, *TestConstants.SMALL_RUN_OVERRIDES)
        assert result.exit_code == EXIT_OK, result.output

        rows = _read_csv(tmp_path / "compare.csv")
        assert [row[0] for row in rows[1:]] == [
            "dr",
            "neg_only",
            "all_pairs",
            "worst_case",
            "focal",
            "cross_entropy",
        ]
        assert all(math.isfinite(float(row[1])) for row in rows[1:])


class TestMain:
    """Test the console script entry point"""

    def test_main_exits_with_code(self, tmp_path):
        """main runs the app and exits with the command's code"""
        with pytest.raises(SystemExit) as excinfo:
            main(["loss-curves", "--out", str(tmp_path)])
        assert excinfo.value.code == EXIT_OK
        assert (tmp_path / "losses.csv").exists()

    def test_log_level_option(self, tmp_path, no_log_handlers):
        """--log-level is passed to logging setup"""
        _invoke("--log-level", "DEBUG", "loss-curves", "-o", tmp_path)
        no_log_handlers.assert_called_once_with("DEBUG")
