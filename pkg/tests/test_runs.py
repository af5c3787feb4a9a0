"""
Tests for run tracking
"""

import logging

import pytest

from drank.errors import DivergenceError, NoPositivesError
from drank.runs import RunManager
from drank.trainer import TrainTrace


class TestRunManager:
    """Test RunManager bookkeeping"""

    def test_start_run(self):
        """A started run is tracked as running"""
        manager = RunManager()
        run_id = manager.start_run("dr", 3)

        run = manager.runs[run_id]
        assert run.status == "running"
        assert (run.loss, run.seed) == ("dr", 3)
        assert run.end_time is None

    def test_complete_run(self):
        """Completing stores the result and end time"""
        manager = RunManager()
        run_id = manager.start_run("focal", 0)
        manager.complete_run(run_id, {"final_loss": 0.2})

        run = manager.runs[run_id]
        assert run.status == "completed"
        assert run.result == {"final_loss": 0.2}
        assert run.end_time is not None

    def test_fail_run_logs(self, caplog):
        """Failing records the message and logs a warning"""
        manager = RunManager()
        run_id = manager.start_run("worst_case", 1)

        with caplog.at_level(logging.WARNING, logger="drank.runs"):
            manager.fail_run(run_id, "diverged")

        assert manager.runs[run_id].status == "failed"
        assert manager.runs[run_id].error_message == "diverged"
        assert "diverged" in caplog.text

    def test_unknown_run(self):
        """Unknown ids are ignored"""
        manager = RunManager()
        manager.complete_run("missing", 1)
        manager.fail_run("missing", "x")
        assert "missing" not in manager.runs


class TestExecute:
    """Test RunManager.execute"""

    def test_success(self):
        """The body's return value becomes the result"""
        manager = RunManager()
        run = manager.execute("dr", 0, lambda: 42)
        assert run.status == "completed"
        assert run.result == 42

    @pytest.mark.parametrize(
        "error",
        [
            DivergenceError("loss became non-finite", TrainTrace()),
            NoPositivesError("no positives"),
            FloatingPointError("overflow"),
        ],
    )
    def test_failures_recorded(self, error):
        """Domain and numeric errors mark the run failed"""

        def body():
            raise error

        run = RunManager().execute("neg_only", 2, body)
        assert run.status == "failed"
        assert type(error).__name__ in run.error_message

    def test_other_errors_propagate(self):
        """Programming errors are not swallowed"""

        def body():
            raise KeyError("bug")

        with pytest.raises(KeyError):
            RunManager().execute("dr", 0, body)

    def test_for_loss_keeps_order(self):
        """Runs come back per loss in submission order"""
        manager = RunManager()
        for seed in range(3):
            manager.execute("dr", seed, lambda: None)
            manager.execute("focal", seed, lambda: None)

        assert [run.seed for run in manager.for_loss("dr")] == [0, 1, 2]
        assert len(manager.for_loss("focal")) == 3
        assert manager.for_loss("all_pairs") == []
