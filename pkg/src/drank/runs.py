import logging
import uuid
from collections.abc import Callable
from dataclasses import dataclass
from datetime import datetime
from typing import Any

from .errors import DrankError

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """Track one training run of a sweep."""

    run_id: str
    loss: str
    seed: int
    start_time: datetime
    status: str  # 'running', 'completed', 'failed'
    result: Any = None
    error_message: str | None = None
    end_time: datetime | None = None


class RunManager:
    """Simple run tracking."""

    def __init__(self) -> None:
        self.runs: dict[str, RunRecord] = {}

    def start_run(self, loss: str, seed: int) -> str:
        """Start tracking a new run."""
        run_id = str(uuid.uuid4())[:8]
        self.runs[run_id] = RunRecord(
            run_id=run_id,
            loss=loss,
            seed=seed,
            start_time=datetime.now(),
            status="running",
        )
        logger.debug(f"Started run {run_id}: {loss} seed {seed}")
        return run_id

    def complete_run(self, run_id: str, result: Any) -> None:
        if run_id in self.runs:
            run = self.runs[run_id]
            run.status = "completed"
            run.result = result
            run.end_time = datetime.now()

    def fail_run(self, run_id: str, error_message: str) -> None:
        if run_id in self.runs:
            run = self.runs[run_id]
            run.status = "failed"
            run.error_message = error_message
            run.end_time = datetime.now()
            logger.warning(
                f"Run {run_id} ({run.loss}, seed {run.seed}) failed: {error_message}"
            )

    def execute(self, loss: str, seed: int, body: Callable[[], Any]) -> RunRecord:
        """Run body under tracking; domain and numeric errors mark the run failed."""
        run_id = self.start_run(loss, seed)
        try:
            self.complete_run(run_id, body())
        except (DrankError, ValueError, ArithmeticError) as e:
            self.fail_run(run_id, f"{type(e).__name__}: {e}")
        return self.runs[run_id]

    def for_loss(self, loss: str) -> list[RunRecord]:
        """Runs of one loss in submission order."""
        return [run for run in self.runs.values() if run.loss == loss]
