"""
drank command-line interface

    drank <command> [--config FILE] [--seed N] [--out DIR] [key=value ...]

Exit codes: 0 success, 1 validation or check failure, 2 divergence.
"""

import logging
from collections.abc import Callable
from pathlib import Path
from typing import Annotated, Any

import typer
from rich import box
from rich.console import Console
from rich.table import Table

from . import experiments
from .config import ExperimentConfig, configure_logging, resolve_config, write_manifest
from .errors import DivergenceError, DrankError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DIVERGED = 2

app = typer.Typer(
    name="drank",
    help="Distributional ranking loss experiments",
    add_completion=False,
    rich_markup_mode="rich",
)

console = Console()

ConfigOption = Annotated[
    Path | None, typer.Option("--config", "-c", help="Key/value config file")
]
SeedOption = Annotated[int | None, typer.Option("--seed", "-s", help="Random seed")]
OutOption = Annotated[Path | None, typer.Option("--out", "-o", help="Output directory")]
Overrides = Annotated[
    list[str] | None, typer.Argument(help="Config overrides as key=value")
]


@app.callback()
def setup(
    log_level: Annotated[
        str | None, typer.Option("--log-level", help="Override DRANK_LOG_LEVEL")
    ] = None,
) -> None:
    """Distributional ranking loss experiments"""
    configure_logging(log_level)


def _run(
    command: str,
    config_file: Path | None,
    seed: int | None,
    out: Path | None,
    overrides: list[str] | None,
    body: Callable[[ExperimentConfig], int],
) -> None:
    """Resolve config, write the manifest, run body and map errors to exit codes"""
    try:
        config = resolve_config(config_file, seed, out, overrides)
        config = config.model_copy(update={"experiment": command})
        write_manifest(config.out, command, config)
        code = body(config)
    except DivergenceError as e:
        console.print(f"[bold red]Diverged:[/bold red] {e}")
        raise typer.Exit(EXIT_DIVERGED) from e
    except (DrankError, ValueError) as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        raise typer.Exit(EXIT_FAILURE) from e

    if code != EXIT_OK:
        raise typer.Exit(code)


@app.command("tilt-demo")
def tilt_demo(
    overrides: Overrides = None,
    config_file: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
) -> None:
    """Histogram tilted Gaussian score samples for each stddev and lambda"""

    def body(config: ExperimentConfig) -> int:
        summaries = experiments.tilt_demo(config)
        table = Table(title="Tilted expectations", box=box.ROUNDED)
        for column in ("stddev", "lambda", "raw mean", "expectation", "mode"):
            table.add_column(column, justify="right")
        for s in summaries:
            table.add_row(
                f"{s.stddev:g}",
                f"{s.lam:g}",
                f"{s.raw_mean:.4f}",
                f"{s.expectation:.4f}",
                f"{s.mode:.3f}",
            )
        console.print(table)
        console.print(f"Wrote {len(summaries)} PDFs to {config.out}")
        return EXIT_OK

    _run("tilt-demo", config_file, seed, out, overrides, body)


@app.command("loss-curves")
def loss_curves(
    overrides: Overrides = None,
    config_file: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
) -> None:
    """Tabulate the hinge loss and its smooth variants on [-1, 1]"""

    def body(config: ExperimentConfig) -> int:
        path = experiments.loss_curves(config)
        console.print(f"Wrote {path}")
        return EXIT_OK

    _run("loss-curves", config_file, seed, out, overrides, body)


@app.command("gradcheck")
def gradcheck(
    overrides: Overrides = None,
    config_file: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    corrupt: Annotated[
        bool, typer.Option("--corrupt", help="Scale one analytic gradient entry")
    ] = False,
) -> None:
    """Compare every loss's analytic gradient with central differences"""

    def body(config: ExperimentConfig) -> int:
        summaries = experiments.gradcheck_sweep(config, corrupt_gradients=corrupt)
        table = Table(
            title=f"Gradient check ({config.gradcheck_instances} instances)",
            box=box.ROUNDED,
        )
        table.add_column("loss", style="cyan")
        table.add_column("max rel. error", justify="right")
        table.add_column("worst", justify="right")
        table.add_column("status")
        for s in summaries:
            status = "[green]pass[/green]" if s.passed else "[red]FAIL[/red]"
            table.add_row(
                s.loss,
                f"{s.max_rel_error:.3e}",
                f"#{s.worst_instance} {s.worst_index}",
                status,
            )
        console.print(table)
        return EXIT_OK if all(s.passed for s in summaries) else EXIT_FAILURE

    _run("gradcheck", config_file, seed, out, overrides, body)


@app.command("train")
def train(
    overrides: Overrides = None,
    config_file: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
) -> None:
    """Train one loss and write model, trace, score PDFs and thresholds"""

    def body(config: ExperimentConfig) -> int:
        summary = experiments.train_run(config)
        console.print(
            f"{config.loss}: final loss {summary.final_loss:.6g}, "
            f"margin pass rate {summary.margin_pass_rate:.3f}, "
            f"mean positive {summary.mean_pos_score:.4f}, "
            f"mean negative {summary.mean_neg_score:.4f}"
        )
        return EXIT_OK

    _run("train", config_file, seed, out, overrides, body)


@app.command("compare")
def compare(
    overrides: Overrides = None,
    config_file: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
) -> None:
    """Train every loss on shared seeds and summarize"""

    def body(config: ExperimentConfig) -> int:
        rows = experiments.compare(config)
        table = Table(title="Loss comparison", box=box.ROUNDED)
        table.add_column("loss", style="cyan")
        for column in ("final loss", "pass rate", "mean pos", "mean neg", "failed"):
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(
                row.loss,
                f"{row.final_loss:.4g}",
                f"{row.margin_pass_rate:.3f}",
                f"{row.mean_pos_score:.4f}",
                f"{row.mean_neg_score:.4f}",
                str(row.failed_runs),
            )
        console.print(table)
        return EXIT_OK

    _run("compare", config_file, seed, out, overrides, body)


def main(argv: list[str] | None = None) -> Any:
    """Entry point for the drank console script"""
    return app(args=argv)


if __name__ == "__main__":
    main()
