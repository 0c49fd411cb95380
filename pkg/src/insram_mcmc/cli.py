import logging
from importlib.metadata import version
from pathlib import Path
from typing import Annotated
from uuid import uuid4

import typer
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn

from .config import ConfigError, ExperimentConfig, load_config

logger = logging.getLogger("insram-mcmc")

app = typer.Typer(
    help="🎲 Sample Gaussian mixtures on an emulated in-SRAM datapath.",
    add_completion=False,
    rich_markup_mode="rich",
)
console = Console()

EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

ConfigOption = Annotated[
    Path,
    typer.Option("--config", "-c", help="Experiment configuration (TOML)"),
]
SeedOption = Annotated[
    int | None,
    typer.Option("--seed", "-s", help="Override base_seed", min=0),
]
OutOption = Annotated[
    Path | None,
    typer.Option("--out", "-o", help="Override the results CSV path"),
]
OverwriteOption = Annotated[
    bool,
    typer.Option("--overwrite", help="Replace existing output files"),
]


class CLIStopExecution(typer.Exit):
    """Custom exception to stop CLI execution."""

    pass


def version_callback(show_version: bool) -> None:
    """Show version and exit."""
    if show_version:
        app_version = version("insram-mcmc")
        console.print(
            f"[bold cyan]insram-mcmc[/bold cyan] version [green]{app_version}[/green]"
        )
        raise CLIStopExecution()


def setup_logging(debug: bool) -> str | None:
    """Route DEBUG logs to a per-execution file, otherwise stay silent."""
    if not debug:
        logging.basicConfig(level=logging.CRITICAL)
        return None

    execution_id = f"insram-mcmc-{version('insram-mcmc')}-cli-execution-{uuid4()}"
    logging.basicConfig(
        level=logging.DEBUG,
        filename=f"{execution_id}.log",
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logger.debug("Verbose logging enabled")
    return f"{execution_id}.log"


def _log_hint(ctx: typer.Context) -> None:
    log_file = (ctx.obj or {}).get("log_file")
    logger.debug("CLI execution completed")
    if log_file:
        console.print(
            f"[dim yellow]   💡 Debug log saved to '{log_file}'[/dim yellow]"
        )


def _load(config: Path, **overrides: object) -> ExperimentConfig:
    try:
        return load_config(config, **overrides)  # type: ignore[arg-type]
    except ConfigError as e:
        from .display import failure

        logger.error("Configuration error: %s", e)
        failure("Invalid configuration", e)
        raise typer.Exit(code=EXIT_CONFIG_ERROR) from e


@app.callback()
def main(
    ctx: typer.Context,
    debug: Annotated[
        bool,
        typer.Option(
            "--debug",
            help="Show debug logs in 'insram-mcmc-<version>-cli-execution-<uuid>.log'",
        ),
    ] = False,
    _: Annotated[
        bool,
        typer.Option(
            "--version",
            "-v",
            callback=version_callback,
            is_eager=True,
            help="Show version and exit",
        ),
    ] = False,
) -> None:
    """
    Sample Gaussian mixtures with Metropolis-Hastings through a behavioral
    model of an in-SRAM compute datapath.

    [bold cyan]Examples:[/bold cyan]

      [dim]# Single configuration point[/dim]
      insram-mcmc run -c experiment.toml --emit-trace

      [dim]# Full sweep on four processes[/dim]
      insram-mcmc sweep -c adc_sweep.toml --workers 4

      [dim]# Check a config without running it[/dim]
      insram-mcmc validate -c experiment.toml
    """
    ctx.obj = {"log_file": setup_logging(debug)}


@app.command()
def run(
    ctx: typer.Context,
    config: ConfigOption,
    seed: SeedOption = None,
    out: OutOption = None,
    emit_trace: Annotated[
        bool,
        typer.Option(
            "--emit-trace",
            help="Also write the iteration trace, trajectory and ground truth",
        ),
    ] = False,
    overwrite: OverwriteOption = False,
) -> None:
    """Run one replicate of the base configuration point."""
    try:
        cfg = _load(config, seed=seed, output=out)
        logger.debug("run: seed=%s, out=%s, emit_trace=%s", seed, out, emit_trace)

        from .config import resolve_point
        from .display import run_panel
        from .harness import ExperimentResult, result_columns, run_point
        from .outputs import emit_outputs

        resolved = resolve_point(cfg, {}, seed=cfg.seed_for(0, 0))
        with Progress(
            TextColumn("[bold cyan]{task.description}"),
            console=console,
            transient=True,
        ) as progress:
            progress.add_task(
                f"Sampling with seed {resolved.chain.seed}...", total=None
            )
            outcome = run_point(resolved, keep_trace=emit_trace)

        result = ExperimentResult(columns=result_columns(resolved), rows=[outcome.row])
        paths = emit_outputs(
            result,
            resolved,
            resolved.output,
            trace=outcome.trace,
            model=outcome.model,
            overwrite=overwrite,
        )
        console.print(run_panel(outcome.row, paths))
        if outcome.row["status"] == "failed":
            raise typer.Exit(code=EXIT_RUNTIME_ERROR)
        logger.info("Run finished")

    except typer.Exit:
        raise

    except Exception as e:
        from .display import failure, hint

        logger.exception("Run failed: %s", e)
        failure("Run failed", e)
        if "already exists" in str(e):
            hint("Use --overwrite to replace existing outputs")
        raise typer.Exit(code=EXIT_RUNTIME_ERROR) from e

    finally:
        _log_hint(ctx)


@app.command()
def sweep(
    ctx: typer.Context,
    config: ConfigOption,
    seed: SeedOption = None,
    replicates: Annotated[
        int | None,
        typer.Option("--replicates", "-r", help="Override replicates", min=1),
    ] = None,
    out: OutOption = None,
    workers: Annotated[
        int,
        typer.Option("--workers", "-w", help="Worker processes", min=1),
    ] = 1,
    overwrite: OverwriteOption = False,
) -> None:
    """Run the Cartesian product of the sweep axes times the replicates."""
    try:
        cfg = _load(config, seed=seed, replicates=replicates, output=out)

        from .display import failure, header, success, sweep_table
        from .harness import result_columns, run_sweep, summarize
        from .outputs import ResultWriter, emit_outputs
        from .templates import TemplateRenderer

        header(f"Sweep: {cfg.row_count} rows", emoji="🧪")

        with (
            ResultWriter(
                cfg.output, cfg, result_columns(cfg), overwrite=overwrite
            ) as writer,
            Progress(
                TextColumn("[bold cyan]{task.description}"),
                BarColumn(),
                MofNCompleteColumn(),
                console=console,
                transient=True,
            ) as progress,
        ):
            task = progress.add_task("Sweeping...", total=cfg.row_count)

            def on_row(row: dict[str, object]) -> None:
                writer.write_row(row)
                progress.advance(task)

            result = run_sweep(cfg, workers=workers, on_row=on_row)

        summaries = summarize(result, cfg)
        paths = emit_outputs(
            result,
            cfg,
            cfg.output,
            overwrite=overwrite,
            write_rows=False,
            summaries=summaries,
            renderer=TemplateRenderer(),
        )
        console.print(sweep_table(summaries, [name for name, _ in cfg.axes]))
        success(f"Wrote {len(result)} rows to {cfg.output}")
        for path in paths:
            success(f"Wrote {path}")
        if result.failed_count:
            failure(f"{result.failed_count} rows failed")
            raise typer.Exit(code=EXIT_RUNTIME_ERROR)

    except typer.Exit:
        raise

    except Exception as e:
        from .display import failure, hint

        logger.exception("Sweep failed: %s", e)
        failure("Sweep failed", e)
        if "already exists" in str(e):
            hint("Use --overwrite to replace existing outputs")
        raise typer.Exit(code=EXIT_RUNTIME_ERROR) from e

    finally:
        _log_hint(ctx)


@app.command()
def validate(ctx: typer.Context, config: ConfigOption) -> None:
    """Check a configuration document and every sweep point it defines."""
    try:
        cfg = _load(config)

        from .config import resolve_point
        from .display import config_panel, failure, success
        from .gmm import validate_model
        from .harness import build_model

        problems = []
        for point, assignment in enumerate(cfg.points()):
            try:
                model = build_model(resolve_point(cfg, assignment).model)
                violations = validate_model(model).violations
                problems += [f"point {point}: {v}" for v in violations]
            except Exception as e:
                problems.append(f"point {point}: {e}")

        console.print(config_panel(cfg))
        if problems:
            failure("Invalid model", "\n   ".join(problems))
            raise typer.Exit(code=EXIT_CONFIG_ERROR)
        success(f"{config} is valid ({cfg.row_count} rows)")

    finally:
        _log_hint(ctx)


@app.command("calibrate-lut")
def calibrate_lut(
    ctx: typer.Context,
    config: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="Take the LUT settings from this config"),
    ] = None,
    points: Annotated[
        int,
        typer.Option("--points", "-p", help="Grid points of the error scan", min=2),
    ] = 100_000,
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Write the error bound to this file"),
    ] = None,
) -> None:
    """Scan the ln(1 + e^x) lookup table and report its max absolute error."""
    try:
        from .gmm import lut_max_error
        from .hardware import HardwareConfig

        hardware = _load(config).hardware if config else HardwareConfig()
        lut = hardware.lut
        error = lut_max_error(lut, points=points)
        console.print(
            f"[bold cyan]LUT[/bold cyan] {lut.entries} entries on "
            f"[{lut.lower}, {lut.upper}], {lut.interpolation}: "
            f"max |error| = [green]{error!r}[/green] over {points} points"
        )
        if out:
            out.write_text(
                f"lut_entries = {lut.entries}\n"
                f"lut_lower = {lut.lower!r}\n"
                f"lut_upper = {lut.upper!r}\n"
                f'lut_interpolation = "{lut.interpolation}"\n'
                f"scan_points = {points}\n"
                f"max_abs_error = {error!r}\n"
            )
            console.print(f"[dim green]   ✓ Wrote {out}[/dim green]")

    except typer.Exit:
        raise

    except Exception as e:
        from .display import failure

        logger.exception("LUT calibration failed: %s", e)
        failure("LUT calibration failed", e)
        raise typer.Exit(code=EXIT_RUNTIME_ERROR) from e

    finally:
        _log_hint(ctx)
