import logging
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from .config import ExperimentConfig
from .harness import PointSummary
from .templates import format_number

logger = logging.getLogger(__name__)

console = Console()


def header(text: str, emoji: str = "✨") -> None:
    """Display a stylish section header."""
    logger.debug("Displaying header: %s", text)
    console.print()
    console.print(f"[bold cyan]{emoji}  {text}[/bold cyan]")
    console.print(f"[dim blue]   {'─' * (len(text) + 2)}[/dim blue]")


def success(text: str) -> None:
    """Display a success message."""
    logger.info(text)
    console.print(f"[dim green]   ✓ {text}[/dim green]")


def hint(text: str) -> None:
    """Display a helpful hint."""
    logger.debug("Hint: %s", text)
    console.print(f"[dim yellow]   💡 {text}[/dim yellow]")


def failure(text: str, detail: object | None = None) -> None:
    """Display an error with an optional detail line."""
    console.print()
    console.print(f"[bold red]   ✖  {text}[/bold red]")
    if detail is not None:
        console.print(f"[dim red]   {detail}[/dim red]")
    console.print()


def _section(text: Text, title: str, values: dict[str, Any]) -> None:
    text.append(f"{title}\n", style="bold cyan")
    for key, value in values.items():
        text.append(f"   {key}: ", style="bold yellow")
        text.append(f"{format_number(value)}\n", style="bold white")
    text.append("\n")


def config_panel(cfg: ExperimentConfig) -> Panel:
    """Summary of the resolved experiment settings."""
    text = Text()
    model = cfg.model
    if model.kind == "inline":
        _section(
            text,
            "🎯 Model",
            {"kind": "inline", "mixtures": len(model.weights or [])},
        )
    else:
        _section(
            text,
            "🎯 Model",
            {"d": model.distance, "N": model.dimension, "M": model.mixtures},
        )
    _section(
        text,
        "🔗 Chain",
        {
            "T": cfg.chain.total_samples,
            "burn-in": cfg.chain.burn_in,
            "arithmetic": cfg.chain.arithmetic,
            "proposal": f"{cfg.proposal.kind} (s = {cfg.proposal.step_scale})",
        },
    )
    _section(
        text,
        "🔌 Hardware",
        {
            "DAC bits": cfg.hardware.dac_bits,
            "ADC bits": cfg.hardware.adc_bits,
            "weight bits": cfg.hardware.weight_bits,
            "noise sigma": cfg.hardware.noise_sigma_norm,
        },
    )
    axes = {name: ", ".join(map(str, values)) for name, values in cfg.axes}
    _section(
        text,
        "🧪 Sweep",
        {
            **(axes or {"axes": "none"}),
            "rows": f"{cfg.point_count} points x {cfg.replicates} replicates",
            "seeds": f"{cfg.seed_policy} from {cfg.base_seed}",
        },
    )
    text.append(f"Output: {cfg.output}", style="dim blue")
    return Panel(
        text, title="Experiment Configuration", border_style="cyan", padding=(1, 2)
    )


def run_panel(row: dict[str, Any], paths: list[Path]) -> Panel:
    """Metrics of a single run and the files written for it."""
    text = Text()
    _section(
        text,
        "📈 Sampling",
        {
            "KL": row["kl"],
            "KL (marginal)": row["kl_marginal"],
            "acceptance": row["acceptance_rate"],
            "mean": row["moment_mean"],
            "variance": row["moment_var"],
        },
    )
    _section(
        text,
        "⚡ Performance",
        {
            "power (W)": row["power_w"],
            "cycles": row["total_cycles"],
            "samples / 1000 cycles": row["samples_per_kcycle"],
        },
    )
    text.append("📍 Files\n", style="bold cyan")
    for path in paths:
        text.append(f"   {path}\n", style="bold white")
    ok = row["status"] == "ok"
    if not ok:
        text.append(f"\n{row['error']}", style="bold red")
    return Panel(
        text,
        title="Run Complete" if ok else "Run Failed",
        border_style="green" if ok else "red",
        padding=(1, 2),
    )


def sweep_table(summaries: list[PointSummary], axis_names: list[str]) -> Table:
    """Replicate mean and std per sweep point."""
    table = Table(title="Sweep Summary", header_style="bold cyan")
    table.add_column("point", justify="right")
    for name in axis_names:
        table.add_column(name, justify="right")
    for column in ("KL mean", "KL std", "acceptance", "failed"):
        table.add_column(column, justify="right")
    for summary in summaries:
        table.add_row(
            str(summary.point),
            *(str(summary.parameters[name]) for name in axis_names),
            format_number(summary.kl_mean),
            format_number(summary.kl_std),
            format_number(summary.acceptance_mean),
            str(summary.failed),
        )
    return table
