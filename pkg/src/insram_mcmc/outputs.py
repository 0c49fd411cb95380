# src/insram_mcmc/outputs.py
import csv
import logging
from collections.abc import Iterable, Sequence
from datetime import UTC, datetime
from importlib.metadata import version
from pathlib import Path
from types import TracebackType
from typing import Any, TextIO

import numpy as np

from .config import ExperimentConfig, config_hash
from .gmm import GmmModel
from .harness import ExperimentResult, PointSummary
from .metrics import (
    JOINT_MAX_DIMENSION,
    GridSpec,
    distribution_rows,
    ground_truth_distribution,
)
from .perf import CALIBRATION_LABEL
from .sampler import SampleTrace
from .templates import BaseTemplateRenderer

logger = logging.getLogger(__name__)

RESULTS_TITLE = "# insram-mcmc results"
SUMMARY_TEMPLATE = "summary.md.j2"


class OutputError(Exception):
    """Custom exception for result files that cannot be written."""

    pass


def format_value(value: Any) -> str:
    """CSV cell text; floats use repr so reruns are byte-identical."""
    if value is None:
        return ""
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def metadata_lines(cfg: ExperimentConfig, created: datetime | None = None) -> list[str]:
    """The '#'-prefixed header of a results file."""
    created = created or datetime.now(UTC)
    versions = ", ".join(
        f"{package}={version(package)}" for package in ("insram-mcmc", "numpy", "scipy")
    )
    return [
        RESULTS_TITLE,
        f"# config_sha256: {config_hash(cfg)}",
        f"# versions: {versions}",
        f"# created: {created.isoformat(timespec='seconds')}",
    ]


def sibling_path(path: Path, suffix: str) -> Path:
    """results.csv -> results.<suffix>"""
    return path.with_name(f"{path.stem}.{suffix}")


def _check_target(path: Path, overwrite: bool) -> None:
    if path.exists() and not overwrite:
        logger.error("Output file already exists: %s", path)
        raise OutputError(
            f"File '{path}' already exists. Use --overwrite to replace it."
        )
    if path.exists():
        logger.warning("Overwriting existing file: %s", path)


def _write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([format_value(v) for v in row] for row in rows)
    except OSError as err:
        raise OutputError(f"Cannot write '{path}': {err}") from err
    logger.info("Wrote %s", path)
    return path


class ResultWriter:
    """Streams result rows to CSV in index order, flushing after each row.

    Rows already written survive a later failure because every row is
    flushed before the next one is accepted.
    """

    def __init__(
        self,
        path: Path,
        cfg: ExperimentConfig,
        columns: Sequence[str],
        overwrite: bool = False,
    ) -> None:
        self.path = path
        self.cfg = cfg
        self.columns = list(columns)
        self.overwrite = overwrite
        self.rows_written = 0
        self._handle: TextIO | None = None
        self._writer: Any = None

    def open(self) -> "ResultWriter":
        _check_target(self.path, self.overwrite)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = self.path.open("w", newline="")
        except OSError as err:
            logger.error("Cannot open results file %s: %s", self.path, err)
            raise OutputError(f"Cannot write '{self.path}': {err}") from err

        for line in metadata_lines(self.cfg):
            self._handle.write(line + "\n")
        self._writer = csv.writer(self._handle, lineterminator="\n")
        self._writer.writerow(self.columns)
        self._handle.flush()
        logger.debug(
            "Opened results file %s with %d columns", self.path, len(self.columns)
        )
        return self

    def write_row(self, row: dict[str, Any]) -> None:
        if self._writer is None or self._handle is None:
            raise OutputError("ResultWriter is not open.")
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise OutputError(f"Row {row.get('index')} lacks columns {missing}.")
        self._writer.writerow([format_value(row[c]) for c in self.columns])
        self._handle.flush()
        self.rows_written += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            logger.info("Wrote %d rows to %s", self.rows_written, self.path)
        self._handle = None
        self._writer = None

    def __enter__(self) -> "ResultWriter":
        return self.open()

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.close()


def write_results(
    result: ExperimentResult, cfg: ExperimentConfig, path: Path, overwrite: bool = False
) -> Path:
    with ResultWriter(path, cfg, result.columns, overwrite=overwrite) as writer:
        for row in result.rows:
            writer.write_row(row)
    return path


def write_trace_csv(trace: SampleTrace, path: Path) -> Path:
    """One row per iteration: t, accepted state, log-density, u and flags."""
    dimension = trace.chain.shape[1]
    header = [
        "t",
        *(f"x{i}" for i in range(dimension)),
        "log_density",
        "u",
        "accepted",
        "refreshed",
    ]
    rows = (
        [
            record.t,
            *trace.chain[i],
            trace.log_density[i],
            record.u,
            record.accepted,
            record.refreshed,
        ]
        for i, record in enumerate(trace.records)
    )
    return _write_csv(path, header, rows)


def write_trajectory_csv(trace: SampleTrace, path: Path, steps: int) -> Path:
    """The first `steps` post-burn-in iterations: candidate, resulting state, flag."""
    dimension = trace.chain.shape[1]
    header = [
        "t",
        *(f"cand{i}" for i in range(dimension)),
        *(f"x{i}" for i in range(dimension)),
        "accepted",
    ]
    segment = range(trace.burn_in, min(trace.burn_in + steps, trace.iterations))
    rows = (
        [
            trace.records[i].t,
            *trace.records[i].candidate,
            *trace.chain[i],
            trace.records[i].accepted,
        ]
        for i in segment
    )
    return _write_csv(path, header, rows)


def write_ground_truth_csv(model: GmmModel, grid: GridSpec, path: Path) -> Path:
    header = [*(f"c{i}" for i in range(grid.dimension)), "probability"]
    rows = distribution_rows(ground_truth_distribution(model, grid))
    return _write_csv(path, header, rows)


def write_summary(
    summaries: list[PointSummary],
    result: ExperimentResult,
    cfg: ExperimentConfig,
    path: Path,
    renderer: BaseTemplateRenderer,
    results_path: Path | None = None,
) -> Path:
    """Render the per-point replicate summary as Markdown."""
    grid = cfg.grid
    context: dict[str, object] = {
        "config_sha256": config_hash(cfg),
        "results_path": str(results_path or cfg.output),
        "row_count": len(result),
        "failed_count": result.failed_count,
        "replicates": cfg.replicates,
        "seed_policy": cfg.seed_policy,
        "base_seed": cfg.base_seed,
        "total_samples": cfg.chain.total_samples,
        "burn_in": cfg.chain.burn_in,
        "arithmetic": cfg.chain.arithmetic,
        "kl_mode": grid.kl_mode,
        "grid_description": (
            f"{grid.bins or 'default'} bins per axis, margin {grid.margin} sigma, "
            f"pseudo-count {grid.smoothing}"
        ),
        "perf_label": CALIBRATION_LABEL,
        "axis_names": [name for name, _ in cfg.axes],
        "summaries": summaries,
    }
    content = renderer.render(SUMMARY_TEMPLATE, context)
    try:
        path.write_text(content)
    except OSError as err:
        raise OutputError(f"Cannot write '{path}': {err}") from err
    logger.info("Wrote summary %s", path)
    return path


def emit_outputs(
    result: ExperimentResult,
    cfg: ExperimentConfig,
    path: Path,
    *,
    trace: SampleTrace | None = None,
    model: GmmModel | None = None,
    overwrite: bool = False,
    write_rows: bool = True,
    summaries: list[PointSummary] | None = None,
    renderer: BaseTemplateRenderer | None = None,
) -> list[Path]:
    """Write the results CSV and whichever companion files apply.

    A trace adds `<stem>.trace.csv` and `<stem>.trajectory.csv`; a model of
    dimension <= 3 adds `<stem>.ground_truth.csv`; summaries with a renderer
    add `<stem>.summary.md`.
    """
    targets = []
    if write_rows:
        targets.append(path)
    if trace is not None:
        targets += [
            sibling_path(path, "trace.csv"),
            sibling_path(path, "trajectory.csv"),
        ]
    if model is not None and model.dimension <= JOINT_MAX_DIMENSION:
        targets.append(sibling_path(path, "ground_truth.csv"))
    if summaries is not None and renderer is not None:
        targets.append(sibling_path(path, "summary.md"))
    for target in targets:
        _check_target(target, overwrite)

    written = []
    if write_rows:
        written.append(write_results(result, cfg, path, overwrite=overwrite))
    if trace is not None:
        written.append(write_trace_csv(trace, sibling_path(path, "trace.csv")))
        written.append(
            write_trajectory_csv(
                trace, sibling_path(path, "trajectory.csv"), cfg.trajectory_steps
            )
        )
    if model is not None and model.dimension <= JOINT_MAX_DIMENSION:
        grid = GridSpec.default_for(
            model,
            bins=cfg.grid.bins,
            smoothing=cfg.grid.smoothing,
            margin=cfg.grid.margin,
        )
        written.append(
            write_ground_truth_csv(model, grid, sibling_path(path, "ground_truth.csv"))
        )
    if summaries is not None and renderer is not None:
        written.append(
            write_summary(
                summaries, result, cfg, sibling_path(path, "summary.md"), renderer, path
            )
        )
    return written
