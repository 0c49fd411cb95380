# src/insram_mcmc/harness.py
import logging
from collections.abc import Callable
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Any, NamedTuple

import numpy as np
from pydantic import BaseModel, Field

from .config import ExperimentConfig, ModelSpec, flatten_config, resolve_point
from .gmm import GmmError, GmmModel, require_valid
from .metrics import JOINT_MAX_DIMENSION, GridSpec, marginal_kl, sample_moments
from .perf import estimate_perf
from .sampler import SampleTrace, run_chain

logger = logging.getLogger(__name__)

ROW_COLUMNS = ("index", "point", "replicate", "seed", "status", "error")
METRIC_COLUMNS = (
    "kl_joint",
    "kl_marginal",
    "kl",
    "acceptance_rate",
    "moment_mean",
    "moment_var",
    "moment_mean_abs_max",
    "refreshes",
)
PERF_COLUMNS = (
    "power_w",
    "frac_sram",
    "frac_dac",
    "frac_adc",
    "total_cycles",
    "wall_clock_s",
    "samples_per_kcycle",
)


def generate_model(
    distance: float, dimension: int, mixtures: int = 2, seed: int = 0
) -> GmmModel:
    """Unit-variance mixture with means at +-d(1, -1, 1, ...).

    Two mixtures give the symmetric family mu_2 = -mu_1. Any other count draws
    evenly weighted means uniformly from [-d, d]^N with the given seed.
    """
    if distance <= 0.0:
        raise GmmError(f"Mean distance must be positive, got {distance}.")
    if dimension < 1 or mixtures < 1:
        raise GmmError(f"Need N >= 1 and M >= 1, got N={dimension}, M={mixtures}.")

    if mixtures == 2:
        first = distance * np.where(np.arange(dimension) % 2 == 0, 1.0, -1.0)
        means = np.stack([first, -first])
    else:
        rng = np.random.default_rng(seed)
        means = rng.uniform(-distance, distance, size=(mixtures, dimension))
    return GmmModel(
        weights=[1.0 / mixtures] * mixtures,
        means=means.tolist(),
        stddevs=np.ones((mixtures, dimension)).tolist(),
    )


def build_model(spec: ModelSpec) -> GmmModel:
    if spec.kind == "inline":
        return GmmModel(weights=spec.weights, means=spec.means, stddevs=spec.stddevs)
    return generate_model(spec.distance, spec.dimension, spec.mixtures, spec.model_seed)


def result_columns(cfg: ExperimentConfig) -> list[str]:
    """Fixed column order of the results table."""
    return [*ROW_COLUMNS, *flatten_config(cfg), *METRIC_COLUMNS, *PERF_COLUMNS]


class PointResult(NamedTuple):
    row: dict[str, Any]
    trace: SampleTrace | None
    model: GmmModel | None


class ExperimentResult(BaseModel):
    """Rows of a run or sweep, one per (point, replicate)."""

    columns: list[str] = Field(..., title="Columns")
    rows: list[dict[str, Any]] = Field(default_factory=list, title="Rows")

    @property
    def failed_count(self) -> int:
        return sum(row["status"] == "failed" for row in self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def _chain_metrics(
    cfg: ExperimentConfig, model: GmmModel, trace: SampleTrace
) -> dict[str, Any]:
    grid = GridSpec.default_for(
        model,
        bins=cfg.grid.bins,
        smoothing=cfg.grid.smoothing,
        margin=cfg.grid.margin,
    )
    samples = trace.samples
    kl_marginal = marginal_kl(samples, model, grid, "marginal-1d")
    kl_joint = None
    if model.dimension <= JOINT_MAX_DIMENSION:
        kl_joint = marginal_kl(samples, model, grid, "joint")

    mode = cfg.grid.kl_mode
    if mode == "auto":
        mode = "joint" if kl_joint is not None else "marginal-1d"
    if mode == "joint" and kl_joint is None:
        kl_joint = marginal_kl(samples, model, grid, "joint")

    means, variances = sample_moments(samples)
    return {
        "kl_joint": kl_joint,
        "kl_marginal": kl_marginal,
        "kl": kl_joint if mode == "joint" else kl_marginal,
        "acceptance_rate": trace.acceptance_rate,
        "moment_mean": float(means.mean()),
        "moment_var": float(variances.mean()),
        "moment_mean_abs_max": float(np.abs(means).max()),
        "refreshes": trace.refresh_count,
    }


def run_point(
    cfg: ExperimentConfig,
    *,
    index: int = 0,
    point: int = 0,
    replicate: int = 0,
    keep_trace: bool = False,
) -> PointResult:
    """Build the model, run one chain and measure it.

    Any exception becomes a row with status "failed" and the message in
    `error`; the metric columns are then left empty.
    """
    row: dict[str, Any] = {
        "index": index,
        "point": point,
        "replicate": replicate,
        "seed": cfg.chain.seed,
        "status": "ok",
        "error": None,
        **flatten_config(cfg),
        **dict.fromkeys(METRIC_COLUMNS),
        **dict.fromkeys(PERF_COLUMNS),
    }
    try:
        model = require_valid(build_model(cfg.model))
        trace = run_chain(model, cfg.chain, cfg.proposal, cfg.hardware)
        row.update(_chain_metrics(cfg, model, trace))
        row.update(estimate_perf(trace, cfg.perf).row())
    except Exception as err:
        logger.exception(
            "Row %d (point %d, seed %d) failed", index, point, cfg.chain.seed
        )
        row["status"] = "failed"
        row["error"] = f"{type(err).__name__}: {err}"
        return PointResult(row=row, trace=None, model=None)

    logger.debug(
        "Row %d: kl=%s, acceptance=%s", index, row["kl"], row["acceptance_rate"]
    )
    return PointResult(
        row=row,
        trace=trace if keep_trace else None,
        model=model if keep_trace else None,
    )


@dataclass(frozen=True)
class SweepTask:
    index: int
    point: int
    replicate: int
    config: ExperimentConfig


def _run_task(task: SweepTask) -> dict[str, Any]:
    return run_point(
        task.config, index=task.index, point=task.point, replicate=task.replicate
    ).row


def sweep_tasks(cfg: ExperimentConfig) -> list[SweepTask]:
    """One task per (point, replicate) in row-index order."""
    tasks = []
    for point, assignment in enumerate(cfg.points()):
        for replicate in range(cfg.replicates):
            index = point * cfg.replicates + replicate
            seed = cfg.seed_for(index, replicate)
            resolved = resolve_point(cfg, assignment, seed=seed)
            tasks.append(SweepTask(index, point, replicate, resolved))
    return tasks


def run_sweep(
    cfg: ExperimentConfig,
    *,
    workers: int = 1,
    on_row: Callable[[dict[str, Any]], None] | None = None,
) -> ExperimentResult:
    """Cartesian product of the sweep axes times the replicates.

    `on_row` sees every row in index order as soon as it is available, so a
    writer can stream them.
    """
    tasks = sweep_tasks(cfg)
    logger.info(
        "Starting sweep: %d points x %d replicates = %d rows, workers=%d",
        cfg.point_count,
        cfg.replicates,
        len(tasks),
        workers,
    )
    result = ExperimentResult(columns=result_columns(cfg))

    def _collect(rows: Any) -> None:
        for row in rows:
            if row["status"] == "failed":
                logger.warning("Row %d failed: %s", row["index"], row["error"])
            result.rows.append(row)
            if on_row is not None:
                on_row(row)

    if workers > 1:
        with Pool(processes=workers) as pool:
            _collect(pool.imap(_run_task, tasks))
    else:
        _collect(map(_run_task, tasks))

    logger.info("Sweep finished: %d rows, %d failed", len(result), result.failed_count)
    return result


class PointSummary(BaseModel):
    """Replicate mean and standard deviation at one sweep point."""

    point: int
    parameters: dict[str, Any]
    replicates: int
    failed: int
    kl_mean: float | None = None
    kl_std: float | None = None
    acceptance_mean: float | None = None
    acceptance_std: float | None = None


def summarize(result: ExperimentResult, cfg: ExperimentConfig) -> list[PointSummary]:
    """Aggregate replicate rows per sweep point."""
    names = [name for name, _ in cfg.axes]
    summaries = []
    for point, assignment in enumerate(cfg.points()):
        rows = [row for row in result.rows if row["point"] == point]
        ok = [row for row in rows if row["status"] == "ok"]
        summary = PointSummary(
            point=point,
            parameters={name: assignment[name] for name in names},
            replicates=len(rows),
            failed=len(rows) - len(ok),
        )
        if ok:
            kl = np.array([row["kl"] for row in ok], dtype=np.float64)
            acceptance = np.array(
                [row["acceptance_rate"] for row in ok], dtype=np.float64
            )
            summary = summary.model_copy(
                update={
                    "kl_mean": float(kl.mean()),
                    "kl_std": float(kl.std()),
                    "acceptance_mean": float(acceptance.mean()),
                    "acceptance_std": float(acceptance.std()),
                }
            )
        summaries.append(summary)
    return summaries
