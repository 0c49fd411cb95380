# src/insram_mcmc/metrics.py
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import rel_entr

from .gmm import GmmModel, log_density_batch, marginal
from .sampler import SampleTrace

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
SUM_TOLERANCE = 1e-9
JOINT_MAX_DIMENSION = 3


class MetricsError(Exception):
    """Custom exception for invalid metric inputs."""

    pass


class GridSpec(BaseModel):
    """Axis-aligned histogram grid with a smoothing pseudo-count."""

    model_config = ConfigDict(frozen=True)

    lower: list[float] = Field(..., min_length=1, title="Lower Bounds")
    upper: list[float] = Field(..., min_length=1, title="Upper Bounds")
    bins: list[int] = Field(..., min_length=1, title="Bins Per Dimension")
    smoothing: float = Field(
        default=0.5,
        ge=0.0,
        title="Smoothing",
        description="Pseudo-count added to every bin",
    )

    @model_validator(mode="after")
    def check_bounds(self) -> "GridSpec":
        """Ensure one bound pair and bin count per dimension."""
        if not len(self.lower) == len(self.upper) == len(self.bins):
            raise MetricsError(
                f"Grid has {len(self.lower)} lower bounds, {len(self.upper)} upper "
                f"bounds and {len(self.bins)} bin counts."
            )
        for axis, (lo, hi, count) in enumerate(
            zip(self.lower, self.upper, self.bins, strict=True)
        ):
            if not lo < hi:
                raise MetricsError(f"Grid axis {axis}: lower {lo} is not below {hi}.")
            if count < 1:
                raise MetricsError(f"Grid axis {axis}: needs at least one bin.")
        if math.prod(self.bins) < 4:
            raise MetricsError(
                f"Grid has {math.prod(self.bins)} bins; at least 4 needed."
            )
        return self

    @property
    def dimension(self) -> int:
        return len(self.bins)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.bins)

    def edges(self, axis: int) -> FloatArray:
        return np.linspace(self.lower[axis], self.upper[axis], self.bins[axis] + 1)

    def centers(self, axis: int) -> FloatArray:
        edges = self.edges(axis)
        return 0.5 * (edges[:-1] + edges[1:])

    def cell_volume(self) -> float:
        return math.prod(
            (hi - lo) / n
            for lo, hi, n in zip(self.lower, self.upper, self.bins, strict=True)
        )

    def axis(self, axis: int) -> "GridSpec":
        """The one-dimensional grid along a single axis."""
        return GridSpec(
            lower=[self.lower[axis]],
            upper=[self.upper[axis]],
            bins=[self.bins[axis]],
            smoothing=self.smoothing,
        )

    @classmethod
    def default_for(
        cls,
        model: GmmModel,
        bins: int | None = None,
        smoothing: float = 0.5,
        margin: float = 4.0,
    ) -> "GridSpec":
        """Bounds [min mu - margin*max sigma, max mu + margin*max sigma] per axis.

        Without an explicit bin count a 3-D grid gets 12 bins per axis and every
        other dimension 30.
        """
        if bins is None:
            bins = 12 if model.dimension == JOINT_MAX_DIMENSION else 30
        spread = margin * float(model.sigma.max())
        return cls(
            lower=(model.mu.min(axis=0) - spread).tolist(),
            upper=(model.mu.max(axis=0) + spread).tolist(),
            bins=[bins] * model.dimension,
            smoothing=smoothing,
        )


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probabilities over the cells of a grid, summing to 1."""

    probabilities: FloatArray
    grid: GridSpec | None = None

    def __post_init__(self) -> None:
        probs = self.probabilities
        if np.any(probs < 0.0):
            raise MetricsError("Probabilities must be nonnegative.")
        total = float(probs.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise MetricsError(f"Probabilities sum to {total!r}, not 1.")
        if self.grid is not None and probs.shape != self.grid.shape:
            raise MetricsError(
                f"Probabilities shape {probs.shape} "
                f"does not match grid {self.grid.shape}."
            )


def _bin_indices(samples: FloatArray, grid: GridSpec) -> tuple[FloatArray, ...]:
    indices = []
    for axis in range(grid.dimension):
        width = (grid.upper[axis] - grid.lower[axis]) / grid.bins[axis]
        index = np.floor((samples[:, axis] - grid.lower[axis]) / width)
        indices.append(np.clip(index, 0, grid.bins[axis] - 1).astype(np.int64))
    return tuple(indices)


def histogram_distribution(samples: Any, grid: GridSpec) -> DiscreteDistribution:
    """Empirical distribution: clamp to edge bins, add the pseudo-count, normalize."""
    points = np.asarray(samples, dtype=np.float64)
    if points.ndim == 1 and grid.dimension == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] == 0:
        raise MetricsError("Histogram needs at least one sample.")
    if points.shape[1] != grid.dimension:
        raise MetricsError(
            f"Samples have dimension {points.shape[1]}; grid has {grid.dimension}."
        )
    flat = np.ravel_multi_index(_bin_indices(points, grid), grid.shape)
    counts = np.bincount(flat, minlength=math.prod(grid.shape)).astype(np.float64)
    counts = counts.reshape(grid.shape) + grid.smoothing
    return DiscreteDistribution(probabilities=counts / counts.sum(), grid=grid)


def ground_truth_distribution(model: GmmModel, grid: GridSpec) -> DiscreteDistribution:
    """Density at each cell center times the cell volume, renormalized."""
    if grid.dimension != model.dimension:
        raise MetricsError(
            f"Grid dimension {grid.dimension} does not match model dimension "
            f"{model.dimension}."
        )
    mesh = np.meshgrid(*(grid.centers(a) for a in range(grid.dimension)), indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    log_mass = log_density_batch(centers, model) + math.log(grid.cell_volume())
    # Shift before exponentiating; the renormalization removes the shift.
    mass = np.exp(log_mass - log_mass.max()).reshape(grid.shape)
    return DiscreteDistribution(probabilities=mass / mass.sum(), grid=grid)


def kl_divergence(F: DiscreteDistribution, G: DiscreteDistribution) -> float:
    """D(F || G) = sum F ln(F / G), with 0 ln(0 / .) = 0."""
    if F.probabilities.shape != G.probabilities.shape or (
        F.grid is not None and G.grid is not None and F.grid != G.grid
    ):
        raise MetricsError("KL divergence needs distributions over the same grid.")
    p, q = F.probabilities, G.probabilities
    if np.any((q == 0.0) & (p > 0.0)):
        raise MetricsError("G has zero probability where F is positive.")
    return max(0.0, float(np.sum(rel_entr(p, q))))


def marginal_kl(
    samples: Any,
    model: GmmModel,
    grid: GridSpec,
    mode: Literal["joint", "marginal-1d"] = "joint",
) -> float:
    """KL of ground truth against the sample histogram.

    `joint` uses the full grid and needs N <= 3; `marginal-1d` averages the
    per-coordinate KL against the one-dimensional marginal mixtures.
    """
    points = np.asarray(samples, dtype=np.float64)
    if mode == "joint":
        if model.dimension > JOINT_MAX_DIMENSION:
            raise MetricsError(
                f"Joint KL is limited to N <= {JOINT_MAX_DIMENSION}; model has "
                f"N = {model.dimension}. Use marginal-1d."
            )
        return kl_divergence(
            ground_truth_distribution(model, grid), histogram_distribution(points, grid)
        )
    if mode != "marginal-1d":
        raise MetricsError(f"Unknown KL mode '{mode}'.")

    values = []
    for axis in range(model.dimension):
        axis_grid = grid.axis(axis)
        truth = ground_truth_distribution(marginal(model, axis), axis_grid)
        empirical = histogram_distribution(points[:, axis : axis + 1], axis_grid)
        values.append(kl_divergence(truth, empirical))
    logger.debug("Per-axis marginal KL: %s", values)
    return float(np.mean(values))


def mc_expectation(
    trace: SampleTrace | Sequence[Any] | FloatArray,
    g: Callable[[FloatArray], float],
) -> float:
    """(1/T) sum_t g(x_t) over the post-burn-in snapshots."""
    samples = trace.samples if isinstance(trace, SampleTrace) else np.asarray(trace)
    if len(samples) == 0:
        raise MetricsError("Monte Carlo expectation needs a nonempty trace.")
    return float(np.mean([g(x) for x in samples]))


def sample_moments(samples: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Per-coordinate mean and (biased) variance."""
    points = np.asarray(samples, dtype=np.float64)
    return points.mean(axis=0), points.var(axis=0)


def distribution_rows(dist: DiscreteDistribution) -> list[list[float]]:
    """Bin centers followed by probability, one row per cell."""
    if dist.grid is None:
        raise MetricsError("Exporting a distribution needs its grid.")
    grid = dist.grid
    mesh = np.meshgrid(*(grid.centers(a) for a in range(grid.dimension)), indexing="ij")
    columns = [m.ravel() for m in mesh] + [dist.probabilities.ravel()]
    return np.stack(columns, axis=1).tolist()
