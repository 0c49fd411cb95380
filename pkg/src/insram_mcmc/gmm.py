# src/insram_mcmc/gmm.py
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
WEIGHT_SUM_TOLERANCE = 1e-12

FloatArray = npt.NDArray[np.float64]


class GmmError(Exception):
    """Custom exception for invalid mixture models or inputs."""

    pass


class DimensionMismatchError(GmmError, ValueError):
    """Raised when a point does not match the model dimension."""

    pass


class LutError(GmmError):
    """Custom exception for malformed lookup tables."""

    pass


class GmmModel(BaseModel):
    """Diagonal-covariance Gaussian mixture used as the sampling target."""

    model_config = ConfigDict(frozen=True)

    weights: list[float] = Field(
        ...,
        min_length=1,
        title="Mixture Weights",
        description="Probability of each mixture component",
        examples=[[0.5, 0.5]],
    )
    """
    Mixture weights p_j. Structural checks only; use `validate_model` for the
    probability invariants.
    """

    means: list[list[float]] = Field(
        ...,
        min_length=1,
        title="Means",
        description="One mean vector per mixture",
        examples=[[[1.0, -1.0], [-1.0, 1.0]]],
    )

    stddevs: list[list[float]] = Field(
        ...,
        min_length=1,
        title="Standard Deviations",
        description="One diagonal standard deviation vector per mixture",
        examples=[[[1.0, 1.0], [1.0, 1.0]]],
    )

    @model_validator(mode="after")
    def check_shapes(self) -> "GmmModel":
        """Ensure weights, means and stddevs describe the same M x N layout."""
        num_mixtures = len(self.weights)
        if len(self.means) != num_mixtures or len(self.stddevs) != num_mixtures:
            logger.error(
                "Mixture count mismatch: weights=%d, means=%d, stddevs=%d",
                num_mixtures,
                len(self.means),
                len(self.stddevs),
            )
            raise GmmError(
                f"Expected {num_mixtures} means and stddevs, got "
                f"{len(self.means)} and {len(self.stddevs)}."
            )
        dimension = len(self.means[0])
        if dimension == 0:
            raise GmmError("Mixture dimension must be at least 1.")
        for j, (mean, std) in enumerate(zip(self.means, self.stddevs, strict=True)):
            if len(mean) != dimension or len(std) != dimension:
                raise GmmError(
                    f"Mixture {j} has mean length {len(mean)} and stddev length "
                    f"{len(std)}; expected {dimension}."
                )
        values = [*self.weights, *(v for row in self.means for v in row)]
        values.extend(v for row in self.stddevs for v in row)
        if not all(math.isfinite(v) for v in values):
            raise GmmError("Mixture parameters must be finite.")
        return self

    def model_post_init(self, __context: Any) -> None:
        """Log model construction."""
        logger.debug(
            "GmmModel initialized: mixtures=%d, dimension=%d",
            self.num_mixtures,
            self.dimension,
        )

    @property
    def num_mixtures(self) -> int:
        """Number of mixture components M."""
        return len(self.weights)

    @property
    def dimension(self) -> int:
        """Dimension N of the sampled variable."""
        return len(self.means[0])

    @cached_property
    def mu(self) -> FloatArray:
        """Means as an (M, N) array."""
        return np.asarray(self.means, dtype=np.float64)

    @cached_property
    def sigma(self) -> FloatArray:
        """Standard deviations as an (M, N) array."""
        return np.asarray(self.stddevs, dtype=np.float64)

    @cached_property
    def inv_var(self) -> FloatArray:
        """Elementwise 1 / sigma^2, shape (M, N)."""
        with np.errstate(divide="ignore"):
            return 1.0 / np.square(self.sigma)

    @cached_property
    def log_norm_const(self) -> FloatArray:
        """Per-mixture constant c_j = ln p_j - sum_i ln sigma_ij - (N/2) ln 2pi."""
        with np.errstate(divide="ignore", invalid="ignore"):
            log_weights = np.log(np.asarray(self.weights, dtype=np.float64))
            log_sigma = np.log(self.sigma).sum(axis=1)
        return log_weights - log_sigma - 0.5 * self.dimension * LOG_2PI


class ValidationResult(BaseModel):
    """Outcome of `validate_model`: ok iff no invariant is violated."""

    violations: list[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(model: GmmModel) -> ValidationResult:
    """Check every GmmModel invariant and list the violated ones."""
    violations: list[str] = []
    weights = np.asarray(model.weights, dtype=np.float64)
    total = float(weights.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        violations.append(f"weights sum ≠ 1 (sum={total!r})")
    if np.any(weights <= 0.0):
        violations.append("nonpositive weight")
    if np.any(model.sigma <= 0.0):
        violations.append("nonpositive stddev")
    elif not np.all(np.isfinite(model.log_norm_const)):
        violations.append("non-finite normalization constant")

    if violations:
        logger.warning("Model validation failed: %s", "; ".join(violations))
    else:
        logger.debug("Model validation passed")
    return ValidationResult(violations=violations)


def require_valid(model: GmmModel) -> GmmModel:
    """Return the model unchanged or raise GmmError listing its violations."""
    result = validate_model(model)
    if not result.ok:
        raise GmmError("Invalid mixture model: " + "; ".join(result.violations))
    return model


def as_point(x: Sequence[float] | FloatArray, model: GmmModel) -> FloatArray:
    """Coerce x to a finite float vector of the model dimension."""
    point = np.asarray(x, dtype=np.float64)
    if point.ndim != 1 or point.shape[0] != model.dimension:
        raise DimensionMismatchError(
            f"Point has shape {point.shape}; model dimension is {model.dimension}."
        )
    if not np.all(np.isfinite(point)):
        raise GmmError(f"Point has non-finite components: {point.tolist()}")
    return point


def exponent_direct(x: Sequence[float] | FloatArray, model: GmmModel, j: int) -> float:
    """Evaluate E_j = sum_i ((x_i - mu_ij) / sigma_ij)^2 directly."""
    if not 0 <= j < model.num_mixtures:
        raise GmmError(f"Mixture index {j} out of range [0, {model.num_mixtures}).")
    point = as_point(x, model)
    return float(np.sum(np.square((point - model.mu[j]) / model.sigma[j])))


def exponents_direct(x: Sequence[float] | FloatArray, model: GmmModel) -> FloatArray:
    """All M exponents at x, shape (M,)."""
    point = as_point(x, model)
    return np.sum(np.square((point - model.mu) / model.sigma), axis=1)


@dataclass(frozen=True)
class LutTable:
    """Precomputed ln(1 + e^x) samples on [lower, upper] with upper <= 0."""

    lower: float = -16.0
    upper: float = 0.0
    entries: int = 256
    interpolation: Literal["nearest", "linear"] = "linear"
    values: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.entries < 2:
            raise LutError(f"LUT needs at least 2 entries, got {self.entries}.")
        if not self.lower < self.upper <= 0.0:
            raise LutError(
                f"LUT domain must satisfy lower < upper <= 0, got "
                f"[{self.lower}, {self.upper}]."
            )
        if self.interpolation not in ("nearest", "linear"):
            raise LutError(f"Unknown LUT interpolation '{self.interpolation}'.")
        object.__setattr__(self, "values", np.log1p(np.exp(self.grid)))
        logger.debug(
            "LutTable built: domain=[%g, %g], entries=%d, interpolation=%s",
            self.lower,
            self.upper,
            self.entries,
            self.interpolation,
        )

    @property
    def grid(self) -> FloatArray:
        return np.linspace(self.lower, self.upper, self.entries)

    @property
    def step(self) -> float:
        """Spacing between table entries."""
        return (self.upper - self.lower) / (self.entries - 1)


def lut_ln1pexp(x: float, lut: LutTable) -> float:
    """Approximate ln(1 + e^x) for x <= 0 from the table.

    Arguments below the table domain (including -inf) return 0; finite
    arguments above it clamp to the last entry.
    """
    if math.isnan(x) or x == math.inf:
        raise GmmError(f"LUT argument must be finite or -inf, got {x!r}.")
    if x < lut.lower:
        return 0.0
    if x >= lut.upper:
        return float(lut.values[-1])
    if lut.interpolation == "nearest":
        index = int(round((x - lut.lower) / lut.step))
        return float(lut.values[index])
    return float(np.interp(x, lut.grid, lut.values))


def lut_max_error(lut: LutTable, points: int = 100_000) -> float:
    """Brute-force max |lut_ln1pexp(x) - ln(1 + e^x)| over a dense grid.

    The scan covers the table domain plus an equally long stretch below it, so
    the underflow clamp is measured too.
    """
    span = lut.upper - lut.lower
    xs = np.linspace(lut.lower - span, lut.upper, points)
    if lut.interpolation == "linear":
        approx = np.interp(xs, lut.grid, lut.values)
    else:
        index = np.clip(np.rint((xs - lut.lower) / lut.step), 0, lut.entries - 1)
        approx = lut.values[index.astype(np.int64)]
    approx = np.where(xs < lut.lower, 0.0, approx)
    error = float(np.max(np.abs(approx - np.log1p(np.exp(xs)))))
    logger.info("LUT max abs error over %d points: %.3e", points, error)
    return error


def log_sum_exp(a: float, b: float, lut: LutTable | None = None) -> float:
    """ln(e^a + e^b) = max + ln(1 + e^(min - max)).

    The correction term is exact without a table and looked up otherwise; its
    argument is always <= 0.
    """
    if a == -math.inf and b == -math.inf:
        raise GmmError("log_sum_exp of two -inf terms is undefined.")
    hi, lo = (a, b) if a >= b else (b, a)
    diff = lo - hi
    if lut is None:
        return hi + math.log1p(math.exp(diff))
    return hi + lut_ln1pexp(diff, lut)


def combine_log_terms(
    terms: Sequence[float] | FloatArray, lut: LutTable | None = None
) -> float:
    """Left-fold log_sum_exp over terms taken in descending order."""
    ordered = sorted((float(t) for t in terms), reverse=True)
    if not ordered:
        raise GmmError("Cannot combine an empty set of log terms.")
    total = ordered[0]
    for term in ordered[1:]:
        total = log_sum_exp(total, term, lut)
    return total


def combine_exponents(
    exponents: FloatArray, model: GmmModel, lut: LutTable | None = None
) -> float:
    """Mixture log-density from the cached exponent vector E."""
    return combine_log_terms(model.log_norm_const - 0.5 * exponents, lut)


def log_density_exact(x: Sequence[float] | FloatArray, model: GmmModel) -> float:
    """Exact log F(x) for the mixture, free of intermediate overflow."""
    return combine_exponents(exponents_direct(x, model), model)


def log_density_batch(points: FloatArray, model: GmmModel) -> FloatArray:
    """Exact log-density at each row of a (K, N) array."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != model.dimension:
        raise DimensionMismatchError(
            f"Points have shape {pts.shape}; model dimension is {model.dimension}."
        )
    deviations = (pts[:, None, :] - model.mu[None, :, :]) / model.sigma[None, :, :]
    terms = model.log_norm_const[None, :] - 0.5 * np.sum(deviations**2, axis=2)
    return np.asarray(logsumexp(terms, axis=1), dtype=np.float64)


def marginal(model: GmmModel, axis: int) -> GmmModel:
    """One-dimensional marginal of a diagonal-covariance mixture."""
    if not 0 <= axis < model.dimension:
        raise GmmError(f"Axis {axis} out of range for dimension {model.dimension}.")
    return GmmModel(
        weights=list(model.weights),
        means=[[row[axis]] for row in model.means],
        stddevs=[[row[axis]] for row in model.stddevs],
    )


def sample_exact(
    model: GmmModel, size: int, rng: np.random.Generator
) -> FloatArray:
    """Draw i.i.d. samples by picking a component, then a Gaussian around it."""
    weights = np.asarray(model.weights, dtype=np.float64)
    components = rng.choice(model.num_mixtures, size=size, p=weights / weights.sum())
    noise = rng.standard_normal((size, model.dimension))
    return model.mu[components] + model.sigma[components] * noise
