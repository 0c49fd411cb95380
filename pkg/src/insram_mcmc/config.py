# src/insram_mcmc/config.py
import hashlib
import itertools
import json
import logging
import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .gmm import GmmError
from .hardware import HardwareConfig, HardwareError
from .metrics import MetricsError
from .perf import PerfConfig, PerfError
from .sampler import ChainConfig, ProposalConfig

logger = logging.getLogger(__name__)

SECTIONS = ("model", "chain", "proposal", "hardware", "perf", "grid")
UNSWEEPABLE = {"chain.seed"}


class ConfigError(Exception):
    """Custom exception for unreadable or inconsistent experiment configs."""

    pass


class ModelSpec(BaseModel):
    """Target mixture: generated from (d, N, M) or given inline."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["generated", "inline"] = Field(
        default="generated",
        title="Model Kind",
        description=(
            "Generate the symmetric two-mixture family or read parameters inline"
        ),
    )
    distance: float = Field(
        default=1.0,
        gt=0.0,
        title="Mean Distance",
        description="d in mu = [d, -d; -d, d]",
        examples=[1.0, 5.0],
    )
    dimension: int = Field(default=2, ge=1, title="Dimension", examples=[1, 2, 8])
    mixtures: int = Field(default=2, ge=1, title="Mixtures", examples=[2])
    model_seed: int = Field(
        default=0,
        ge=0,
        title="Model Seed",
        description="Seed for random means when mixtures != 2",
    )
    weights: list[float] | None = Field(default=None, title="Inline Weights")
    means: list[list[float]] | None = Field(default=None, title="Inline Means")
    stddevs: list[list[float]] | None = Field(default=None, title="Inline Stddevs")

    @model_validator(mode="after")
    def check_inline(self) -> "ModelSpec":
        """Inline models need weights, means and stddevs together."""
        inline = (self.weights, self.means, self.stddevs)
        if self.kind == "inline" and any(v is None for v in inline):
            raise ConfigError("Inline models need weights, means and stddevs.")
        return self


class GridSettings(BaseModel):
    """How the KL histogram grid is derived from the model."""

    model_config = ConfigDict(frozen=True)

    bins: int | None = Field(
        default=None,
        ge=2,
        title="Bins",
        description="Bins per dimension; unset picks 30 (12 for N = 3)",
    )
    smoothing: float = Field(default=0.5, ge=0.0, title="Smoothing")
    margin: float = Field(
        default=4.0,
        gt=0.0,
        title="Margin",
        description="Grid extends this many max-sigmas beyond the extreme means",
    )
    kl_mode: Literal["auto", "joint", "marginal-1d"] = Field(
        default="auto",
        title="KL Mode",
        description="auto uses joint KL for N <= 3 and marginal-1d above",
    )


class ExperimentConfig(BaseModel):
    """Single source of truth for one experiment or sweep."""

    model_config = ConfigDict(frozen=True)

    model: ModelSpec = Field(default_factory=ModelSpec)
    chain: ChainConfig = Field(default_factory=ChainConfig)
    proposal: ProposalConfig = Field(default_factory=ProposalConfig)
    hardware: HardwareConfig = Field(default_factory=HardwareConfig)
    perf: PerfConfig = Field(default_factory=PerfConfig)
    grid: GridSettings = Field(default_factory=GridSettings)
    sweep: dict[str, list[Any]] = Field(
        default_factory=dict,
        title="Sweep Axes",
        description="Parameter name -> values; the sweep is their Cartesian product",
        examples=[{"hardware.adc_bits": [3, 4, 5, 6, 7, 8]}],
    )
    replicates: int = Field(default=20, ge=1, title="Replicates")
    base_seed: int = Field(default=0, ge=0, title="Base Seed")
    seed_policy: Literal["per-row", "common"] = Field(
        default="per-row",
        title="Seed Policy",
        description="per-row: base_seed + row index; common: base_seed + replicate",
    )
    output: Path = Field(default=Path("results.csv"), title="Output Path")
    trajectory_steps: int = Field(
        default=75,
        ge=1,
        title="Trajectory Steps",
        description="Post-burn-in iterations written to the trajectory file",
    )

    @model_validator(mode="after")
    def check_sweep_axes(self) -> "ExperimentConfig":
        """Every axis must name an existing, sweepable parameter with values."""
        for name, values in self.sweep.items():
            qualified = resolve_axis_name(name)
            if not values:
                raise ConfigError(f"Sweep axis '{name}' has no values.")
            if qualified in UNSWEEPABLE:
                raise ConfigError(
                    f"'{qualified}' is derived from base_seed and cannot be swept."
                )
        return self

    def model_post_init(self, __context: Any) -> None:
        """Log a summary of the experiment."""
        logger.info(
            "ExperimentConfig initialized: axes=%s, replicates=%d, base_seed=%d",
            list(self.sweep),
            self.replicates,
            self.base_seed,
        )

    @property
    def axes(self) -> list[tuple[str, list[Any]]]:
        """Sweep axes with qualified names, in declaration order."""
        return [(resolve_axis_name(name), vals) for name, vals in self.sweep.items()]

    @property
    def point_count(self) -> int:
        count = 1
        for _, values in self.axes:
            count *= len(values)
        return count

    @property
    def row_count(self) -> int:
        return self.point_count * self.replicates

    def points(self) -> list[dict[str, Any]]:
        """One assignment per sweep point (a single empty one without axes)."""
        names = [name for name, _ in self.axes]
        grids = [values for _, values in self.axes]
        return [
            dict(zip(names, combo, strict=True))
            for combo in itertools.product(*grids)
        ]

    def seed_for(self, index: int, replicate: int) -> int:
        offset = index if self.seed_policy == "per-row" else replicate
        return self.base_seed + offset


def _section_fields(section: str) -> dict[str, Any]:
    annotation = ExperimentConfig.model_fields[section].annotation
    return annotation.model_fields  # type: ignore[union-attr]


def resolve_axis_name(name: str) -> str:
    """Map 'section.field' or a unique bare field name to 'section.field'."""
    if "." in name:
        section, field = name.split(".", 1)
        if section not in SECTIONS or field not in _section_fields(section):
            raise ConfigError(f"Unknown sweep parameter '{name}'.")
        return name
    matches = [s for s in SECTIONS if name in _section_fields(s)]
    if not matches:
        raise ConfigError(f"Unknown sweep parameter '{name}'.")
    if len(matches) > 1:
        raise ConfigError(
            f"Sweep parameter '{name}' is ambiguous; qualify it as one of "
            + ", ".join(f"{s}.{name}" for s in matches)
        )
    return f"{matches[0]}.{name}"


def resolve_point(
    cfg: ExperimentConfig, assignment: dict[str, Any], seed: int | None = None
) -> ExperimentConfig:
    """The config with sweep values (and optionally the chain seed) applied."""
    updates: dict[str, dict[str, Any]] = {}
    for qualified, value in assignment.items():
        section, field = resolve_axis_name(qualified).split(".", 1)
        updates.setdefault(section, {})[field] = value
    if seed is not None:
        updates.setdefault("chain", {})["seed"] = seed

    try:
        sections = {
            section: type(getattr(cfg, section)).model_validate(
                {**getattr(cfg, section).model_dump(), **values}
            )
            for section, values in updates.items()
        }
    except (ValidationError, GmmError, HardwareError, MetricsError, PerfError) as err:
        raise ConfigError(f"Invalid sweep point {assignment}: {err}") from err
    return cfg.model_copy(update=sections)


def flatten_config(cfg: ExperimentConfig) -> dict[str, Any]:
    """Every knob of the module sections as 'section.field' -> value."""
    flat: dict[str, Any] = {}
    for section in SECTIONS:
        for field, value in getattr(cfg, section).model_dump(mode="json").items():
            if isinstance(value, list):
                value = json.dumps(value, separators=(",", ":"))
            flat[f"{section}.{field}"] = value
    return flat


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of the config."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_config(
    path: Path,
    *,
    seed: int | None = None,
    replicates: int | None = None,
    output: Path | None = None,
) -> ExperimentConfig:
    """Read a TOML experiment document and apply command-line overrides."""
    logger.info("Loading experiment config from %s", path)
    try:
        with path.open("rb") as handle:
            document = tomllib.load(handle)
    except FileNotFoundError as err:
        raise ConfigError(f"Config file '{path}' does not exist.") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"Config file '{path}' is not valid TOML: {err}") from err

    overrides = {"base_seed": seed, "replicates": replicates, "output": output}
    document.update({k: v for k, v in overrides.items() if v is not None})
    logger.debug("Config overrides: %s", overrides)
    try:
        return ExperimentConfig.model_validate(document)
    except (ValidationError, GmmError, HardwareError, MetricsError, PerfError) as err:
        logger.error("Invalid config %s: %s", path, err)
        raise ConfigError(f"Invalid config '{path}': {err}") from err
