# src/insram_mcmc/sampler.py
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from .gmm import (
    DimensionMismatchError,
    GmmModel,
    LutTable,
    combine_exponents,
    require_valid,
)
from .hardware import (
    BaseDotProductEngine,
    ExactDotProductEngine,
    HardwareConfig,
    HardwareDotProductEngine,
    TrngRandomSource,
)
from .rng import IdealRandomSource, RandomSource

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class SamplerError(Exception):
    """Custom exception for faults inside the Markov chain."""

    pass


class ProposalConfig(BaseModel):
    """Zero-centered, symmetric random-walk proposal."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian", "uniform"] = Field(
        default="gaussian",
        title="Proposal Kind",
        description="Distribution of each coordinate of the step R",
        examples=["gaussian", "uniform"],
    )
    step_scale: float = Field(
        default=0.5,
        gt=0.0,
        title="Step Scale",
        description="Std-dev per coordinate (gaussian) or half-width (uniform)",
        examples=[0.5, 1.0],
    )


class ChainConfig(BaseModel):
    """Length, seeding and arithmetic of one chain."""

    model_config = ConfigDict(frozen=True)

    total_samples: int = Field(
        default=500,
        ge=1,
        title="Samples",
        description="Post-burn-in samples T kept in the trace",
        examples=[500, 50_000],
    )
    burn_in: int = Field(
        default=50,
        ge=0,
        title="Burn-in",
        description="Initial iterations B discarded before statistics",
        examples=[50],
    )
    seed: int = Field(
        default=0,
        ge=0,
        le=2**64 - 1,
        title="Seed",
        description="Seed of the chain's random stream",
    )
    refresh_period: int = Field(
        default=0,
        ge=0,
        title="Refresh Period",
        description="Recompute exponents exactly every K steps, 0 never",
        examples=[0, 100],
    )
    arithmetic: Literal["exact", "hardware"] = Field(
        default="exact",
        title="Arithmetic",
        description="Exact double precision or the emulated datapath",
    )


@dataclass(frozen=True)
class ChainState:
    """Current sample with the cached exponents and deviations it implies."""

    t: int
    x: FloatArray
    exponents: FloatArray
    deviations: FloatArray
    log_density: float


@dataclass(frozen=True, slots=True)
class IterationRecord:
    t: int
    candidate: FloatArray
    log_density: float
    u: float
    accepted: bool
    refreshed: bool = False


@dataclass
class SampleTrace:
    """Accepted-state snapshot per iteration plus the full iteration log.

    Rejections repeat the previous state, so averages over `samples` weight
    repeated states correctly.
    """

    chain: FloatArray
    log_density: FloatArray
    records: list[IterationRecord]
    burn_in: int
    seed: int

    @property
    def samples(self) -> FloatArray:
        """The post-burn-in snapshots, shape (T, N)."""
        return self.chain[self.burn_in :]

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def accepted_count(self) -> int:
        return sum(record.accepted for record in self.records)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_count / self.iterations if self.records else 0.0

    @property
    def refresh_count(self) -> int:
        return sum(record.refreshed for record in self.records)

    def __len__(self) -> int:
        return self.samples.shape[0]


def initial_state(
    model: GmmModel,
    x0: Sequence[float] | FloatArray | None = None,
    lut: LutTable | None = None,
) -> ChainState:
    """State at x0 (the origin by default) with exactly computed exponents."""
    x = np.zeros(model.dimension) if x0 is None else np.asarray(x0, dtype=np.float64)
    if x.shape != (model.dimension,):
        raise DimensionMismatchError(
            f"Initial point has shape {x.shape}; model dimension is {model.dimension}."
        )
    deviations = x[None, :] - model.mu
    exponents = np.sum(np.square(deviations / model.sigma), axis=1)
    return ChainState(
        t=0,
        x=x,
        exponents=exponents,
        deviations=deviations,
        log_density=combine_exponents(exponents, model, lut),
    )


def propose(
    state: ChainState, cfg: ProposalConfig, rng: RandomSource
) -> tuple[FloatArray, FloatArray]:
    """Candidate x + R with R drawn i.i.d. per coordinate."""
    size = state.x.shape[0]
    if cfg.kind == "gaussian":
        step = cfg.step_scale * rng.normal(size)
    else:
        step = cfg.step_scale * (2.0 * rng.uniform(size) - 1.0)
    return state.x + step, step


def incremental_exponents(
    state: ChainState,
    R: FloatArray,
    model: GmmModel,
    dp: BaseDotProductEngine,
) -> FloatArray:
    """Update exponents by a step R without recomputing quadratic forms.

    E_j(t) = E_j(t-1) + (R/sigma_j^2).R + 2 (R/sigma_j^2).(x - mu_j), clamped at 0.
    """
    step = np.asarray(R, dtype=np.float64)
    if step.shape != state.x.shape:
        raise DimensionMismatchError(
            f"Step has shape {step.shape}; state has shape {state.x.shape}."
        )
    updated = np.empty(model.num_mixtures)
    for j in range(model.num_mixtures):
        scaled = step * model.inv_var[j]
        updated[j] = (
            state.exponents[j]
            + dp.dot(scaled, step, column=2 * j)
            + 2.0 * dp.dot(scaled, state.deviations[j], column=2 * j + 1)
        )
    if np.any(updated < 0.0):
        logger.debug("Clamping negative exponents at t=%d: %s", state.t, updated)
        np.maximum(updated, 0.0, out=updated)
    return updated


def mh_accept(log_density_cand: float, log_density_prev: float, u: float) -> bool:
    """Accept iff ln F(cand) - ln F(prev) > ln u."""
    if not 0.0 < u < 1.0:
        raise SamplerError(f"Acceptance threshold must lie in (0, 1), got {u!r}.")
    difference = log_density_cand - log_density_prev
    if math.isnan(difference):
        raise SamplerError(
            f"NaN log-density ratio (candidate={log_density_cand!r}, "
            f"previous={log_density_prev!r})."
        )
    return difference > math.log(u)


def step(
    state: ChainState,
    model: GmmModel,
    proposal: ProposalConfig,
    rng: RandomSource,
    dp: BaseDotProductEngine,
    lut: LutTable | None = None,
) -> tuple[ChainState, IterationRecord]:
    """One propose / update / combine / accept iteration."""
    candidate, R = propose(state, proposal, rng)
    exponents = incremental_exponents(state, R, model, dp)
    log_density = combine_exponents(exponents, model, lut)
    u = float(rng.uniform(1)[0])
    accepted = mh_accept(log_density, state.log_density, u)

    t = state.t + 1
    if accepted:
        new_state = ChainState(
            t=t,
            x=candidate,
            exponents=exponents,
            deviations=state.deviations + R[None, :],
            log_density=log_density,
        )
    else:
        new_state = replace(state, t=t)
    record = IterationRecord(
        t=t, candidate=candidate, log_density=log_density, u=u, accepted=accepted
    )
    return new_state, record


def refresh_exact(
    state: ChainState, model: GmmModel, lut: LutTable | None = None
) -> ChainState:
    """Recompute deviations and exponents exactly at state.x.

    Pass the chain's LUT so the log-density is combined the way steps combine it.
    """
    deviations = state.x[None, :] - model.mu
    exponents = np.sum(np.square(deviations / model.sigma), axis=1)
    return replace(
        state,
        exponents=exponents,
        deviations=deviations,
        log_density=combine_exponents(exponents, model, lut),
    )


def build_arithmetic(
    model: GmmModel, chain_cfg: ChainConfig, hw_cfg: HardwareConfig
) -> tuple[RandomSource, BaseDotProductEngine, LutTable | None]:
    """Random source, dot-product engine and LUT for the configured arithmetic."""
    physical = IdealRandomSource(chain_cfg.seed)
    if chain_cfg.arithmetic == "exact":
        return physical, ExactDotProductEngine(), None
    engine = HardwareDotProductEngine(
        hw_cfg, physical, model.dimension, columns=2 * model.num_mixtures
    )
    return TrngRandomSource(physical, hw_cfg), engine, hw_cfg.lut


def run_chain(
    model: GmmModel,
    chain_cfg: ChainConfig,
    proposal: ProposalConfig,
    hw_cfg: HardwareConfig | None = None,
) -> SampleTrace:
    """Run B + T iterations from the origin and return the trace.

    The trace is a pure function of the arguments: equal seeds give
    bit-identical traces.
    """
    require_valid(model)
    hw_cfg = hw_cfg or HardwareConfig()
    rng, dp, lut = build_arithmetic(model, chain_cfg, hw_cfg)
    total = chain_cfg.burn_in + chain_cfg.total_samples
    period = chain_cfg.refresh_period
    logger.info(
        "Starting chain: seed=%d, iterations=%d, arithmetic=%s, proposal=%s(%g)",
        chain_cfg.seed,
        total,
        chain_cfg.arithmetic,
        proposal.kind,
        proposal.step_scale,
    )

    state = initial_state(model, lut=lut)
    chain = np.empty((total, model.dimension))
    log_density = np.empty(total)
    records: list[IterationRecord] = []
    for i in range(total):
        state, record = step(state, model, proposal, rng, dp, lut)
        if period and state.t % period == 0:
            state = refresh_exact(state, model, lut)
            record = replace(record, refreshed=True)
        chain[i] = state.x
        log_density[i] = state.log_density
        records.append(record)

    trace = SampleTrace(
        chain=chain,
        log_density=log_density,
        records=records,
        burn_in=chain_cfg.burn_in,
        seed=chain_cfg.seed,
    )
    logger.info(
        "Chain finished: seed=%d, acceptance=%.3f, refreshes=%d",
        chain_cfg.seed,
        trace.acceptance_rate,
        trace.refresh_count,
    )
    return trace


def run_chains(
    model: GmmModel,
    chain_cfg: ChainConfig,
    proposal: ProposalConfig,
    hw_cfg: HardwareConfig | None = None,
    *,
    seeds: Sequence[int],
    workers: int = 1,
) -> list[SampleTrace]:
    """Independent chains, one per seed, returned in seed order."""
    if len(set(seeds)) != len(seeds):
        raise SamplerError(f"Chain seeds must be distinct, got {list(seeds)}.")

    def _run(seed: int) -> SampleTrace:
        seeded = chain_cfg.model_copy(update={"seed": seed})
        return run_chain(model, seeded, proposal, hw_cfg)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(_run, seeds))


