# src/insram_mcmc/perf.py
import logging
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .sampler import SampleTrace

logger = logging.getLogger(__name__)

# Calibration target: total power per sampling iteration and its split over the
# SRAM array, the DACs and the ADCs, at a 1 GHz clock and 4 cycles/iteration.
CALIBRATION_POWER_W = 91e-6
CALIBRATION_SPLIT = (0.05, 0.13, 0.82)
CALIBRATION_CLOCK_HZ = 1e9
CALIBRATION_CYCLES = 4
# 2 scalar products x 2 mixtures x 8 bit planes
CALIBRATION_ADC_CONVERSIONS = 32
ADC_COMPARATOR_SHARE = 0.60
CALIBRATION_LABEL = "calibrated to 91 uW at 1 GHz with a 5/13/82 SRAM/DAC/ADC split"


class PerfError(Exception):
    """Custom exception for invalid accounting inputs."""

    pass


def _calibrated_energies() -> tuple[float, float, float]:
    energy = CALIBRATION_POWER_W * CALIBRATION_CYCLES / CALIBRATION_CLOCK_HZ
    sram, dac, adc = (share * energy for share in CALIBRATION_SPLIT)
    return sram, dac, adc / CALIBRATION_ADC_CONVERSIONS


_E_SRAM, _E_DAC, _E_ADC = _calibrated_energies()


class PerfConfig(BaseModel):
    """Per-iteration energies and timing of the sampler."""

    model_config = ConfigDict(frozen=True)

    e_sram: float = Field(
        default=_E_SRAM,
        ge=0.0,
        title="SRAM Energy (J)",
        description="Array access energy per iteration",
    )
    e_dac: float = Field(
        default=_E_DAC,
        ge=0.0,
        title="DAC Energy (J)",
        description="DAC energy per iteration",
    )
    e_adc: float = Field(
        default=_E_ADC,
        ge=0.0,
        title="ADC Energy (J)",
        description="Energy per ADC conversion",
    )
    adc_conversions_per_iteration: int = Field(
        default=CALIBRATION_ADC_CONVERSIONS,
        ge=0,
        title="ADC Conversions",
        description="Column conversions per iteration",
    )
    cycles_per_iteration: int = Field(
        default=CALIBRATION_CYCLES,
        ge=1,
        title="Cycles Per Iteration",
        examples=[4],
    )
    clock_frequency: float = Field(
        default=CALIBRATION_CLOCK_HZ,
        gt=0.0,
        title="Clock Frequency (Hz)",
        examples=[1e9],
    )
    samples_count: Literal["emitted", "accepted"] = Field(
        default="emitted",
        title="Sample Count",
        description="Count emitted samples or MH acceptances as throughput",
    )

    @classmethod
    def calibrated(
        cls,
        total_power: float,
        split: tuple[float, float, float],
        *,
        cycles_per_iteration: int = CALIBRATION_CYCLES,
        clock_frequency: float = CALIBRATION_CLOCK_HZ,
        adc_conversions_per_iteration: int = CALIBRATION_ADC_CONVERSIONS,
    ) -> "PerfConfig":
        """Solve component energies from a total power and its split.

        The split is the (sram, dac, adc) share of the total.
        """
        if abs(sum(split) - 1.0) > 1e-9:
            raise PerfError(f"Power split {split} does not sum to 1.")
        energy = total_power * cycles_per_iteration / clock_frequency
        sram, dac, adc = (share * energy for share in split)
        return cls(
            e_sram=sram,
            e_dac=dac,
            e_adc=adc / max(adc_conversions_per_iteration, 1),
            adc_conversions_per_iteration=adc_conversions_per_iteration,
            cycles_per_iteration=cycles_per_iteration,
            clock_frequency=clock_frequency,
        )

    @property
    def iterations_per_second(self) -> float:
        return self.clock_frequency / self.cycles_per_iteration


class PerfReport(BaseModel):
    """Power and cycle accounting; fields not estimated stay None."""

    power_w: float | None = None
    frac_sram: float | None = None
    frac_dac: float | None = None
    frac_adc: float | None = None
    adc_comparator_w: float | None = None
    total_cycles: int | None = None
    wall_clock_s: float | None = None
    samples_per_kcycle: float | None = None
    label: str = CALIBRATION_LABEL

    def merge(self, other: "PerfReport") -> "PerfReport":
        """Combine with another report, preferring fields it has set."""
        values = self.model_dump()
        values.update(other.model_dump(exclude_none=True))
        return PerfReport(**values)

    def row(self) -> dict[str, Any]:
        """The CSV columns of the report."""
        return self.model_dump(exclude={"label", "adc_comparator_w"})


def estimate_iteration_power(cfg: PerfConfig) -> PerfReport:
    """Component power = energy x iterations per second; fractions of the total."""
    rate = cfg.iterations_per_second
    sram = cfg.e_sram * rate
    dac = cfg.e_dac * rate
    adc = cfg.e_adc * cfg.adc_conversions_per_iteration * rate
    total = sram + dac + adc
    if total <= 0.0:
        raise PerfError("Total power is zero; at least one energy must be positive.")
    logger.debug("Power: sram=%g W, dac=%g W, adc=%g W", sram, dac, adc)
    return PerfReport(
        power_w=total,
        frac_sram=sram / total,
        frac_dac=dac / total,
        frac_adc=adc / total,
        adc_comparator_w=ADC_COMPARATOR_SHARE * adc,
    )


def estimate_run_cycles(trace: SampleTrace, cfg: PerfConfig) -> PerfReport:
    """Cycles, wall-clock time and throughput of a finished chain."""
    if trace.iterations == 0:
        raise PerfError("Cycle estimate needs a nonempty trace.")
    total_cycles = trace.iterations * cfg.cycles_per_iteration
    samples = len(trace) if cfg.samples_count == "emitted" else trace.accepted_count
    return PerfReport(
        total_cycles=total_cycles,
        wall_clock_s=total_cycles / cfg.clock_frequency,
        samples_per_kcycle=1000.0 * samples / total_cycles,
    )


def estimate_perf(trace: SampleTrace, cfg: PerfConfig) -> PerfReport:
    return estimate_iteration_power(cfg).merge(estimate_run_cycles(trace, cfg))
