# src/insram_mcmc/hardware.py
"""Behavioral model of the in-SRAM mixed-signal scalar-product datapath.

The pipeline for one dot product V.W is: DAC quantization of V, fixed-point
quantization of the stored W, two's-complement bit slicing of W into binary
planes, one current-summing column per plane (CLM gain, log-normal noise),
ADC conversion per column and digital recombination with the plane weights.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .gmm import LutTable
from .rng import RandomSource

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# Column-current variability (std / mean) against DAC reference current in nA.
NOISE_CALIBRATION: dict[float, float] = {5.0: 1.43}


class HardwareError(Exception):
    """Custom exception for datapath misuse or invalid operands."""

    pass


class HardwareConfig(BaseModel):
    """Precision, non-ideality and LUT settings of the emulated datapath."""

    model_config = ConfigDict(frozen=True)

    dac_bits: int = Field(
        default=8,
        ge=2,
        le=24,
        title="DAC Bits",
        description="Signed resolution of the row DACs driving the V operand",
        examples=[4, 8],
    )
    adc_bits: int = Field(
        default=6,
        ge=2,
        le=48,
        title="ADC Bits",
        description="Signed resolution of the column ADCs",
        examples=[3, 6, 8],
    )
    weight_bits: int = Field(
        default=8,
        ge=2,
        le=24,
        title="Weight Bits",
        description="Bit planes used to store the W operand",
        examples=[8],
    )
    operand_range: float = Field(
        default=4.0,
        gt=0.0,
        title="Operand Range",
        description="Clip bound Vmax of the DAC-driven operand",
        examples=[4.0],
    )
    weight_range: float | None = Field(
        default=None,
        gt=0.0,
        title="Weight Range",
        description="Stored-operand clip bound; unset scales each vector to its max",
        examples=[None, 8.0],
    )
    rows: int | None = Field(
        default=None,
        ge=1,
        title="Rows",
        description="Physical cells per column; unset sizes the column to the operand",
        examples=[None, 32],
    )
    rows_per_element: int = Field(
        default=2,
        ge=1,
        title="Rows Per Element",
        description="Rows driven per operand element; 2 for a differential signed DAC",
        examples=[1, 2],
    )
    noise_sigma_norm: float = Field(
        default=0.0,
        ge=0.0,
        title="Column Noise",
        description="Std/mean of the multiplicative log-normal column noise",
        examples=[0.0, 0.3, 1.43],
    )
    dac_ref_current: float = Field(
        default=5.0,
        gt=0.0,
        title="DAC Reference Current (nA)",
        description="Reference current the noise level was calibrated at",
        examples=[5.0],
    )
    clm_epsilon: float = Field(
        default=0.0,
        title="CLM Gain Error",
        description="Signal-dependent gain error at full scale, 0 disables",
        examples=[0.0, 0.05],
    )
    dac_mismatch_sigma: float = Field(
        default=0.0,
        ge=0.0,
        title="DAC Mismatch",
        description="Residual per-row mirroring-ratio error after calibration",
        examples=[0.0, 0.01],
    )
    frozen_mismatch: bool = Field(
        default=False,
        title="Frozen Mismatch",
        description="Draw column noise once per run instead of per access",
    )
    rng_bias: float = Field(
        default=0.5,
        gt=0.0,
        lt=1.0,
        title="RNG Bias",
        description="Probability that a TRNG cell resolves to 1",
        examples=[0.5, 0.7],
    )
    gaussian_source: Literal["trng", "ideal"] = Field(
        default="trng",
        title="Gaussian Source",
        description="Irwin-Hall over TRNG uniforms, or an ideal normal generator",
    )
    lut_lower: float = Field(
        default=-16.0,
        lt=0.0,
        title="LUT Lower Bound",
        description="Below this argument ln(1+e^x) is taken as 0",
    )
    lut_upper: float = Field(default=0.0, le=0.0, title="LUT Upper Bound")
    lut_entries: int = Field(default=256, ge=2, title="LUT Entries")
    lut_interpolation: Literal["nearest", "linear"] = Field(
        default="linear", title="LUT Interpolation"
    )

    @model_validator(mode="after")
    def check_lut_domain(self) -> "HardwareConfig":
        """Ensure the LUT domain is not empty."""
        if self.lut_lower >= self.lut_upper:
            raise HardwareError(
                f"LUT lower bound ({self.lut_lower}) must be below the upper "
                f"bound ({self.lut_upper})."
            )
        return self

    def model_post_init(self, __context: Any) -> None:
        """Log the datapath operating point."""
        logger.debug(
            "HardwareConfig initialized: dac=%db, adc=%db, weights=%db, "
            "noise=%g, clm=%g",
            self.dac_bits,
            self.adc_bits,
            self.weight_bits,
            self.noise_sigma_norm,
            self.clm_epsilon,
        )

    @cached_property
    def lut(self) -> LutTable:
        """The ln(1+e^x) table used by the hardware mixture combine."""
        return LutTable(
            lower=self.lut_lower,
            upper=self.lut_upper,
            entries=self.lut_entries,
            interpolation=self.lut_interpolation,
        )

    def active_rows(self, length: int | None = None) -> int:
        """Physical rows of the column holding an operand of the given length."""
        needed = None if length is None else length * self.rows_per_element
        if self.rows is None:
            if needed is None:
                raise HardwareError("Column height unknown: set rows or pass a length.")
            return needed
        if needed is not None and needed > self.rows:
            raise HardwareError(
                f"Operand length {length} x {self.rows_per_element} rows per element "
                f"exceeds the {self.rows} rows per column."
            )
        return self.rows

    def full_scale(self, length: int | None = None) -> float:
        """Largest analog magnitude at the ADC input: rows x max DAC value."""
        return self.active_rows(length) * self.operand_range


def noise_sigma_for_current(current_na: float) -> float:
    """Column noise level measured at a DAC reference current.

    Only calibrated points are known; no current-to-noise law is assumed.
    """
    try:
        return NOISE_CALIBRATION[current_na]
    except KeyError:
        raise HardwareError(
            f"No column-noise calibration at {current_na} nA; known points: "
            f"{sorted(NOISE_CALIBRATION)}"
        ) from None


@dataclass(frozen=True)
class QuantizedVector:
    """Signed integer codes with a common scale: value = code x scale."""

    codes: IntArray
    scale: float
    bits: int

    def __post_init__(self) -> None:
        low, high = -(2 ** (self.bits - 1)), 2 ** (self.bits - 1) - 1
        if self.codes.size and (self.codes.min() < low or self.codes.max() > high):
            raise HardwareError(
                f"Codes outside the signed {self.bits}-bit range [{low}, {high}]."
            )

    @property
    def values(self) -> FloatArray:
        return self.codes.astype(np.float64) * self.scale


def max_code(bits: int) -> int:
    """Largest code of a symmetric signed grid."""
    return 2 ** (bits - 1) - 1


def round_half_away(values: FloatArray) -> FloatArray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def _quantize(values: Any, bits: int, limit: float) -> QuantizedVector:
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise HardwareError(f"Cannot quantize non-finite operand {array.tolist()}.")
    scale = limit / max_code(bits)
    codes = round_half_away(np.clip(array, -limit, limit) / scale)
    return QuantizedVector(codes=codes.astype(np.int64), scale=scale, bits=bits)


def quantize_dac(v: Any, cfg: HardwareConfig) -> QuantizedVector:
    """Clip to [-Vmax, Vmax] and round onto the signed DAC grid."""
    return _quantize(v, cfg.dac_bits, cfg.operand_range)


def quantize_weights(w: Any, cfg: HardwareConfig) -> QuantizedVector:
    """Fixed-point encoding of a stored operand at weight_bits.

    Without a fixed weight_range the vector is scaled to its own max-abs
    value, so stored deviations are never clipped.
    """
    if cfg.weight_range is not None:
        return _quantize(w, cfg.weight_bits, cfg.weight_range)
    array = np.asarray(w, dtype=np.float64)
    peak = float(np.max(np.abs(array))) if array.size else 0.0
    if not math.isfinite(peak):
        raise HardwareError(f"Cannot quantize non-finite operand {array.tolist()}.")
    return _quantize(array, cfg.weight_bits, peak if peak > 0.0 else 1.0)


def plane_weights(bits: int) -> IntArray:
    """Recombination weights, LSB first: +2^k, and -2^(n-1) for the MSB plane."""
    weights = 2 ** np.arange(bits, dtype=np.int64)
    weights[-1] = -weights[-1]
    return weights


def bit_slice(w: QuantizedVector) -> npt.NDArray[np.uint8]:
    """Two's-complement binary planes of w, shape (bits, len), LSB first."""
    shifts = np.arange(w.bits, dtype=np.int64)[:, None]
    return ((w.codes[None, :] >> shifts) & 1).astype(np.uint8)


def recombine_planes(planes: npt.NDArray[np.uint8], bits: int) -> IntArray:
    """Inverse of bit_slice."""
    return plane_weights(bits) @ planes.astype(np.int64)


def _like_input(ideal: Any, result: FloatArray) -> Any:
    return float(result) if np.ndim(ideal) == 0 else result


def apply_clm_gain(
    ideal: Any, cfg: HardwareConfig, *, length: int | None = None
) -> Any:
    """Signal-dependent gain ideal x (1 + eps x ideal / full_scale)."""
    if cfg.clm_epsilon == 0.0:
        return ideal
    current = np.asarray(ideal, dtype=np.float64)
    relative = current / cfg.full_scale(length)
    gained = current * (1.0 + cfg.clm_epsilon * relative)
    return _like_input(ideal, gained)


def lognormal_parameters(sigma_norm: float) -> tuple[float, float]:
    """(mu, sigma) of the underlying normal for a unit-mean log-normal."""
    variance = math.log1p(sigma_norm**2)
    return -0.5 * variance, math.sqrt(variance)


def sample_column_noise(ideal: Any, cfg: HardwareConfig, rng: RandomSource) -> Any:
    """Multiply by a unit-mean log-normal factor with std noise_sigma_norm."""
    if cfg.noise_sigma_norm == 0.0:
        return ideal
    current = np.asarray(ideal, dtype=np.float64)
    mu, sigma = lognormal_parameters(cfg.noise_sigma_norm)
    factors = rng.lognormal(mu, sigma, current.size).reshape(current.shape)
    return _like_input(ideal, current * factors)


def column_accumulate(
    plane: Any,
    dac_values: Any,
    rng: RandomSource,
    cfg: HardwareConfig,
    *,
    noise_gain: FloatArray | None = None,
) -> Any:
    """Sum the DAC currents of the cells storing a 1, then apply CLM and noise.

    A 2-D `plane` evaluates one column per row of planes. `noise_gain`
    replaces the per-access noise draw with fixed multipliers.
    """
    planes = np.asarray(plane)
    values = np.asarray(dac_values, dtype=np.float64)
    if values.ndim != 1 or planes.shape[-1] != values.shape[0]:
        raise HardwareError(
            f"Plane shape {planes.shape} does not match {values.shape[0]} DAC values."
        )
    length = values.shape[0]
    cfg.active_rows(length)
    ideal = planes.astype(np.float64) @ values
    current = apply_clm_gain(ideal, cfg, length=length)
    if noise_gain is not None:
        current = current * noise_gain
    else:
        current = sample_column_noise(current, cfg, rng)
    return _like_input(ideal, np.asarray(current, dtype=np.float64))


def adc_lsb(cfg: HardwareConfig, length: int | None = None) -> float:
    return cfg.full_scale(length) / max_code(cfg.adc_bits)


def adc_convert(analog: Any, cfg: HardwareConfig, *, length: int | None = None) -> Any:
    """Round [-full_scale, full_scale] onto signed ADC codes, saturating outside."""
    signal = np.asarray(analog, dtype=np.float64)
    if not np.all(np.isfinite(signal)):
        raise HardwareError(f"ADC input is not finite: {signal.tolist()}")
    limit = max_code(cfg.adc_bits)
    codes = np.clip(round_half_away(signal / adc_lsb(cfg, length)), -limit, limit)
    codes = codes.astype(np.int64)
    return int(codes) if codes.ndim == 0 else codes


def dot_lsb_equivalent(cfg: HardwareConfig, length: int, weight_scale: float) -> float:
    """One ADC step in dot-product units, seen through the MSB plane.

    `weight_scale` is the scale of the stored operand, see `quantize_weights`.
    """
    return adc_lsb(cfg, length) * weight_scale * 2 ** (cfg.weight_bits - 1)


def dot_product_hw(
    v: Any,
    w: Any,
    cfg: HardwareConfig,
    rng: RandomSource,
    *,
    row_gains: FloatArray | None = None,
    column_gains: FloatArray | None = None,
) -> float:
    """V.W through DAC, bit-sliced columns, ADC and digital recombination.

    Args:
        v: operand driven through the row DACs
        w: operand stored in the array
        cfg: datapath configuration
        rng: source of the analog noise draws
        row_gains: static per-row DAC mirroring ratios
        column_gains: static per-plane noise multipliers (frozen mismatch)

    Returns:
        The recombined scalar product in operand units.
    """
    v_arr = np.asarray(v, dtype=np.float64)
    w_arr = np.asarray(w, dtype=np.float64)
    if v_arr.ndim != 1 or v_arr.shape != w_arr.shape:
        raise HardwareError(
            f"Dot product operands differ in shape: {v_arr.shape} vs {w_arr.shape}."
        )
    length = v_arr.shape[0]

    dac = quantize_dac(v_arr, cfg)
    dac_values = dac.values if row_gains is None else dac.values * row_gains
    stored = quantize_weights(w_arr, cfg)
    planes = bit_slice(stored)

    analog = column_accumulate(planes, dac_values, rng, cfg, noise_gain=column_gains)
    codes = adc_convert(analog, cfg, length=length)
    partial = plane_weights(cfg.weight_bits) @ codes
    return float(partial) * adc_lsb(cfg, length) * stored.scale


class BaseDotProductEngine:
    """Base class for the arithmetic behind the incremental exponent update."""

    name: str = "base"

    def dot(self, v: FloatArray, w: FloatArray, column: int = 0) -> float:
        raise NotImplementedError


class ExactDotProductEngine(BaseDotProductEngine):
    """Double-precision reference arithmetic."""

    name = "exact"

    def dot(self, v: FloatArray, w: FloatArray, column: int = 0) -> float:
        return float(np.dot(v, w))


class HardwareDotProductEngine(BaseDotProductEngine):
    """Routes scalar products through the emulated datapath.

    Static non-idealities (DAC mismatch, frozen column noise) are drawn once at
    construction, so they stay fixed for the lifetime of a chain. `column`
    selects which stored vector, and therefore which physical columns, a
    product uses.
    """

    name = "hardware"

    def __init__(
        self,
        cfg: HardwareConfig,
        rng: RandomSource,
        length: int,
        columns: int = 1,
    ) -> None:
        self.cfg = cfg
        self.rng = rng
        self.length = length
        cfg.active_rows(length)

        self.row_gains: FloatArray | None = None
        if cfg.dac_mismatch_sigma > 0.0:
            self.row_gains = 1.0 + cfg.dac_mismatch_sigma * rng.normal(length)
            logger.debug("Drew DAC row gains: %s", self.row_gains.tolist())

        self.column_gains: FloatArray | None = None
        if cfg.frozen_mismatch:
            mu, sigma = lognormal_parameters(cfg.noise_sigma_norm)
            self.column_gains = rng.lognormal(
                mu, sigma, columns * cfg.weight_bits
            ).reshape(columns, cfg.weight_bits)
            logger.debug("Drew frozen column gains for %d stored vectors", columns)

        logger.info(
            "HardwareDotProductEngine ready: length=%d, full_scale=%g, lsb=%g",
            length,
            cfg.full_scale(length),
            adc_lsb(cfg, length),
        )

    def dot(self, v: FloatArray, w: FloatArray, column: int = 0) -> float:
        gains = None if self.column_gains is None else self.column_gains[column]
        return dot_product_hw(
            v,
            w,
            self.cfg,
            self.rng,
            row_gains=self.row_gains,
            column_gains=gains,
        )


def trng_uniform(
    source: RandomSource, cfg: HardwareConfig, size: int = 1
) -> FloatArray:
    """Assemble dac_bits TRNG bits into (integer + 0.5) / 2^k."""
    k = cfg.dac_bits
    bits = source.bits((size, k), cfg.rng_bias).astype(np.int64)
    integers = bits @ (2 ** np.arange(k, dtype=np.int64))
    return (integers + 0.5) / 2**k


def trng_gaussian(
    source: RandomSource, cfg: HardwareConfig, size: int = 1
) -> FloatArray:
    """Irwin-Hall approximation: the sum of 12 TRNG uniforms minus 6."""
    uniforms = trng_uniform(source, cfg, size * 12).reshape(size, 12)
    return uniforms.sum(axis=1) - 6.0


class TrngRandomSource:
    """Random source that draws proposals and thresholds from the TRNG model.

    Analog noise still comes from the underlying physical source.
    """

    def __init__(self, bit_source: RandomSource, cfg: HardwareConfig) -> None:
        self.bit_source = bit_source
        self.cfg = cfg

    def uniform(self, size: int) -> FloatArray:
        return trng_uniform(self.bit_source, self.cfg, size)

    def normal(self, size: int) -> FloatArray:
        if self.cfg.gaussian_source == "ideal":
            return self.bit_source.normal(size)
        return trng_gaussian(self.bit_source, self.cfg, size)

    def lognormal(self, mean: float, sigma: float, size: int) -> FloatArray:
        return self.bit_source.lognormal(mean, sigma, size)

    def bits(self, shape: tuple[int, ...], p: float) -> npt.NDArray[np.uint8]:
        return self.bit_source.bits(shape, p)
