"""Tests for the power and cycle accounting."""

import numpy as np
import pytest

from insram_mcmc.perf import (
    CALIBRATION_LABEL,
    PerfConfig,
    PerfError,
    PerfReport,
    estimate_iteration_power,
    estimate_perf,
    estimate_run_cycles,
)
from insram_mcmc.sampler import IterationRecord, SampleTrace


def _trace(iterations: int, burn_in: int = 0, accepted_every: int = 1) -> SampleTrace:
    records = [
        IterationRecord(
            t=i + 1,
            candidate=np.zeros(2),
            log_density=0.0,
            u=0.5,
            accepted=i % accepted_every == 0,
        )
        for i in range(iterations)
    ]
    return SampleTrace(
        chain=np.zeros((iterations, 2)),
        log_density=np.zeros(iterations),
        records=records,
        burn_in=burn_in,
        seed=0,
    )


class TestIterationPower:
    """Test the per-iteration power model."""

    def test_calibrated_total(self) -> None:
        """Test the default energies reproduce 91 uW."""
        report = estimate_iteration_power(PerfConfig())

        assert report.power_w == pytest.approx(91e-6, rel=0.01)

    def test_calibrated_split(self) -> None:
        """Test the 5 / 13 / 82 percent SRAM / DAC / ADC split."""
        report = estimate_iteration_power(PerfConfig())

        assert report.frac_sram == pytest.approx(0.05, abs=0.005)
        assert report.frac_dac == pytest.approx(0.13, abs=0.005)
        assert report.frac_adc == pytest.approx(0.82, abs=0.005)

    def test_fractions_sum_to_one(self) -> None:
        """Test the component fractions are a partition."""
        report = estimate_iteration_power(PerfConfig(e_sram=1e-15, e_dac=3e-15))

        total = report.frac_sram + report.frac_dac + report.frac_adc
        assert total == pytest.approx(1.0)

    def test_equal_energies(self) -> None:
        """Test equal component energies with one conversion give a third each."""
        cfg = PerfConfig(
            e_sram=1e-14, e_dac=1e-14, e_adc=1e-14, adc_conversions_per_iteration=1
        )

        report = estimate_iteration_power(cfg)

        assert report.frac_sram == pytest.approx(1 / 3)
        assert report.frac_dac == pytest.approx(1 / 3)
        assert report.frac_adc == pytest.approx(1 / 3)

    def test_comparator_share(self) -> None:
        """Test the comparators take 60 percent of the ADC power."""
        report = estimate_iteration_power(PerfConfig())

        adc_w = report.power_w * report.frac_adc
        assert report.adc_comparator_w == pytest.approx(0.6 * adc_w)

    def test_zero_power(self) -> None:
        """Test that all-zero energies are rejected."""
        with pytest.raises(PerfError, match="zero"):
            estimate_iteration_power(PerfConfig(e_sram=0.0, e_dac=0.0, e_adc=0.0))


class TestCalibrated:
    """Test solving energies from a target power."""

    def test_round_trip(self) -> None:
        """Test the solved energies give back the requested power."""
        cfg = PerfConfig.calibrated(200e-6, (0.2, 0.3, 0.5))

        report = estimate_iteration_power(cfg)

        assert report.power_w == pytest.approx(200e-6)
        assert report.frac_adc == pytest.approx(0.5)

    def test_bad_split(self) -> None:
        """Test that a split not summing to 1 is rejected."""
        with pytest.raises(PerfError, match="does not sum to 1"):
            PerfConfig.calibrated(91e-6, (0.5, 0.5, 0.5))


class TestRunCycles:
    """Test cycle and throughput accounting."""

    def test_cycles_and_wall_clock(self) -> None:
        """Test 550 iterations at 4 cycles and 1 GHz."""
        report = estimate_run_cycles(_trace(550, burn_in=50), PerfConfig())

        assert report.total_cycles == 2200
        assert report.wall_clock_s == pytest.approx(2.2e-6)

    def test_emitted_throughput(self) -> None:
        """Test 500 samples over 2000 cycles give 250 per kilocycle."""
        report = estimate_run_cycles(_trace(500), PerfConfig())

        assert report.samples_per_kcycle == pytest.approx(250.0)

    def test_accepted_throughput(self) -> None:
        """Test counting only MH acceptances halves the rate at 50 percent."""
        cfg = PerfConfig(samples_count="accepted")

        report = estimate_run_cycles(_trace(500, accepted_every=2), cfg)

        assert report.samples_per_kcycle == pytest.approx(125.0)

    def test_empty_trace(self) -> None:
        """Test that a trace without iterations is rejected."""
        with pytest.raises(PerfError):
            estimate_run_cycles(_trace(0), PerfConfig())


class TestPerfReport:
    """Test merging and CSV rows."""

    def test_estimate_perf_has_all_fields(self) -> None:
        """Test the merged report carries power and cycles."""
        report = estimate_perf(_trace(100), PerfConfig())

        assert report.power_w is not None
        assert report.total_cycles == 400
        assert report.label == CALIBRATION_LABEL

    def test_merge_prefers_set_fields(self) -> None:
        """Test unset fields of the other report do not overwrite."""
        base = PerfReport(power_w=1.0, total_cycles=5)
        merged = base.merge(PerfReport(total_cycles=7))

        assert merged.power_w == 1.0
        assert merged.total_cycles == 7

    def test_row_columns(self) -> None:
        """Test the row omits the label and comparator power."""
        row = PerfReport().row()

        assert "label" not in row
        assert "adc_comparator_w" not in row
        assert set(row) == {
            "power_w",
            "frac_sram",
            "frac_dac",
            "frac_adc",
            "total_cycles",
            "wall_clock_s",
            "samples_per_kcycle",
        }
