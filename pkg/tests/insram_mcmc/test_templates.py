"""Tests for the report template renderer."""

import pytest

from insram_mcmc.harness import PointSummary
from insram_mcmc.templates import (
    BaseTemplateRenderer,
    TemplateError,
    TemplateRenderer,
    format_number,
)


def _context(**updates: object) -> dict[str, object]:
    context: dict[str, object] = {
        "config_sha256": "abc123",
        "results_path": "adc.csv",
        "row_count": 2,
        "failed_count": 1,
        "replicates": 1,
        "seed_policy": "per-row",
        "base_seed": 0,
        "total_samples": 500,
        "burn_in": 50,
        "arithmetic": "hardware",
        "kl_mode": "auto",
        "grid_description": "default bins per axis",
        "perf_label": "calibrated",
        "axis_names": ["hardware.adc_bits"],
        "summaries": [
            PointSummary(
                point=0,
                parameters={"hardware.adc_bits": 3},
                replicates=1,
                failed=0,
                kl_mean=0.123456,
                kl_std=0.0,
                acceptance_mean=0.5,
                acceptance_std=0.0,
            ),
            PointSummary(
                point=1, parameters={"hardware.adc_bits": 8}, replicates=1, failed=1
            ),
        ],
    }
    context.update(updates)
    return context


class TestBaseTemplateRenderer:
    """Test BaseTemplateRenderer abstract class."""

    def test_render_not_implemented(self) -> None:
        """Test that render raises NotImplementedError."""
        with pytest.raises(NotImplementedError):
            BaseTemplateRenderer().render("summary.md.j2", {})

    def test_list_templates_not_implemented(self) -> None:
        """Test that list_templates raises NotImplementedError."""
        with pytest.raises(NotImplementedError):
            BaseTemplateRenderer().list_templates()


class TestFormatNumber:
    """Test the num filter."""

    def test_none(self) -> None:
        """Test missing values render as a dash."""
        assert format_number(None) == "-"

    def test_float(self) -> None:
        """Test four significant digits."""
        assert format_number(0.123456) == "0.1235"

    def test_other(self) -> None:
        """Test non-floats pass through str."""
        assert format_number(7) == "7"


class TestTemplateRenderer:
    """Test TemplateRenderer class."""

    def test_lists_summary_template(self) -> None:
        """Test the packaged summary template is found."""
        assert "summary.md.j2" in TemplateRenderer().list_templates()

    def test_render_summary(self) -> None:
        """Test the header bullets and one table row per point."""
        text = TemplateRenderer().render("summary.md.j2", _context())

        assert "- Config SHA-256: `abc123`" in text
        assert "- Rows: 2 (1 failed), 1 replicates per point" in text
        assert "| 0 | 3 | 0.1235 | 0 | 0.5 | 0 | 0 |" in text
        assert "| 1 | 8 | - | - | - | - | 1 |" in text

    def test_missing_variable(self) -> None:
        """Test that an undefined variable raises TemplateError."""
        context = _context()
        del context["perf_label"]

        with pytest.raises(TemplateError, match="summary.md.j2"):
            TemplateRenderer().render("summary.md.j2", context)

    def test_unknown_template(self) -> None:
        """Test that an unknown template raises TemplateError."""
        with pytest.raises(TemplateError):
            TemplateRenderer().render("missing.md.j2", {})
