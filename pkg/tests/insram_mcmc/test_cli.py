"""Tests for the command-line interface."""

import csv
import re
from pathlib import Path
from typing import Any

import pytest
import typer
from typer.testing import CliRunner

from insram_mcmc import cli

runner = CliRunner()

SMALL = """
replicates = 1
base_seed = 3

[chain]
total_samples = 100
burn_in = 10
"""

ADC_SWEEP = """
replicates = 2
output = "adc.csv"

[chain]
total_samples = 60
burn_in = 5
arithmetic = "hardware"

[sweep]
"hardware.adc_bits" = [3, 8]
"""

BAD_WEIGHTS = """
[model]
kind = "inline"
weights = [0.6, 0.6]
means = [[0.0], [1.0]]
stddevs = [[1.0], [1.0]]
"""


def strip_ansi(text: str) -> str:
    """Strip ANSI escape codes from text."""
    return re.sub(r"\x1b\[[0-9;]*m", "", text)


@pytest.fixture
def workspace(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Run commands inside an empty directory."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _config(workspace: Path, text: str, name: str = "experiment.toml") -> str:
    (workspace / name).write_text(text)
    return name


def _data_rows(path: Path) -> list[dict[str, str]]:
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


class TestVersionCallback:
    """Test version callback functionality."""

    def test_version_option(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that --version prints the version and exits 0."""

        def mock_version(*_: Any) -> str:
            return "1.2.3"

        monkeypatch.setattr(cli, "version", mock_version)

        result = runner.invoke(cli.app, ["--version"])

        assert result.exit_code == 0
        assert "1.2.3" in strip_ansi(result.output)

    def test_version_callback_does_nothing_when_false(self) -> None:
        """Test that the callback returns without --version."""
        assert cli.version_callback(False) is None

    def test_cli_stop_execution_is_typer_exit(self) -> None:
        """Test that CLIStopExecution inherits from typer.Exit."""
        assert issubclass(cli.CLIStopExecution, typer.Exit)


class TestRunCommand:
    """Test the run command."""

    def test_run(self, workspace: Path) -> None:
        """Test one replicate writes the results file."""
        result = runner.invoke(cli.app, ["run", "-c", _config(workspace, SMALL)])

        assert result.exit_code == 0, result.output
        assert "Run Complete" in strip_ansi(result.output)
        rows = _data_rows(workspace / "results.csv")
        assert len(rows) == 1
        assert rows[0]["status"] == "ok"
        assert rows[0]["seed"] == "3"

    def test_seed_override(self, workspace: Path) -> None:
        """Test --seed replaces the base seed."""
        result = runner.invoke(
            cli.app, ["run", "-c", _config(workspace, SMALL), "--seed", "11"]
        )

        assert result.exit_code == 0, result.output
        assert _data_rows(workspace / "results.csv")[0]["seed"] == "11"

    def test_emit_trace(self, workspace: Path) -> None:
        """Test --emit-trace writes the companion files."""
        result = runner.invoke(
            cli.app,
            ["run", "-c", _config(workspace, SMALL), "--emit-trace", "-o", "one.csv"],
        )

        assert result.exit_code == 0, result.output
        for suffix in ("csv", "trace.csv", "trajectory.csv", "ground_truth.csv"):
            assert (workspace / f"one.{suffix}").exists()

    def test_refuses_overwrite(self, workspace: Path) -> None:
        """Test a second run without --overwrite exits 2 and keeps the file."""
        name = _config(workspace, SMALL)
        runner.invoke(cli.app, ["run", "-c", name])
        before = (workspace / "results.csv").read_text()

        result = runner.invoke(cli.app, ["run", "-c", name])

        assert result.exit_code == cli.EXIT_RUNTIME_ERROR
        assert "already exists" in strip_ansi(result.output)
        assert (workspace / "results.csv").read_text() == before

    def test_overwrite(self, workspace: Path) -> None:
        """Test --overwrite replaces earlier results."""
        name = _config(workspace, SMALL)
        runner.invoke(cli.app, ["run", "-c", name])

        result = runner.invoke(cli.app, ["run", "-c", name, "--overwrite"])

        assert result.exit_code == 0, result.output

    def test_missing_config(self, workspace: Path) -> None:
        """Test a missing config exits 1."""
        result = runner.invoke(cli.app, ["run", "-c", "absent.toml"])

        assert result.exit_code == cli.EXIT_CONFIG_ERROR
        assert "Invalid configuration" in strip_ansi(result.output)

    def test_failed_row_exits_2(self, workspace: Path) -> None:
        """Test an invalid model still writes a failed row and exits 2."""
        result = runner.invoke(cli.app, ["run", "-c", _config(workspace, BAD_WEIGHTS)])

        assert result.exit_code == cli.EXIT_RUNTIME_ERROR
        assert "Run Failed" in strip_ansi(result.output)
        assert _data_rows(workspace / "results.csv")[0]["status"] == "failed"

    def test_debug_log_hint(self, workspace: Path) -> None:
        """Test --debug points at the execution log."""
        path = _config(workspace, SMALL)
        result = runner.invoke(cli.app, ["--debug", "run", "-c", path])

        assert result.exit_code == 0, result.output
        assert "Debug log saved to" in strip_ansi(result.output)


class TestSweepCommand:
    """Test the sweep command."""

    def test_sweep(self, workspace: Path) -> None:
        """Test two ADC widths times two replicates."""
        result = runner.invoke(cli.app, ["sweep", "-c", _config(workspace, ADC_SWEEP)])

        assert result.exit_code == 0, result.output
        rows = _data_rows(workspace / "adc.csv")
        assert [row["index"] for row in rows] == ["0", "1", "2", "3"]
        assert [row["hardware.adc_bits"] for row in rows] == ["3", "3", "8", "8"]
        assert (workspace / "adc.summary.md").exists()
        assert "Sweep Summary" in strip_ansi(result.output)

    def test_replicates_override(self, workspace: Path) -> None:
        """Test --replicates changes the row count."""
        result = runner.invoke(
            cli.app, ["sweep", "-c", _config(workspace, ADC_SWEEP), "-r", "1"]
        )

        assert result.exit_code == 0, result.output
        assert len(_data_rows(workspace / "adc.csv")) == 2

    def test_failed_rows_exit_2(self, workspace: Path) -> None:
        """Test a sweep with failed rows exits 2 after writing them."""
        path = _config(workspace, BAD_WEIGHTS)
        result = runner.invoke(cli.app, ["sweep", "-c", path, "-r", "2"])

        assert result.exit_code == cli.EXIT_RUNTIME_ERROR
        rows = _data_rows(workspace / "results.csv")
        assert [row["status"] for row in rows] == ["failed", "failed"]

    def test_unknown_axis_exits_1(self, workspace: Path) -> None:
        """Test an unknown sweep axis is a configuration error."""
        name = _config(workspace, "[sweep]\nwarp = [1]\n")

        result = runner.invoke(cli.app, ["sweep", "-c", name])

        assert result.exit_code == cli.EXIT_CONFIG_ERROR


class TestValidateCommand:
    """Test the validate command."""

    def test_valid(self, workspace: Path) -> None:
        """Test a valid config exits 0."""
        path = _config(workspace, ADC_SWEEP)
        result = runner.invoke(cli.app, ["validate", "-c", path])

        assert result.exit_code == 0, result.output
        output = strip_ansi(result.output)
        assert "Experiment Configuration" in output
        assert "is valid (4 rows)" in output

    def test_invalid_model(self, workspace: Path) -> None:
        """Test model invariant violations exit 1."""
        path = _config(workspace, BAD_WEIGHTS)
        result = runner.invoke(cli.app, ["validate", "-c", path])

        assert result.exit_code == cli.EXIT_CONFIG_ERROR
        assert "weights sum" in strip_ansi(result.output)

    def test_invalid_sweep_value(self, workspace: Path) -> None:
        """Test an out-of-range sweep value exits 1."""
        name = _config(workspace, '[sweep]\n"hardware.adc_bits" = [1]\n')

        result = runner.invoke(cli.app, ["validate", "-c", name])

        assert result.exit_code == cli.EXIT_CONFIG_ERROR

    def test_bad_toml(self, workspace: Path) -> None:
        """Test malformed TOML exits 1."""
        path = _config(workspace, "x = = 1")
        result = runner.invoke(cli.app, ["validate", "-c", path])

        assert result.exit_code == cli.EXIT_CONFIG_ERROR


class TestCalibrateLutCommand:
    """Test the calibrate-lut command."""

    def test_default_table(self, workspace: Path) -> None:
        """Test the default table and its written bound."""
        result = runner.invoke(
            cli.app, ["calibrate-lut", "--points", "10000", "--out", "lut.txt"]
        )

        assert result.exit_code == 0, result.output
        assert "max |error|" in strip_ansi(result.output)
        text = (workspace / "lut.txt").read_text()
        lines = dict(line.split(" = ", 1) for line in text.splitlines())
        assert lines["lut_entries"] == "256"
        assert float(lines["max_abs_error"]) <= 5e-4

    def test_from_config(self, workspace: Path) -> None:
        """Test LUT settings are read from a config."""
        name = _config(workspace, "[hardware]\nlut_entries = 16\n")

        result = runner.invoke(cli.app, ["calibrate-lut", "-c", name, "-p", "1000"])

        assert result.exit_code == 0, result.output
        assert "16 entries" in strip_ansi(result.output)
