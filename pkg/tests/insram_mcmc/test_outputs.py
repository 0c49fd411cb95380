"""Tests for result files and their companions."""

import csv
from datetime import UTC, datetime
from pathlib import Path

import numpy as np
import pytest

from insram_mcmc.config import ExperimentConfig, config_hash
from insram_mcmc.harness import (
    ExperimentResult,
    result_columns,
    run_point,
    run_sweep,
    summarize,
)
from insram_mcmc.outputs import (
    RESULTS_TITLE,
    OutputError,
    ResultWriter,
    emit_outputs,
    format_value,
    metadata_lines,
    sibling_path,
    write_results,
    write_trajectory_csv,
)
from insram_mcmc.templates import TemplateRenderer


@pytest.fixture
def small_cfg(tmp_path: Path) -> ExperimentConfig:
    return ExperimentConfig.model_validate(
        {
            "chain": {"total_samples": 200, "burn_in": 10},
            "replicates": 2,
            "output": str(tmp_path / "results.csv"),
        }
    )


def _data_lines(path: Path) -> list[str]:
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def _read_rows(path: Path) -> list[dict[str, str]]:
    return list(csv.DictReader(_data_lines(path)))


class TestFormatValue:
    """Test CSV cell formatting."""

    @pytest.mark.parametrize(
        ("value", "expected"),
        [
            (None, ""),
            (True, "true"),
            (np.bool_(False), "false"),
            (0.1, "0.1"),
            (np.float64(1e-7), "1e-07"),
            (np.int64(3), "3"),
            ("ok", "ok"),
        ],
    )
    def test_format(self, value: object, expected: str) -> None:
        """Test each cell type."""
        assert format_value(value) == expected

    def test_float_round_trips(self) -> None:
        """Test floats keep full precision."""
        value = 0.1 + 0.2

        assert float(format_value(value)) == value


class TestMetadata:
    """Test the results header."""

    def test_lines(self, small_cfg: ExperimentConfig) -> None:
        """Test title, hash, versions and timestamp."""
        created = datetime(2024, 1, 2, 3, 4, 5, tzinfo=UTC)

        lines = metadata_lines(small_cfg, created)

        assert lines[0] == RESULTS_TITLE
        assert lines[1] == f"# config_sha256: {config_hash(small_cfg)}"
        assert lines[2].startswith("# versions: insram-mcmc=")
        assert "numpy=" in lines[2]
        assert lines[3] == "# created: 2024-01-02T03:04:05+00:00"

    def test_sibling_path(self, tmp_path: Path) -> None:
        """Test companion files share the stem."""
        path = sibling_path(tmp_path / "adc.csv", "trace.csv")

        assert path == tmp_path / "adc.trace.csv"


class TestResultWriter:
    """Test streaming rows."""

    def test_refuses_existing_file(self, small_cfg: ExperimentConfig) -> None:
        """Test an existing results file is kept without overwrite."""
        small_cfg.output.write_text("keep me")

        with pytest.raises(OutputError, match="already exists"):
            ResultWriter(small_cfg.output, small_cfg, ["index"]).open()

        assert small_cfg.output.read_text() == "keep me"

    def test_overwrite(self, small_cfg: ExperimentConfig) -> None:
        """Test overwrite replaces the file."""
        small_cfg.output.write_text("old")

        writer = ResultWriter(small_cfg.output, small_cfg, ["index"], overwrite=True)
        with writer:
            writer.write_row({"index": 0})

        assert _data_lines(small_cfg.output) == ["index", "0"]

    def test_missing_column(self, small_cfg: ExperimentConfig) -> None:
        """Test a row lacking a column is rejected."""
        with ResultWriter(small_cfg.output, small_cfg, ["index", "kl"]) as writer:
            with pytest.raises(OutputError, match="lacks columns"):
                writer.write_row({"index": 0})

    def test_rows_survive_failure(self, small_cfg: ExperimentConfig) -> None:
        """Test rows written before an exception stay on disk."""
        with pytest.raises(RuntimeError):
            with ResultWriter(small_cfg.output, small_cfg, ["index"]) as writer:
                writer.write_row({"index": 0})
                writer.write_row({"index": 1})
                raise RuntimeError("worker died")

        assert _data_lines(small_cfg.output) == ["index", "0", "1"]

    def test_write_before_open(self, small_cfg: ExperimentConfig) -> None:
        """Test writing to an unopened writer is rejected."""
        with pytest.raises(OutputError, match="not open"):
            ResultWriter(small_cfg.output, small_cfg, ["index"]).write_row({"index": 0})


class TestResultsFile:
    """Test full results tables."""

    def test_reruns_are_identical(
        self, small_cfg: ExperimentConfig, tmp_path: Path
    ) -> None:
        """Test two runs of one config give byte-identical data lines."""
        first = write_results(run_sweep(small_cfg), small_cfg, tmp_path / "a.csv")
        second = write_results(run_sweep(small_cfg), small_cfg, tmp_path / "b.csv")

        assert _data_lines(first) == _data_lines(second)
        lines = first.read_text().splitlines()
        header = [line for line in lines if line.startswith("#")]
        assert len(header) == 4

    def test_columns(self, small_cfg: ExperimentConfig) -> None:
        """Test the header row lists the result columns."""
        result = run_sweep(small_cfg)

        write_results(result, small_cfg, small_cfg.output)

        rows = _read_rows(small_cfg.output)
        assert list(rows[0]) == result_columns(small_cfg)
        assert [row["status"] for row in rows] == ["ok", "ok"]
        assert rows[0]["error"] == ""


class TestCompanionFiles:
    """Test trace, trajectory, ground truth and summary files."""

    def test_trajectory_rows(self, small_cfg: ExperimentConfig, tmp_path: Path) -> None:
        """Test 75 post-burn-in iterations with candidate and state."""
        trace = run_point(small_cfg, keep_trace=True).trace
        assert trace is not None

        path = write_trajectory_csv(trace, tmp_path / "t.csv", 75)

        rows = list(csv.DictReader(path.read_text().splitlines()))
        assert len(rows) == 75
        assert list(rows[0]) == ["t", "cand0", "cand1", "x0", "x1", "accepted"]
        assert rows[0]["t"] == "11"

    def test_trajectory_shorter_chain(self, tmp_path: Path) -> None:
        """Test a chain shorter than the window writes what it has."""
        cfg = ExperimentConfig.model_validate(
            {"chain": {"total_samples": 20, "burn_in": 5}}
        )
        trace = run_point(cfg, keep_trace=True).trace
        assert trace is not None

        path = write_trajectory_csv(trace, tmp_path / "t.csv", 75)

        assert len(path.read_text().splitlines()) == 21

    def test_emit_run_outputs(self, small_cfg: ExperimentConfig) -> None:
        """Test a traced run writes results, trace, trajectory and ground truth."""
        outcome = run_point(small_cfg, keep_trace=True)
        result = ExperimentResult(columns=result_columns(small_cfg), rows=[outcome.row])

        paths = emit_outputs(
            result,
            small_cfg,
            small_cfg.output,
            trace=outcome.trace,
            model=outcome.model,
        )

        assert [p.name for p in paths] == [
            "results.csv",
            "results.trace.csv",
            "results.trajectory.csv",
            "results.ground_truth.csv",
        ]
        trace_rows = list(csv.DictReader(paths[1].read_text().splitlines()))
        assert len(trace_rows) == 210
        truth = list(csv.DictReader(paths[3].read_text().splitlines()))
        assert len(truth) == 30 * 30
        assert sum(float(r["probability"]) for r in truth) == pytest.approx(1.0)

    def test_emit_checks_all_targets_first(self, small_cfg: ExperimentConfig) -> None:
        """Test an existing companion file blocks every write."""
        outcome = run_point(small_cfg, keep_trace=True)
        result = ExperimentResult(columns=result_columns(small_cfg), rows=[outcome.row])
        sibling_path(small_cfg.output, "trace.csv").write_text("keep")

        with pytest.raises(OutputError, match="already exists"):
            emit_outputs(result, small_cfg, small_cfg.output, trace=outcome.trace)

        assert not small_cfg.output.exists()

    def test_summary(self, small_cfg: ExperimentConfig) -> None:
        """Test the Markdown summary of a sweep."""
        cfg = small_cfg.model_copy(update={"sweep": {"model.distance": [1.0, 3.0]}})
        result = run_sweep(cfg)

        paths = emit_outputs(
            result,
            cfg,
            cfg.output,
            write_rows=False,
            summaries=summarize(result, cfg),
            renderer=TemplateRenderer(),
        )

        assert [p.name for p in paths] == ["results.summary.md"]
        text = paths[0].read_text()
        assert text.startswith("# Sweep summary")
        assert f"`{config_hash(cfg)}`" in text
        assert "| model.distance |" in text
        assert "Rows: 4 (0 failed)" in text
