from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from trackscreen.cli import main


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("data")
    runner = CliRunner()
    result = runner.invoke(main, [
        "generate", "--athletes", "80", "--out", str(out), "--seed", "21",
        "--fraction-doped", "0.1", "--n-sanctioned", "3",
    ])
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture(scope="module")
def db_path(dataset_dir, tmp_path_factory) -> Path:
    db = tmp_path_factory.mktemp("db") / "cli.db"
    runner = CliRunner()
    result = runner.invoke(main, [
        "ingest", str(dataset_dir / "results.csv"),
        "--sanctions", str(dataset_dir / "sanctions.csv"),
        "--db", str(db),
    ])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["rows_skipped"] == 0
    assert body["performances_inserted"] == body["rows_total"] - body["sanctions_inserted"]
    return db


class TestGenerate:
    def test_writes_all_files(self, dataset_dir):
        for name in ("results.csv", "sanctions.csv", "competitions.csv", "manifest.json"):
            assert (dataset_dir / name).exists()

    def test_manifest_labels(self, dataset_dir):
        manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert len(manifest["injected_athletes"]) == 8
        assert len(manifest["sanctioned_athletes"]) == 3


class TestDetect:
    def test_runs_only_requested_methods(self, db_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "detect", "--event", "100m-men", "--db", str(db_path), "--methods", "zscore,iqr",
        ])
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        assert sorted(body["methods"]) == ["iqr", "zscore"]

    def test_unknown_method_machine_parsable_error(self, db_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "detect", "--event", "100m-men", "--db", str(db_path), "--methods", "bogus",
        ])
        assert result.exit_code == 1
        error = json.loads(result.output.strip().splitlines()[-1])
        assert error["error"]["code"] == "unknown_method"

    def test_empty_slice_error(self, db_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "detect", "--event", "60m-men", "--db", str(db_path), "--methods", "zscore",
        ])
        assert result.exit_code == 1
        error = json.loads(result.output.strip().splitlines()[-1])
        assert error["error"]["code"] == "empty_slice"


class TestEvaluate:
    def test_report_written_and_consistent(self, db_path, tmp_path):
        out = tmp_path / "report.json"
        runner = CliRunner()
        result = runner.invoke(main, [
            "evaluate", "--event", "100m-men", "--db", str(db_path),
            "--methods", "zscore,iqr,excess_performance", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        body = json.loads(out.read_text())
        assert body["sanctioned_count"] == 3
        for metrics in body["methods"].values():
            assert metrics["true_positives"] + metrics["false_positives"] == metrics["flagged_athletes"]


class TestExportReport:
    def test_writes_delimited_output_and_figures(self, db_path, tmp_path):
        out = tmp_path / "report"
        runner = CliRunner()
        result = runner.invoke(main, [
            "export-report", "--event", "100m-men", "--db", str(db_path),
            "--methods", "zscore,iqr,iforest", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert (out / "report.json").exists()
        assert (out / "report.csv").exists()
        assert (out / "consensus.csv").exists()
        for fig in ("method_metrics.png", "flag_counts.png", "consensus_agreement.png"):
            path = out / "figures" / fig
            assert path.exists() and path.stat().st_size > 1000

    def test_report_csv_has_metric_columns(self, db_path, tmp_path):
        out = tmp_path / "report2"
        runner = CliRunner()
        result = runner.invoke(main, [
            "export-report", "--event", "100m-men", "--db", str(db_path),
            "--methods", "zscore,iqr", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        header = (out / "report.csv").read_text().splitlines()[0]
        assert header.startswith("method_id,true_positives,false_positives")
