from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from attralign.cli import main
from attralign.schema import bundled_schema_path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Full CLI walk on a small corpus: synth -> prepare -> train -> run."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()

    def run_ok(args):
        result = runner.invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
        return result

    run_ok(["make-synthetic", "--out", str(root / "loans.csv"), "--rows", "4000", "--seed", "1"])
    run_ok([
        "prepare-data", "--csv", str(root / "loans.csv"),
        "--schema", str(bundled_schema_path("synthetic")),
        "--out", str(root / "prep"), "--seed", "3",
    ])
    run_ok([
        "train", "--model", "logistic", "--data", str(root / "prep"),
        "--lambda-grid", "1", "--folds", "2", "--seed", "0",
        "--out", str(root / "logistic.json"),
    ])
    run_ok([
        "train", "--model", "gbdt", "--data", str(root / "prep"),
        "--gbdt-params", json.dumps({"n_rounds": 15, "learning_rate": 0.2, "max_depth": 3}),
        "--out", str(root / "gbdt.json"),
    ])
    return root, runner, run_ok


def test_evaluate_writes_metrics(workspace):
    root, runner, run_ok = workspace
    result = run_ok([
        "evaluate", "--model", str(root / "logistic.json"), "--data", str(root / "prep"),
        "--threshold", "0.5", "--tag", "logistic", "--out", str(root / "metrics.json"),
    ])
    assert "PR-AUC=" in result.output
    rows = json.loads((root / "metrics.json").read_text())
    assert rows[0]["model"] == "logistic"
    assert 0.0 < rows[0]["pr_auc"] < 1.0


def test_attribute_emits_ranked_records(workspace):
    root, runner, run_ok = workspace
    run_ok([
        "attribute", "--model", str(root / "gbdt.json"), "--data", str(root / "prep"),
        "--rows", "0,1,2", "--out", str(root / "attr.jsonl"),
    ])
    lines = (root / "attr.jsonl").read_text().splitlines()
    assert len(lines) == 3
    record = json.loads(lines[0])
    assert set(record) == {"instance_id", "baseline", "model_output", "grouped", "ranking"}
    assert len(record["ranking"]) == 24
    total = record["baseline"] + sum(record["grouped"].values())
    assert abs(total - record["model_output"]) <= 1e-6


def test_sample_run_report_flow(workspace):
    root, runner, run_ok = workspace
    run_ok([
        "sample", "--model", str(root / "logistic.json"), "--data", str(root / "prep"),
        "--per-cell", "5", "--seed", "2", "--out", str(root / "sample.json"),
    ])
    sampled = json.loads((root / "sample.json").read_text())
    assert sum(len(v) for v in sampled.values()) == 20

    plan = {
        "format": "attralign-plan",
        "version": 1,
        "data_dir": "prep",
        "models": [{"tag": "logistic", "path": "logistic.json"}],
        "llms": [{"provider": "echo", "model": "echo-1"}],
        "providers": [{"name": "echo", "bot": "echo"}],
        "sample": {"per_cell": 5, "threshold": 0.5},
        "seed": 2,
        "retry_base_delay": 0.0,
    }
    (root / "plan.json").write_text(json.dumps(plan), encoding="utf-8")
    run_ok([
        "run", "--rq", "1", "--plan", str(root / "plan.json"),
        "--mode", "record", "--out", str(root / "run1"),
    ])
    assert (root / "run1" / "records.jsonl").exists()
    assert (root / "run1" / "manifest.json").exists()

    run_ok([
        "report", "--records", str(root / "run1"),
        "--metrics", str(root / "metrics.json"),
    ])
    report_dir = root / "run1" / "report"
    assert (report_dir / "report.md").exists()
    assert (report_dir / "model_metrics.csv").exists()
    assert (report_dir / "summary.json").exists()


def test_version_flag():
    result = CliRunner().invoke(main, ["--version"])
    assert result.exit_code == 0
