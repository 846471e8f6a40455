"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single PASS line once its assertions hold; run with
``pytest tests/test_acceptance.py -v -s`` to see them. Criterion 6 needs the
real LendingClub 2007-2011 CSV (path in ATTRALIGN_LENDINGCLUB_CSV) and is
skipped, not failed, when the file is absent.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from attralign.alignment import kendall_tau_topk, overlap_at_k
from attralign.attribution import brute_force_shapley, linear_contributions, tree_shap
from attralign.data import prepare
from attralign.harness import run_experiment
from attralign.models import (
    GbdtSearchSpace,
    evaluate_model,
    train_gbdt,
    train_logistic,
)
from attralign.report import write_report
from attralign.schema import bundled_schema_path
from conftest import bot_plan, random_forest

FEATURES = [f"f{i:02d}" for i in range(24)]


def test_criterion_1_attribution_additivity(prepared, logistic_model, gbdt_model):
    ds, split = prepared["ds"], prepared["split"]
    rows = split.test_idx[:1000]
    assert rows.size >= 1000

    worst_linear = 0.0
    worst_forest = 0.0
    for row in rows:
        x = ds.matrix[row]
        worst_linear = max(worst_linear, linear_contributions(logistic_model, x).additivity_gap())
        worst_forest = max(worst_forest, tree_shap(gbdt_model, x).additivity_gap())
    assert worst_linear <= 1e-9
    assert worst_forest <= 1e-6
    print(
        f"\nACCEPTANCE 1 PASS: additivity over {rows.size} instances "
        f"(linear {worst_linear:.2e} <= 1e-9, forest {worst_forest:.2e} <= 1e-6)"
    )


def test_criterion_2_tree_shap_oracle_equivalence():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(2, 9))
        model = random_forest(
            rng, m=m, n_trees=int(rng.integers(1, 6)), max_depth=int(rng.integers(1, 4))
        )
        x = rng.normal(size=(50, m))
        for i in range(50):
            fast = tree_shap(model, x[i])
            oracle = brute_force_shapley(model, x[i])
            worst = max(worst, float(np.max(np.abs(fast.values - oracle.values))))
    assert worst <= 1e-8
    print(f"\nACCEPTANCE 2 PASS: 100 forests x 50 instances, max |diff| {worst:.2e} <= 1e-8")


def test_criterion_3_metric_identities():
    # overlap identities
    assert overlap_at_k(FEATURES, FEATURES, 5) == 1.0
    assert overlap_at_k(FEATURES, FEATURES[::-1], 5) == 0.0
    four_of_five = FEATURES[:4] + ["f23"] + FEATURES[5:]
    assert overlap_at_k(FEATURES, four_of_five, 5) == 0.8
    # tau identities
    assert kendall_tau_topk(FEATURES, FEATURES, 5) == 1.0
    assert kendall_tau_topk(FEATURES, list(reversed(FEATURES[:5])), 5) == -1.0
    swapped = FEATURES[:5]
    swapped[3], swapped[4] = swapped[4], swapped[3]
    assert kendall_tau_topk(FEATURES, swapped, 5) == 0.8

    # randomized permutations against an independent pair-enumeration oracle;
    # small-K draws where fewer than two items are shared must agree on
    # "undefined", the rest on the value to 1e-12
    rng = np.random.default_rng(3)
    defined = 0
    for _ in range(1000):
        k = int(rng.integers(2, 25))
        hyp = [FEATURES[i] for i in rng.permutation(24)]
        got = kendall_tau_topk(FEATURES, hyp, k)
        hyp_top = set(hyp[:k])
        shared = [f for f in FEATURES[:k] if f in hyp_top]
        if len(shared) < 2:
            assert got is None
            continue
        hyp_pos = {f: i for i, f in enumerate(hyp[:k])}
        b = [hyp_pos[f] for f in shared]
        concordant = sum(
            1 for i in range(len(b)) for j in range(i + 1, len(b)) if b[j] > b[i]
        )
        discordant = len(b) * (len(b) - 1) // 2 - concordant
        expected = (concordant - discordant) / (len(b) * (len(b) - 1) / 2)
        assert abs(got - expected) <= 1e-12
        defined += 1
    assert defined > 500  # plenty of non-degenerate cases exercised
    print(
        f"\nACCEPTANCE 3 PASS: metric identities and 1000 randomized tau cases "
        f"({defined} with defined tau) at 1e-12"
    )


def test_criterion_4_echo_bot_rq1_end_to_end(prepared, model_files, tmp_path):
    plan = bot_plan(
        prepared, model_files, "echo",
        model_tags=["logistic", "gbdt"], per_cell=50,
    )
    records = run_experiment(plan, 1, "record", tmp_path / "run", max_workers=4)
    assert len(records) == 400  # 200 stratified instances x 2 base models
    for record in records:
        assert record["error"] is None, record["error"]
        assert all(v == 1.0 for v in record["scores"]["overlap"].values())
        assert all(v == 1.0 for v in record["scores"]["tau"].values())
        assert set(record["scores"]["overlap"]) == {"5", "10", "15", "20"}
    for base in ("logistic", "gbdt"):
        cells = [r["cell"] for r in records if r["base_model"] == base]
        assert sorted(set(cells)) == ["FN", "FP", "TN", "TP"]
        assert all(cells.count(c) == 50 for c in set(cells))
    print(
        "\nACCEPTANCE 4 PASS: echo transport, 200 stratified instances per base "
        "model, overlap = tau = 1 at K in {5,10,15,20} for 100% of records"
    )


def test_criterion_5_random_bot_rq2_calibration(prepared, model_files, tmp_path):
    plan = bot_plan(
        prepared, model_files, "random_permutation", bot_seed=5,
        per_cell=50, modes=["zero_shot"],
    )
    records = run_experiment(plan, 2, "record", tmp_path / "run", max_workers=4)
    assert len(records) == 200
    mean_overlap = float(np.mean([r["scores"]["overlap"]["10"] for r in records]))
    expected = 10 / 24
    assert abs(mean_overlap - expected) <= 0.05
    print(
        f"\nACCEPTANCE 5 PASS: uniform-permutation bot mean Overlap@10 = "
        f"{mean_overlap:.4f}, within 0.05 of {expected:.4f}"
    )


@pytest.mark.skipif(
    "ATTRALIGN_LENDINGCLUB_CSV" not in os.environ,
    reason="LendingClub 2007-2011 corpus not supplied "
    "(set ATTRALIGN_LENDINGCLUB_CSV to the cleaned CSV path)",
)
def test_criterion_6_lendingclub_baseline_bands():
    csv_path = os.environ["ATTRALIGN_LENDINGCLUB_CSV"]
    ds, schema, split, _ = prepare(
        csv_path, bundled_schema_path("lendingclub_2007_2011"),
        ratio=0.7, seed=42, filter_target=True,
    )
    xtr, ytr = ds.matrix[split.train_idx], ds.labels[split.train_idx]
    xte, yte = ds.matrix[split.test_idx], ds.labels[split.test_idx]

    logistic = train_logistic(xtr, ytr, [0.01, 0.1, 1.0, 10.0, 100.0], folds=3, seed=42)
    space = GbdtSearchSpace(
        max_depth=(3, 5), n_rounds=(60, 200), learning_rate=(0.05, 0.25),
        min_child_weight=(1.0, 8.0), reg_lambda=(1.0, 8.0),
    )
    gbdt = train_gbdt(xtr, ytr, space, folds=3, seed=42, n_trials=6)

    m_log = evaluate_model(logistic.predict_proba(xte), yte)
    m_gbdt = evaluate_model(gbdt.predict_proba(xte), yte)

    assert m_gbdt.pr_auc > m_log.pr_auc
    assert m_gbdt.macro_f1 > m_log.macro_f1
    assert m_gbdt.ks > m_log.ks
    assert 0.22 <= m_log.pr_auc <= 0.32
    assert 0.24 <= m_log.ks <= 0.34
    assert 0.33 <= m_gbdt.pr_auc <= 0.43
    assert 0.35 <= m_gbdt.ks <= 0.45
    print(
        f"\nACCEPTANCE 6 PASS: logistic PR-AUC {m_log.pr_auc:.3f} KS {m_log.ks:.3f}; "
        f"gbdt PR-AUC {m_gbdt.pr_auc:.3f} KS {m_gbdt.ks:.3f}; gbdt beats logistic"
    )


def test_criterion_7_replay_determinism(prepared, model_files, tmp_path):
    cassette = tmp_path / "cassette.jsonl"
    plan = bot_plan(
        prepared, model_files, "echo", per_cell=10, cassette=str(cassette)
    )
    run_experiment(plan, 1, "record", tmp_path / "rec", max_workers=4)

    for name in ("rep1", "rep2"):
        records = run_experiment(plan, 1, "replay", tmp_path / name, max_workers=4)
        write_report(records, tmp_path / name / "report")

    rec1 = (tmp_path / "rep1" / "records.jsonl").read_bytes()
    rec2 = (tmp_path / "rep2" / "records.jsonl").read_bytes()
    assert rec1 == rec2

    report1 = sorted((tmp_path / "rep1" / "report").iterdir())
    report2 = sorted((tmp_path / "rep2" / "report").iterdir())
    assert [p.name for p in report1] == [p.name for p in report2]
    for a, b in zip(report1, report2):
        assert a.read_bytes() == b.read_bytes(), f"{a.name} differs between replays"
    print(
        "\nACCEPTANCE 7 PASS: two replay runs produced byte-identical records "
        f"and {len(report1)} byte-identical report files"
    )
