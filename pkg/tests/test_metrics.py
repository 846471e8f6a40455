from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, f1_score

from attralign.models.metrics import (
    confusion_cells,
    evaluate_model,
    ks_statistic,
    macro_f1,
    pr_auc,
)


def scores_and_labels(min_size=4):
    return st.lists(
        st.tuples(st.floats(-50, 50), st.integers(0, 1)),
        min_size=min_size,
        max_size=80,
    ).filter(lambda rows: len({y for _, y in rows}) == 2)


def strictly_increasing_on(scores: np.ndarray, transformed: np.ndarray) -> bool:
    """True when the float transform preserved order and distinctness."""
    order = np.argsort(scores, kind="mergesort")
    s, t = scores[order], transformed[order]
    return np.array_equal(np.diff(s) > 0, np.diff(t) > 0) and np.all(np.diff(t) >= 0)


class TestPrAuc:
    def test_perfect_ranking(self):
        assert pr_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_random_scores_approach_prevalence(self):
        rng = np.random.default_rng(0)
        n = 20_000
        labels = (rng.random(n) < 0.1).astype(int)
        scores = rng.random(n)
        assert pr_auc(scores, labels) == pytest.approx(0.1, abs=0.02)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            pr_auc([0.1, 0.2], [1, 1])

    @settings(max_examples=60, deadline=None)
    @given(rows=scores_and_labels())
    def test_matches_sklearn_average_precision(self, rows):
        scores = np.array([s for s, _ in rows])
        labels = np.array([y for _, y in rows])
        assert pr_auc(scores, labels) == pytest.approx(
            average_precision_score(labels, scores), abs=1e-12
        )

    def test_matches_sklearn_under_heavy_ties(self):
        rng = np.random.default_rng(5)
        scores = rng.integers(0, 4, 500).astype(float)  # only 4 distinct values
        labels = (rng.random(500) < 0.3).astype(int)
        assert pr_auc(scores, labels) == pytest.approx(
            average_precision_score(labels, scores), abs=1e-12
        )

    @settings(max_examples=30, deadline=None)
    @given(rows=scores_and_labels(), scale=st.floats(0.1, 5), shift=st.floats(-3, 3))
    def test_invariant_under_increasing_transform(self, rows, scale, shift):
        scores = np.array([s for s, _ in rows])
        labels = np.array([y for _, y in rows])
        transformed = np.exp(scale * 0.1 * scores) + shift
        assume(strictly_increasing_on(scores, transformed))
        assert pr_auc(scores, labels) == pytest.approx(
            pr_auc(transformed, labels), abs=1e-9
        )


class TestMacroF1:
    def test_perfect_classifier(self):
        assert macro_f1([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], 0.5) == 1.0

    def test_majority_only_prediction(self):
        labels = np.array([0] * 9 + [1])
        scores = np.zeros(10)
        # minority F1 is 0, majority F1 = 2*9/(2*9+1)
        expected = (2 * 9 / (2 * 9 + 1)) / 2
        assert macro_f1(scores, labels, 0.5) == pytest.approx(expected)

    @settings(max_examples=60, deadline=None)
    @given(rows=scores_and_labels(), threshold=st.floats(-40, 40))
    def test_matches_sklearn_macro(self, rows, threshold):
        scores = np.array([s for s, _ in rows])
        labels = np.array([y for _, y in rows])
        preds = (scores >= threshold).astype(int)
        expected = f1_score(labels, preds, average="macro", zero_division=0.0)
        assert macro_f1(scores, labels, threshold) == pytest.approx(expected, abs=1e-12)


class TestKsStatistic:
    def test_identical_distributions(self):
        assert ks_statistic([1, 2, 3, 1, 2, 3], [0, 0, 0, 1, 1, 1]) == 0.0

    def test_perfect_separation(self):
        assert ks_statistic([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    @settings(max_examples=30, deadline=None)
    @given(rows=scores_and_labels(), shift=st.floats(-3, 3))
    def test_invariant_under_increasing_transform(self, rows, shift):
        scores = np.array([s for s, _ in rows])
        labels = np.array([y for _, y in rows])
        transformed = np.arctan(scores * 0.1) + shift
        assume(strictly_increasing_on(scores, transformed))
        assert ks_statistic(scores, labels) == pytest.approx(
            ks_statistic(transformed, labels), abs=1e-12
        )

    @settings(max_examples=30, deadline=None)
    @given(rows=scores_and_labels())
    def test_matches_scipy_two_sample(self, rows):
        from scipy.stats import ks_2samp

        scores = np.array([s for s, _ in rows])
        labels = np.array([y for _, y in rows])
        expected = ks_2samp(scores[labels == 1], scores[labels == 0]).statistic
        assert ks_statistic(scores, labels) == pytest.approx(expected, abs=1e-12)

    def test_matches_scipy_under_heavy_ties(self):
        from scipy.stats import ks_2samp

        rng = np.random.default_rng(6)
        scores = rng.integers(0, 5, 400).astype(float)
        labels = (rng.random(400) < 0.4).astype(int)
        expected = ks_2samp(scores[labels == 1], scores[labels == 0]).statistic
        assert ks_statistic(scores, labels) == pytest.approx(expected, abs=1e-12)


class TestConfusionCells:
    @pytest.mark.parametrize(
        "label,score,expected",
        [(1, 0.9, "TP"), (0, 0.9, "FP"), (1, 0.1, "FN"), (0, 0.1, "TN")],
    )
    def test_cell_assignment(self, label, score, expected):
        assert confusion_cells([score], [label], 0.5) == [expected]

    def test_threshold_boundary_counts_as_positive(self):
        assert confusion_cells([0.5], [1], 0.5) == ["TP"]


def test_evaluate_model_bundle():
    metrics = evaluate_model([0.9, 0.7, 0.3, 0.1], [1, 1, 0, 0], threshold=0.5)
    assert metrics.pr_auc == 1.0
    assert metrics.macro_f1 == 1.0
    assert metrics.ks == 1.0
    assert metrics.threshold == 0.5
