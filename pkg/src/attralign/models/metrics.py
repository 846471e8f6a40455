"""Performance metrics for imbalanced binary classification.

All three headline metrics depend only on the ranking (PR-AUC, KS) or on a
stated threshold (macro-F1), never on the probability calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CELLS = ("TP", "TN", "FP", "FN")


@dataclass(frozen=True)
class EvalMetrics:
    pr_auc: float
    macro_f1: float
    ks: float
    threshold: float

    def as_dict(self) -> dict[str, float]:
        return {
            "pr_auc": self.pr_auc,
            "macro_f1": self.macro_f1,
            "ks": self.ks,
            "threshold": self.threshold,
        }


def _check_both_classes(labels: np.ndarray) -> None:
    if labels.min() == labels.max():
        raise ValueError("need both classes present")


def pr_auc(scores, labels) -> float:
    """Average precision: step-wise integration of precision over recall.

    Tied scores are grouped, so the value is invariant under any strictly
    increasing transform of the scores.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_both_classes(labels)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order].astype(float)
    # group boundaries: last index of each run of equal scores
    boundary = np.flatnonzero(np.diff(s) != 0)
    last = np.concatenate([boundary, [s.size - 1]])
    tp = np.cumsum(y)[last]
    n_at = last + 1.0
    precision = tp / n_at
    n_pos = y.sum()
    recall = tp / n_pos
    d_recall = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(d_recall * precision))


def macro_f1(scores, labels, threshold: float = 0.5) -> float:
    """Unweighted mean of the two class-specific F1 scores at a threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_both_classes(labels)
    preds = (scores >= threshold).astype(int)
    f1s = []
    for cls in (0, 1):
        tp = np.sum((preds == cls) & (labels == cls))
        fp = np.sum((preds == cls) & (labels != cls))
        fn = np.sum((preds != cls) & (labels == cls))
        denom = 2 * tp + fp + fn
        f1s.append(0.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(f1s))


def ks_statistic(scores, labels) -> float:
    """Max vertical distance between the class-conditional score CDFs."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    _check_both_classes(labels)
    pos = np.sort(scores[labels == 1])
    neg = np.sort(scores[labels == 0])
    grid = np.unique(scores)
    cdf_pos = np.searchsorted(pos, grid, side="right") / pos.size
    cdf_neg = np.searchsorted(neg, grid, side="right") / neg.size
    return float(np.max(np.abs(cdf_pos - cdf_neg)))


def confusion_cells(scores, labels, threshold: float = 0.5) -> list[str]:
    """Per-instance TP/TN/FP/FN label at the stated threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    cells = []
    for s, y in zip(scores, labels):
        predicted = s >= threshold
        if y == 1:
            cells.append("TP" if predicted else "FN")
        else:
            cells.append("FP" if predicted else "TN")
    return cells


def evaluate_model(scores, labels, threshold: float = 0.5) -> EvalMetrics:
    return EvalMetrics(
        pr_auc=pr_auc(scores, labels),
        macro_f1=macro_f1(scores, labels, threshold),
        ks=ks_statistic(scores, labels),
        threshold=threshold,
    )
