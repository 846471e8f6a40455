from .gbdt import GbdtModel, GbdtParams, GbdtSearchSpace, Tree, fit_gbdt, train_gbdt
from .logistic import LogisticModel, train_logistic
from .metrics import (
    EvalMetrics,
    confusion_cells,
    evaluate_model,
    ks_statistic,
    macro_f1,
    pr_auc,
)
from .serialize import load_model, save_model


def predict(model: LogisticModel | GbdtModel, x) -> tuple[float, float]:
    """(probability, raw margin) for one encoded row.

    The raw score is the log-odds both model kinds decompose additively, so
    it is what attribution checks reconstruct.
    """
    return float(model.predict_proba(x)), float(model.raw_score(x))


__all__ = [
    "predict",
    "GbdtModel",
    "GbdtParams",
    "GbdtSearchSpace",
    "Tree",
    "fit_gbdt",
    "train_gbdt",
    "LogisticModel",
    "train_logistic",
    "EvalMetrics",
    "confusion_cells",
    "evaluate_model",
    "ks_statistic",
    "macro_f1",
    "pr_auc",
    "load_model",
    "save_model",
]
