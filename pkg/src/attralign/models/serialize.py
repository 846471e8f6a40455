"""Versioned JSON serialization for both model kinds.

The format is plain enough to hand-write forests in tests: a logistic model
is a coefficient vector plus standardization constants; a forest is per-tree
parallel node arrays (feature, threshold, left, right, value, cover) where
``feature == -1`` marks a leaf and margins are ``base_score`` plus the sum of
reached leaf values.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gbdt import GbdtModel, Tree
from .logistic import LogisticModel

MODEL_FORMAT = "attralign-model"
MODEL_VERSION = 1


def save_model(model: LogisticModel | GbdtModel, path: str | Path) -> None:
    if isinstance(model, LogisticModel):
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": "logistic",
            "intercept": model.intercept,
            "coef": model.coef.tolist(),
            "lambda": model.lambda_,
            "mean": model.mean.tolist(),
            "scale": model.scale.tolist(),
        }
    elif isinstance(model, GbdtModel):
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": "gbdt",
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "n_rounds": model.n_rounds,
            "n_features": model.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "cover": t.cover.tolist(),
                }
                for t in model.trees
            ],
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LogisticModel | GbdtModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: not a supported model file")
    if doc["kind"] == "logistic":
        return LogisticModel(
            intercept=float(doc["intercept"]),
            coef=np.asarray(doc["coef"], dtype=float),
            lambda_=float(doc["lambda"]),
            mean=np.asarray(doc["mean"], dtype=float),
            scale=np.asarray(doc["scale"], dtype=float),
        )
    if doc["kind"] == "gbdt":
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
                cover=np.asarray(t["cover"], dtype=np.float64),
            )
            for t in doc["trees"]
        ]
        return GbdtModel(
            trees=trees,
            learning_rate=float(doc["learning_rate"]),
            base_score=float(doc["base_score"]),
            n_rounds=int(doc["n_rounds"]),
            n_features=int(doc["n_features"]),
        )
    raise ValueError(f"{path}: unknown model kind {doc['kind']!r}")
