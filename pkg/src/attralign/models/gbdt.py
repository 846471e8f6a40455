"""Second-order gradient boosting on logistic loss with exact greedy splits.

Trees are stored as flat node arrays. Leaf values already include the
learning rate, so a margin is simply ``base_score`` plus the sum of reached
leaf values across trees. Split gain is the standard regularized reduction
0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)) - gamma, with ties broken
toward the lowest feature index and then the lowest threshold. Cover is the
number of training rows that reached a node (all rows carry unit weight), so
child covers sum exactly to the parent cover.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateDatasetError, DimensionError
from .logistic import _sigmoid, stratified_folds
from .metrics import pr_auc

MIN_GAIN = 1e-12


@dataclass
class Tree:
    feature: np.ndarray  # int32; -1 marks a leaf
    threshold: np.ndarray  # float64; split sends x[f] <= t left
    left: np.ndarray  # int32 child ids; -1 at leaves
    right: np.ndarray
    value: np.ndarray  # float64; leaf output (learning rate included)
    cover: np.ndarray  # float64; training rows through the node

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Leaf values reached by each row of a 2-D matrix."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = x[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]


@dataclass(frozen=True)
class GbdtParams:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0


@dataclass
class GbdtModel:
    trees: list[Tree]
    learning_rate: float
    base_score: float  # log-odds
    n_rounds: int
    n_features: int

    def raw_score(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.n_features:
            raise DimensionError(
                f"row has {x.shape[1]} columns, model expects {self.n_features}"
            )
        out = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            out += tree.predict(x)
        return float(out[0]) if single else out

    def predict_proba(self, x) -> np.ndarray | float:
        return _sigmoid(self.raw_score(x))


class _TreeBuilder:
    """Accumulates node arrays while growing one tree depth-first."""

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.cover: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.cover.append(0.0)
        return len(self.feature) - 1

    def freeze(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            cover=np.asarray(self.cover, dtype=np.float64),
        )


def best_split(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    reg_lambda: float,
    gamma: float,
    min_child_weight: float,
) -> tuple[int, float, float] | None:
    """Exhaustive search over every (feature, midpoint) candidate.

    Returns (feature, threshold, gain) or None when no candidate improves the
    objective. Also serves as its own oracle for stump tests: no shortcuts.
    """
    g_total, h_total = g.sum(), h.sum()
    parent = g_total * g_total / (h_total + reg_lambda)
    best: tuple[int, float, float] | None = None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="mergesort")
        xs = x[order, j]
        gl = np.cumsum(g[order])
        hl = np.cumsum(h[order])
        cut = np.flatnonzero(xs[:-1] != xs[1:])
        if cut.size == 0:
            continue
        gl, hl = gl[cut], hl[cut]
        gr, hr = g_total - gl, h_total - hl
        gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent) - gamma
        gain[(hl < min_child_weight) | (hr < min_child_weight)] = -np.inf
        k = int(np.argmax(gain))  # ties: earliest (lowest) threshold
        if gain[k] > MIN_GAIN and (best is None or gain[k] > best[2]):
            threshold = (xs[cut[k]] + xs[cut[k] + 1]) / 2.0
            best = (j, float(threshold), float(gain[k]))
    return best


def _grow(
    builder: _TreeBuilder,
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    depth: int,
    params: GbdtParams,
    leaf_rows: list[tuple[int, np.ndarray]],
) -> int:
    node = builder.add()
    builder.cover[node] = float(rows.size)
    split = None
    if depth < params.max_depth:
        split = best_split(
            x[rows], g[rows], h[rows],
            params.reg_lambda, params.gamma, params.min_child_weight,
        )
    if split is None:
        value = -g[rows].sum() / (h[rows].sum() + params.reg_lambda)
        builder.value[node] = value * params.learning_rate
        leaf_rows.append((node, rows))
        return node
    j, threshold, _ = split
    builder.feature[node] = j
    builder.threshold[node] = threshold
    mask = x[rows, j] <= threshold
    builder.left[node] = _grow(builder, x, g, h, rows[mask], depth + 1, params, leaf_rows)
    builder.right[node] = _grow(builder, x, g, h, rows[~mask], depth + 1, params, leaf_rows)
    return node


def fit_gbdt(
    x: np.ndarray,
    y: np.ndarray,
    params: GbdtParams,
    base_score: float | None = None,
) -> GbdtModel:
    """Boost for a fixed hyperparameter setting."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DimensionError("x must be (n, m) with one label per row")
    if all(np.unique(x[:, j]).size == 1 for j in range(x.shape[1])):
        raise DegenerateDatasetError("every feature is constant")
    if base_score is None:
        rate = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        base_score = float(np.log(rate / (1.0 - rate)))

    margin = np.full(y.size, base_score)
    all_rows = np.arange(y.size)
    trees: list[Tree] = []
    for _ in range(params.n_rounds):
        p = _sigmoid(margin)
        g = p - y
        h = np.clip(p * (1.0 - p), 1e-16, None)
        builder = _TreeBuilder()
        leaf_rows: list[tuple[int, np.ndarray]] = []
        _grow(builder, x, g, h, all_rows, 0, params, leaf_rows)
        tree = builder.freeze()
        trees.append(tree)
        for node, rows in leaf_rows:
            margin[rows] += tree.value[node]
    return GbdtModel(
        trees=trees,
        learning_rate=params.learning_rate,
        base_score=base_score,
        n_rounds=params.n_rounds,
        n_features=int(x.shape[1]),
    )


@dataclass(frozen=True)
class GbdtSearchSpace:
    max_depth: tuple[int, int] = (2, 6)
    n_rounds: tuple[int, int] = (50, 400)
    learning_rate: tuple[float, float] = (0.03, 0.3)
    min_child_weight: tuple[float, float] = (1.0, 10.0)
    reg_lambda: tuple[float, float] = (0.5, 10.0)

    def validate(self) -> None:
        for name in ("max_depth", "n_rounds", "learning_rate", "min_child_weight", "reg_lambda"):
            lo, hi = getattr(self, name)
            if lo > hi or lo <= 0:
                raise ValueError(f"invalid search range for {name}: ({lo}, {hi})")

    def sample(self, rng: np.random.Generator) -> GbdtParams:
        return GbdtParams(
            n_rounds=int(rng.integers(self.n_rounds[0], self.n_rounds[1] + 1)),
            learning_rate=float(rng.uniform(*self.learning_rate)),
            max_depth=int(rng.integers(self.max_depth[0], self.max_depth[1] + 1)),
            min_child_weight=float(rng.uniform(*self.min_child_weight)),
            reg_lambda=float(rng.uniform(*self.reg_lambda)),
        )


def train_gbdt(
    x: np.ndarray,
    y: np.ndarray,
    search_space: GbdtSearchSpace | None = None,
    folds: int = 5,
    seed: int = 0,
    n_trials: int = 30,
) -> GbdtModel:
    """Random-search hyperparameters by mean CV PR-AUC, then refit on all rows.

    Trial t draws its parameters from a generator seeded by (seed, t), so
    trials are reproducible independently of execution order.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    space = search_space or GbdtSearchSpace()
    space.validate()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fold_idx = stratified_folds(y, folds, seed)

    best_params, best_score = None, -np.inf
    for trial in range(n_trials):
        params = space.sample(np.random.default_rng([seed, trial]))
        scores = []
        for k in range(folds):
            val = fold_idx[k]
            train = np.concatenate([fold_idx[j] for j in range(folds) if j != k])
            model = fit_gbdt(x[train], y[train], params)
            scores.append(pr_auc(model.predict_proba(x[val]), y[val]))
        mean_score = float(np.mean(scores))
        if mean_score > best_score:
            best_params, best_score = params, mean_score
    return fit_gbdt(x, y, best_params)
