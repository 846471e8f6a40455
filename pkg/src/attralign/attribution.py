"""Model-grounded per-instance attributions on the margin (log-odds) scale.

Two routes produce the same additive decomposition contract:

* ``linear_contributions`` - exact per-feature products for the logistic
  model (coefficient times input value).
* ``tree_shap`` - exact path-dependent TreeSHAP for the boosted forest. The
  underlying cooperative game fixes features in a coalition at their observed
  values and integrates the rest out by descending both branches weighted by
  cover ratios. ``brute_force_shapley`` evaluates the identical game by
  exhaustive subset enumeration and exists to cross-check ``tree_shap``.

Attributions are then summed over each original feature's encoded columns
and ordered by absolute magnitude to form a ranked explanation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidForestError
from .models.gbdt import GbdtModel, Tree
from .models.logistic import LogisticModel

BRUTE_FORCE_MAX_FEATURES = 16


@dataclass
class AttributionVector:
    values: np.ndarray  # (m_enc,) signed contributions
    baseline: float  # phi_0
    model_output: float  # margin the decomposition reconstructs

    def additivity_gap(self) -> float:
        return abs(self.baseline + float(self.values.sum()) - self.model_output)


@dataclass(frozen=True)
class RankedExplanation:
    """Original-feature ranking, |value| descending, exact ties by name."""

    entries: list[tuple[str, float]]
    tie_rule: str = "abs_desc_then_lexicographic"

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.names[:k]


def linear_contributions(model: LogisticModel, x) -> AttributionVector:
    """phi_j = coef_j * x_j on the original input scale; phi_0 = intercept."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.coef.size:
        raise DimensionError(f"expected a row of length {model.coef.size}")
    values = model.coef * x
    return AttributionVector(
        values=values,
        baseline=model.intercept,
        model_output=model.raw_score(x),
    )


def _check_forest(model: GbdtModel) -> None:
    for t, tree in enumerate(model.trees):
        if np.any(tree.cover <= 0):
            raise InvalidForestError(f"tree {t} has non-positive cover")


def _tree_expectation(tree: Tree) -> float:
    """Cover-weighted expectation of the tree output."""
    feature, left, right = tree.feature, tree.left, tree.right
    value, cover = tree.value, tree.cover

    def rec(node: int, weight: float) -> float:
        if feature[node] < 0:
            return weight * value[node]
        c = cover[node]
        return rec(left[node], weight * cover[left[node]] / c) + rec(
            right[node], weight * cover[right[node]] / c
        )

    return rec(0, 1.0)


def tree_shap(model: GbdtModel, x) -> AttributionVector:
    """Exact path-dependent TreeSHAP for the whole forest.

    Per-tree Shapley values of the cover-weighted conditional-expectation
    game, summed over trees; computed on the margin scale where the additive
    decomposition is exact.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.n_features:
        raise DimensionError(f"expected a row of length {model.n_features}")
    _check_forest(model)
    phi = np.zeros(x.size)
    baseline = model.base_score
    for tree in model.trees:
        _shap_one_tree(tree, x, phi)
        baseline += _tree_expectation(tree)
    return AttributionVector(
        values=phi, baseline=baseline, model_output=model.raw_score(x)
    )


def _shap_one_tree(tree: Tree, x: np.ndarray, phi: np.ndarray) -> None:
    """Accumulate one tree's Shapley values into ``phi``.

    The recursion keeps one path entry per unique feature. Entry i carries
    the proportion of coalition-excluded paths (z), of coalition-included
    paths (o), and a permutation weight (w). Re-encountering a feature
    unwinds its earlier entry before re-extending, which is what makes the
    method exact on trees that split on a feature more than once per path.
    """
    feature = tree.feature.tolist()
    threshold = tree.threshold.tolist()
    left = tree.left.tolist()
    right = tree.right.tolist()
    value = tree.value.tolist()
    cover = tree.cover.tolist()

    def extend(d, z, o, w, u, pz, po, pi):
        d[u], z[u], o[u] = pi, pz, po
        w[u] = 1.0 if u == 0 else 0.0
        for i in range(u - 1, -1, -1):
            w[i + 1] += po * w[i] * (i + 1) / (u + 1)
            w[i] = pz * w[i] * (u - i) / (u + 1)

    def unwind(d, z, o, w, u, idx):
        one, zero = o[idx], z[idx]
        if one != 0.0:
            nxt = w[u]
            for i in range(u - 1, -1, -1):
                tmp = w[i]
                w[i] = nxt * (u + 1) / ((i + 1) * one)
                nxt = tmp - w[i] * zero * (u - i) / (u + 1)
        else:
            for i in range(u - 1, -1, -1):
                w[i] = w[i] * (u + 1) / (zero * (u - i))
        for i in range(idx, u):
            d[i], z[i], o[i] = d[i + 1], z[i + 1], o[i + 1]

    def unwound_sum(z, o, w, u, idx):
        one, zero = o[idx], z[idx]
        total = 0.0
        if one != 0.0:
            nxt = w[u]
            for i in range(u - 1, -1, -1):
                tmp = nxt * (u + 1) / ((i + 1) * one)
                total += tmp
                nxt = w[i] - tmp * zero * (u - i) / (u + 1)
        else:
            for i in range(u - 1, -1, -1):
                total += w[i] * (u + 1) / (zero * (u - i))
        return total

    def recurse(node, u, pd, pz_list, po_list, pw, pz, po, pi):
        # copy the parent path and extend it with the incoming edge
        d = pd[:u] + [0]
        z = pz_list[:u] + [0.0]
        o = po_list[:u] + [0.0]
        w = pw[:u] + [0.0]
        extend(d, z, o, w, u, pz, po, pi)
        f = feature[node]
        if f < 0:
            v = value[node]
            for i in range(1, u + 1):
                phi[d[i]] += unwound_sum(z, o, w, u, i) * (o[i] - z[i]) * v
            return
        if x[f] <= threshold[node]:
            hot, cold = left[node], right[node]
        else:
            hot, cold = right[node], left[node]
        c = cover[node]
        hot_zero = cover[hot] / c
        cold_zero = cover[cold] / c
        iz = io = 1.0
        idx = -1
        for i in range(u + 1):
            if d[i] == f:
                idx = i
                break
        if idx >= 0:
            iz, io = z[idx], o[idx]
            unwind(d, z, o, w, u, idx)
            u -= 1
        recurse(hot, u + 1, d, z, o, w, hot_zero * iz, io, f)
        recurse(cold, u + 1, d, z, o, w, cold_zero * iz, 0.0, f)

    recurse(0, 0, [0], [0.0], [0.0], [0.0], 1.0, 1.0, -1)


def brute_force_shapley(model: GbdtModel, x) -> AttributionVector:
    """Exact Shapley values by enumerating all feature subsets.

    Evaluates the same cover-weighted conditional-expectation game as
    ``tree_shap`` and applies the factorial-weighted marginal-contribution
    formula directly. Test oracle only; needs m <= 16.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    if m > BRUTE_FORCE_MAX_FEATURES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_FEATURES} features")
    if x.ndim != 1 or m != model.n_features:
        raise DimensionError(f"expected a row of length {model.n_features}")
    _check_forest(model)

    n_masks = 1 << m
    masks = np.arange(n_masks, dtype=np.int64)
    v = np.full(n_masks, model.base_score)
    for tree in model.trees:
        v += _expvalue_all_masks(tree, x, masks)

    popcount = np.array([bin(i).count("1") for i in range(n_masks)])
    fact = [math.factorial(i) for i in range(m + 1)]
    weight_by_size = np.array(
        [fact[s] * fact[m - s - 1] / fact[m] for s in range(m)]
    )

    phi = np.zeros(m)
    for j in range(m):
        bit = 1 << j
        without = masks[(masks & bit) == 0]
        phi[j] = float(
            np.sum(weight_by_size[popcount[without]] * (v[without | bit] - v[without]))
        )
    return AttributionVector(
        values=phi, baseline=float(v[0]), model_output=model.raw_score(x)
    )


def _expvalue_all_masks(tree: Tree, x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """v(S) for every coalition bitmask at once, one tree."""
    out = np.zeros(masks.size)

    def rec(node: int, weight: np.ndarray) -> None:
        f = tree.feature[node]
        if f < 0:
            out_add = weight * tree.value[node]
            np.add(out, out_add, out=out)
            return
        in_coalition = (masks >> int(f)) & 1 == 1
        follows_left = x[f] <= tree.threshold[node]
        c = tree.cover[node]
        left, right = tree.left[node], tree.right[node]
        ratio_left = tree.cover[left] / c
        ratio_right = tree.cover[right] / c
        w_left = weight * np.where(in_coalition, 1.0 if follows_left else 0.0, ratio_left)
        w_right = weight * np.where(in_coalition, 0.0 if follows_left else 1.0, ratio_right)
        rec(left, w_left)
        rec(right, w_right)

    rec(0, np.ones(masks.size))
    return out


def group_attributions(attr: AttributionVector, group_index: dict[str, list[int]]) -> dict[str, float]:
    """Signed per-original-feature sums over each feature's encoded columns."""
    seen = sorted(c for cols in group_index.values() for c in cols)
    if seen != list(range(attr.values.size)):
        raise ValueError("group_index does not partition the encoded columns")
    return {
        name: float(np.sum(attr.values[cols]))
        for name, cols in group_index.items()
    }


def rank_features(grouped: dict[str, float]) -> RankedExplanation:
    """Order by |value| descending; exact ties break lexicographically."""
    entries = sorted(grouped.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    return RankedExplanation(entries=entries)
