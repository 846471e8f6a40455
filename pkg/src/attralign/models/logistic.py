"""L2-penalized logistic regression fit by full-batch Newton descent.

Features are standardized internally for conditioning; the stored
coefficients are mapped back to the original input scale so that the linear
predictor is exactly ``intercept + coef . x`` and per-feature products are
meaningful attributions. The penalty applies to coefficients only, never the
intercept, and is expressed on the standardized scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, DimensionError
from .metrics import pr_auc

GRAD_TOL = 1e-8
MAX_ITER = 10_000


@dataclass
class LogisticModel:
    intercept: float
    coef: np.ndarray  # (m_enc,), original input scale
    lambda_: float
    mean: np.ndarray  # standardization constants used at fit time
    scale: np.ndarray

    def raw_score(self, x) -> np.ndarray | float:
        """Linear predictor (log-odds): intercept + coef . x."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.coef.size:
            raise DimensionError(
                f"row has {x.shape[-1]} columns, model expects {self.coef.size}"
            )
        out = self.intercept + x @ self.coef
        return float(out) if x.ndim == 1 else out

    def predict_proba(self, x) -> np.ndarray | float:
        return _sigmoid(self.raw_score(x))


def _sigmoid(z):
    # |z| capped at 36: the largest margin where float64 still resolves the
    # output away from exactly 0 or 1, keeping probabilities strictly inside
    return 1.0 / (1.0 + np.exp(-np.clip(z, -36.0, 36.0)))


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    lambda_: float,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> LogisticModel:
    """Fit for a fixed penalty; raises ConvergenceError if the budget runs out.

    Minimizes (sum NLL + lambda/2 ||beta||^2) / n; the 1/n leaves the optimum
    untouched but makes the gradient-norm stop independent of sample size.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.shape
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0.0] = 1.0
    xs = (x - mean) / scale
    a = np.column_stack([np.ones(n), xs])
    penalty = np.concatenate([[0.0], np.full(m, lambda_)]) / n

    w = np.zeros(m + 1)
    nll = _objective(a, y, w, penalty)
    converged = False
    grad_norm = np.inf
    for _ in range(max_iter):
        eta = a @ w
        p = _sigmoid(eta)
        grad = a.T @ (p - y) / n + penalty * w
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            converged = True
            break
        q = np.clip(p * (1.0 - p), 1e-12, None)
        hess = (a.T * q) @ a / n + np.diag(penalty)
        step = np.linalg.solve(hess, grad)
        # backtracking keeps Newton monotone far from the optimum
        t = 1.0
        for _ in range(60):
            w_new = w - t * step
            nll_new = _objective(a, y, w_new, penalty)
            if nll_new <= nll:
                break
            t *= 0.5
        w = w - t * step
        nll = _objective(a, y, w, penalty)
    if not converged:
        raise ConvergenceError(
            f"Newton did not reach gradient norm {tol} in {max_iter} iterations "
            f"(final norm {grad_norm:.3e})",
            gradient_norm=grad_norm,
        )

    b0, beta = w[0], w[1:]
    coef = beta / scale
    intercept = float(b0 - np.sum(beta * mean / scale))
    return LogisticModel(
        intercept=intercept, coef=coef, lambda_=lambda_, mean=mean, scale=scale
    )


def _objective(a, y, w, penalty) -> float:
    eta = a @ w
    n = y.size
    return float(
        np.sum(np.logaddexp(0.0, eta) - y * eta) / n + 0.5 * np.sum(penalty * w * w)
    )


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic fold assignment preserving class proportions within 1 row."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.size, dtype=np.int64)
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        assignment[idx] = np.arange(idx.size) % folds
    return [np.flatnonzero(assignment == k) for k in range(folds)]


def train_logistic(
    x: np.ndarray,
    y: np.ndarray,
    lambda_grid: list[float],
    folds: int = 5,
    seed: int = 0,
) -> LogisticModel:
    """Select the L2 penalty by mean cross-validated PR-AUC, then refit.

    Ties on CV score break toward the larger penalty.
    """
    if not lambda_grid:
        raise ValueError("lambda grid is empty")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fold_idx = stratified_folds(y, folds, seed)

    best_lambda, best_score = None, -np.inf
    for lam in sorted(lambda_grid):
        scores = []
        for k in range(folds):
            val = fold_idx[k]
            train = np.concatenate([fold_idx[j] for j in range(folds) if j != k])
            model = fit_logistic(x[train], y[train], lam)
            scores.append(pr_auc(model.predict_proba(x[val]), y[val]))
        mean_score = float(np.mean(scores))
        if mean_score >= best_score:  # >= so ties prefer the larger lambda
            best_lambda, best_score = lam, mean_score
    return fit_logistic(x, y, best_lambda)
