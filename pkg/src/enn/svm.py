"""Soft-margin linear SVMs.

Solves ``min 1/2 ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))`` with an
unregularized bias.  The bias is recovered by proximal point rounds around a
bias-augmented dual that coordinate descent solves quickly; a final
active-set solve on the free support vectors removes the remaining solver
error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import Hyperplane

SUPPORT_TOL = 1e-6


@njit(cache=True, nogil=True)
def _dual_cd(X, y, qd, offset, B, C, alpha, w, wb, seed, tol, max_updates):
    # C holds one upper bound per sample
    """Coordinate descent with shrinking on the dual of the bias-augmented
    problem ``f(x) = w . x + offset + B * wb`` regularized by
    ``1/2 (|w|^2 + wb^2)``.

    ``w`` is updated in place and must equal ``X.T @ (alpha * y)`` on entry.
    Returns ``(updates, converged, wb)`` where ``updates`` counts coordinate visits.
    """
    n, d = X.shape
    np.random.seed(seed)
    index = np.arange(n)
    active = n
    bb = B * B
    pg_max_old = np.inf
    pg_min_old = -np.inf
    updates = 0
    while updates < max_updates:
        np.random.shuffle(index[:active])
        pg_max = -np.inf
        pg_min = np.inf
        s = 0
        while s < active:
            updates += 1
            i = index[s]
            f = offset + B * wb
            for j in range(d):
                f += w[j] * X[i, j]
            g = y[i] * f - 1.0
            a = alpha[i]
            pg = 0.0
            if a <= 0.0:
                if g > pg_max_old:
                    active -= 1
                    index[s], index[active] = index[active], index[s]
                    continue
                if g < 0.0:
                    pg = g
            elif a >= C[i]:
                if g < pg_min_old:
                    active -= 1
                    index[s], index[active] = index[active], index[s]
                    continue
                if g > 0.0:
                    pg = g
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0:
                new = min(max(a - g / (qd[i] + bb), 0.0), C[i])
                delta = (new - a) * y[i]
                if delta != 0.0:
                    for j in range(d):
                        w[j] += delta * X[i, j]
                    wb += delta * B
                    alpha[i] = new
            s += 1
        if pg_max - pg_min <= tol:
            if active == n:
                return updates, True, wb
            # verify on the full set before stopping
            active = n
            pg_max_old = np.inf
            pg_min_old = -np.inf
            continue
        pg_max_old = pg_max if pg_max > 0.0 else np.inf
        pg_min_old = pg_min if pg_min < 0.0 else -np.inf
    return updates, False, wb


@dataclass(frozen=True)
class SvmProblem:
    positives: np.ndarray
    negatives: np.ndarray
    cost: float = 1.0
    feature_mask: np.ndarray | None = None
    class_weight: str = "none"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positives, dtype=np.float64))
        neg = np.atleast_2d(np.asarray(self.negatives, dtype=np.float64))
        if pos.shape[0] == 0 or neg.shape[0] == 0:
            raise ValueError("both sides of an SVM need at least one sample")
        if pos.shape[1] != neg.shape[1]:
            raise ValueError(f"feature dimensions differ: {pos.shape[1]} vs {neg.shape[1]}")
        if not (np.isfinite(pos).all() and np.isfinite(neg).all()):
            raise ValueError("SVM features must be finite")
        if not self.cost > 0:
            raise ValueError(f"cost must be positive, got {self.cost}")
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)
        if self.feature_mask is not None:
            mask = np.asarray(self.feature_mask, dtype=bool)
            if mask.shape != (pos.shape[1],):
                raise ValueError("feature mask must have one entry per feature")
            object.__setattr__(self, "feature_mask", mask)
        if self.class_weight not in ("none", "balanced"):
            raise ValueError(f"class_weight must be 'none' or 'balanced', got {self.class_weight!r}")

    @property
    def n_features(self) -> int:
        return self.positives.shape[1]

    def sample_costs(self) -> np.ndarray:
        """Per-sample cost; "balanced" scales each side by n / (2 n_side)."""
        n_pos, n_neg = len(self.positives), len(self.negatives)
        if self.class_weight == "balanced":
            n = n_pos + n_neg
            return np.r_[np.full(n_pos, self.cost * n / (2 * n_pos)),
                         np.full(n_neg, self.cost * n / (2 * n_neg))]
        return np.full(n_pos + n_neg, float(self.cost))


@dataclass(frozen=True)
class SvmSolution:
    hyperplane: Hyperplane
    objective: float
    train_error: float
    converged: bool
    alpha: np.ndarray | None = None

    @property
    def w(self) -> np.ndarray:
        return self.hyperplane.w

    @property
    def b(self) -> float:
        return self.hyperplane.b

    @property
    def margin(self) -> float:
        return self.hyperplane.margin


def primal_objective(X, y, w, b, C) -> float:
    """``1/2 |w|^2 + sum_i C_i hinge_i``; ``C`` is a scalar or per-sample array."""
    f = y * (X @ w + b)
    return 0.5 * float(w @ w) + float(np.sum(C * np.maximum(0.0, 1.0 - f)))


def _polish(X, y, C, alpha, b, eps=1e-9):
    """Exact KKT solve with the current free/bounded partition; returns
    ``(alpha, w, b)`` or ``None`` when the partition is not consistent."""
    free = (alpha > eps * C) & (alpha < C * (1 - eps))
    if not free.any() or free.sum() > 1500:
        return None
    at_c = alpha >= C * (1 - eps)
    XF, yF = X[free], y[free]
    w_c = (C[at_c] * y[at_c]) @ X[at_c] if at_c.any() else np.zeros(X.shape[1])
    k = XF.shape[0]
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = XF @ XF.T
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    rhs = np.empty(k + 1)
    rhs[:k] = yF - XF @ w_c
    rhs[k] = -float((C[at_c] * y[at_c]).sum())
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    v, b_new = sol[:k], float(sol[k])
    a_free = yF * v
    if (a_free < -1e-9 * C[free]).any() or (a_free > C[free] * (1 + 1e-9)).any():
        return None
    new_alpha = np.where(at_c, C, 0.0)
    new_alpha[free] = np.clip(a_free, 0.0, C[free])
    w = (new_alpha * y) @ X
    f = y * (X @ w + b_new)
    slack = 1e-7 * max(1.0, float(np.abs(f).max()))
    zero = ~free & ~at_c
    if (f[zero] < 1 - slack).any() or (f[at_c] > 1 + slack).any():
        return None
    return new_alpha, w, b_new


def fit_linear_svm(X, y, C, seed: int = 0, tol: float = 1e-6,
                   max_updates: int | None = None, max_rounds: int = 500):
    """Low-level solver on a stacked problem with labels ``y`` in {-1, +1}.

    The unregularized bias is handled by proximal point iterations: each round
    solves the problem with a penalty ``(b - b_k)^2 / (2 B^2)`` around the
    current bias ``b_k`` and recenters.  The fixed point is the exact optimum.

    ``C`` is a scalar or one cost per sample.  Returns ``(w, b, alpha, converged)``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    C = np.broadcast_to(np.asarray(C, dtype=np.float64), (n,)).copy()
    if max_updates is None:
        max_updates = max(10 * n * d, 2000 * n)
    budget = max_updates
    qd = np.einsum("ij,ij->i", X, X)
    B = max(1.0, float(np.sqrt(qd.max())))
    alpha = np.zeros(n)
    w = np.zeros(d)
    b = 0.0
    converged = False
    for rnd in range(max_rounds):
        used, ok, wb = _dual_cd(X, y, qd, b, B, C, alpha, w, B * float(alpha @ y),
                                  seed + rnd, tol, budget)
        budget -= used
        step = B * wb
        b += step
        if ok and abs(step) <= 0.1 * tol * max(1.0, abs(b)):
            converged = True
            break
        if budget <= 0:
            break
    polished = _polish(X, y, C, alpha, b)
    if polished is not None:
        p_alpha, p_w, p_b = polished
        if primal_objective(X, y, p_w, p_b, C) <= primal_objective(X, y, w, b, C) + 1e-12 * max(1.0, C.max()):
            return p_w, p_b, p_alpha, True
    return w.copy(), float(b), alpha.copy(), converged


def _solution(X, y, C, w, b, alpha, converged, mask, n_features) -> SvmSolution:
    f = y * (X @ w + b)
    support = np.flatnonzero(f <= 1.0 + SUPPORT_TOL)
    full_w = np.zeros(n_features)
    full_w[mask] = w
    norm = float(np.linalg.norm(w))
    margin = 1.0 / norm if norm > 0 else math.inf
    return SvmSolution(
        Hyperplane(full_w, b, margin, tuple(support.tolist())),
        primal_objective(X, y, w, b, C),
        float(np.mean(f <= 0.0)),
        bool(converged),
        alpha,
    )


def train_svm(problem: SvmProblem, seed: int = 0, tol: float = 1e-6,
              max_updates: int | None = None) -> SvmSolution:
    """Train on ``problem``; positives map to the positive side of the hyperplane.

    Support indices refer to rows of ``vstack([positives, negatives])``.
    Masked features get weight exactly 0.
    """
    X = np.vstack([problem.positives, problem.negatives])
    y = np.concatenate([np.ones(len(problem.positives)), -np.ones(len(problem.negatives))])
    mask = problem.feature_mask if problem.feature_mask is not None else np.ones(problem.n_features, bool)
    Xa = X[:, mask]
    costs = problem.sample_costs()
    w, b, alpha, ok = fit_linear_svm(Xa, y, costs, seed, tol, max_updates)
    return _solution(Xa, y, costs, w, b, alpha, ok, mask, problem.n_features)


def scale(solution: SvmSolution | Hyperplane, multiplier: float) -> Hyperplane:
    """Steepen a hyperplane: ``(m w, m b)`` with the recorded margin kept."""
    h = solution.hyperplane if isinstance(solution, SvmSolution) else solution
    return h.scaled(multiplier)


def one_vs_all(sets, target: int, cost: float = 1.0, seed: int = 0, **kw) -> SvmSolution:
    """Separate ``sets[target]`` from the union of all the other sets."""
    if len(sets) < 2:
        raise ValueError("one-vs-all needs at least two sets")
    if not 0 <= target < len(sets):
        raise IndexError(f"target {target} out of range for {len(sets)} sets")
    others = [np.atleast_2d(s) for k, s in enumerate(sets) if k != target]
    return train_svm(SvmProblem(sets[target], np.vstack(others), cost), seed, **kw)
