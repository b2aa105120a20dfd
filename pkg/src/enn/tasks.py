"""Sequential tasks (TSP, BDT), greedy references and decision oracles.

A *policy* is any callable ``policy(x, mask) -> int`` where ``mask`` marks
the admissible outputs with True.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datasets import (N_BDT_FEATURES, TABLE_SIZE, TspInstance, encode_tsp,
                       truth_table_inputs)
from .model import Network, classify

Policy = Callable[[np.ndarray, np.ndarray], int]


def network_policy(net: Network) -> Policy:
    return lambda x, mask: classify(net, x, mask)[0]


# -- TSP ---------------------------------------------------------------------

@dataclass(frozen=True)
class Route:
    order: tuple
    length: float

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"route {self.order} does not visit every city exactly once")


def route_length(coords, order) -> float:
    pts = np.asarray(coords)[list(order) + [order[0]]]
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def nearest_neighbor_route(instance: TspInstance) -> Route:
    D = instance.distances
    n = len(D)
    visited = np.zeros(n, dtype=bool)
    order = [instance.current]
    visited[instance.current] = True
    while len(order) < n:
        d = np.where(visited, np.inf, D[order[-1]])
        nxt = int(np.argmin(d))  # first minimum: lowest index on ties
        order.append(nxt)
        visited[nxt] = True
    return Route(tuple(order), route_length(instance.coords, order))


def rollout_tsp(policy: Policy, instance: TspInstance, trace: list | None = None) -> Route:
    """Ask the policy for the next city until every city is visited."""
    D = instance.distances
    n = len(D)
    visited = np.zeros(n, dtype=bool)
    current = instance.current
    visited[current] = True
    order = [current]
    while len(order) < n:
        gone = visited.copy()
        gone[current] = False
        x = encode_tsp(D, current, gone)
        nxt = int(policy(x, ~visited))
        if visited[nxt]:
            raise RuntimeError(f"policy chose visited city {nxt}")
        if trace is not None:
            trace.append((x, current, ~visited))
        order.append(nxt)
        visited[nxt] = True
        current = nxt
    return Route(tuple(order), route_length(instance.coords, order))


def threshold_search(S: np.ndarray, start: float, eligible=None) -> tuple[int, ...]:
    """Integer threshold search over scores.

    Raise the threshold while several entries exceed it, lower it while none
    do, and stop at a single survivor or when a lowering step still leaves
    several.  Returns the row-major index (as a tuple) of the first survivor.
    """
    S = np.asarray(S, dtype=np.float64)
    if eligible is not None:
        S = np.where(eligible, S, -np.inf)
    if not np.isfinite(S).any():
        raise ValueError("no eligible entries")
    level = float(start)
    last_change = 0
    while True:
        concepts = np.argwhere(S > level)
        if len(concepts) == 1:
            break
        if len(concepts) == 0:
            level -= 1
            last_change = -1
        else:
            if last_change < 0:
                break
            level += 1
            last_change = 1
    return tuple(int(v) for v in concepts[0])


def tsp_scores(M, c: int) -> np.ndarray:
    """Transition scores: a current-city marker plus the number of pairwise
    distance comparisons the destination wins."""
    M = np.asarray(M, dtype=np.float64)
    n = len(M)
    S = np.zeros((n, n))
    for c1 in range(n):
        for c2 in range(n):
            if c1 == c2:
                continue
            marker = 1.0 if c1 == c else (0.0 if c2 == c else 0.5)
            others = [c3 for c3 in range(n) if c3 not in (c1, c2)]
            S[c1, c2] = marker + np.sign(M[c1, others] - M[c1, c2]).sum()
    return S


def oracle_tsp_step(M, c: int, literal: bool = False) -> int:
    """Next city from the distance matrix ``M`` (visited cities at 10).

    By default only transitions leaving the current city compete; with
    ``literal=True`` every transition competes, which lets a half-point
    score from another city win the search.
    """
    S = tsp_scores(M, c)
    eligible = np.zeros_like(S, dtype=bool)
    if literal:
        eligible[:] = ~np.eye(len(S), dtype=bool)
    else:
        eligible[c] = True
        eligible[c, c] = False
    return threshold_search(S, 0, eligible)[1]


# -- BDT ---------------------------------------------------------------------

def _leaf(node) -> bool:
    return not isinstance(node, tuple)


@dataclass(frozen=True)
class Bdt:
    """Tree as nested tuples: a leaf label, or ``(feature, child0, child1)``."""
    root: object

    def depths(self) -> np.ndarray:
        T = truth_table_inputs()
        out = np.zeros(TABLE_SIZE, dtype=np.int64)

        def walk(node, rows, depth):
            if _leaf(node):
                out[rows] = depth
                return
            f, lo, hi = node
            walk(lo, rows[T[rows, f] == 0], depth + 1)
            walk(hi, rows[T[rows, f] == 1], depth + 1)

        walk(self.root, np.arange(TABLE_SIZE), 0)
        return out

    @property
    def avg_depth(self) -> float:
        return float(self.depths().mean())

    def predict(self) -> np.ndarray:
        from .datasets import tree_labels
        return tree_labels(self.root)

    def n_nodes(self) -> int:
        def count(node):
            return 1 if _leaf(node) else 1 + count(node[1]) + count(node[2])
        return count(self.root)


def reform_table(labels, path: dict) -> np.ndarray:
    """Copy the side of the table selected by ``path`` (feature -> value)
    onto the other side(s), so the split features become irrelevant."""
    t = np.arange(TABLE_SIZE)
    for f, v in path.items():
        t = (t & ~(1 << f)) | (v << f)
    return np.asarray(labels)[t]


def _build(labels, choose, path: dict):
    table = reform_table(labels, path)
    if (table == table[0]).all():
        return int(table[0])
    f = int(choose(table, path))
    if f in path:
        raise RuntimeError(f"feature {f} chosen twice on one path")
    return (f, _build(labels, choose, {**path, f: 0}), _build(labels, choose, {**path, f: 1}))


def rollout_bdt(policy: Policy, labels) -> Bdt:
    """Grow a tree by asking the policy for split features on reformed
    tables; already-split features are masked."""
    labels = np.asarray(getattr(labels, "labels", labels))

    def choose(table, path):
        mask = np.ones(N_BDT_FEATURES, dtype=bool)
        mask[list(path)] = False
        return policy(table.astype(np.float64), mask)

    return Bdt(_build(labels, choose, {}))


def gini_gains(table, path: dict) -> np.ndarray:
    """Gini impurity decrease of every feature on the node given by ``path``.
    Split features get -inf."""
    T = truth_table_inputs()
    rows = np.ones(TABLE_SIZE, dtype=bool)
    for f, v in path.items():
        rows &= T[:, f] == v
    y = np.asarray(table)[rows]
    X = T[rows]
    n = len(y)

    def impurity(part):
        if len(part) == 0:
            return 0.0
        p = part.mean()
        return 1.0 - p * p - (1 - p) * (1 - p)

    parent = impurity(y)
    gains = np.full(N_BDT_FEATURES, -np.inf)
    for f in range(N_BDT_FEATURES):
        if f in path:
            continue
        lo, hi = y[X[:, f] == 0], y[X[:, f] == 1]
        gains[f] = parent - (len(lo) * impurity(lo) + len(hi) * impurity(hi)) / n
    return gains


def cart_build(labels) -> Bdt:
    """Greedy Gini splitting grown until pure; ties go to the lowest feature.

    Node row sets are subcubes, so both children always have the same size
    and the gains are exact binary fractions: equal gains compare equal.
    """
    labels = np.asarray(getattr(labels, "labels", labels))

    def choose(table, path):
        return int(np.argmax(gini_gains(labels, path)))

    return Bdt(_build(labels, choose, {}))


def bdt_win_scores(T, L) -> np.ndarray:
    """``S[f, v]``: signed comparisons won by the count of True labels on
    side ``v`` of feature ``f`` against the sides of every feature."""
    T = np.asarray(T, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    sides = (1.0 - T, T)
    # fc[v1][v2][f1, f2] = True labels with feature f1 = v1 and f2 = v2
    fc = [[(sides[v1] * L[:, None]).T @ sides[v2] for v2 in (0, 1)] for v1 in (0, 1)]
    d11 = np.sign(fc[1][0] - fc[0][1])
    d10 = np.sign(fc[1][1] - fc[0][0])
    d01 = np.sign(fc[0][0] - fc[1][1])
    d00 = np.sign(fc[0][1] - fc[1][0])
    return np.stack([(d00 + d01).sum(axis=1), (d10 + d11).sum(axis=1)], axis=1)


def oracle_bdt_step(T, L, mask=None) -> int:
    """Split feature chosen by the win-count search (``mask`` True = allowed)."""
    S = bdt_win_scores(T, L)
    eligible = None
    if mask is not None:
        eligible = np.repeat(np.asarray(mask, dtype=bool)[:, None], 2, axis=1)
    return threshold_search(S, S.shape[0], eligible)[0]


def oracle_bdt_policy(x, mask) -> int:
    return oracle_bdt_step(truth_table_inputs(), np.asarray(x), mask)


# -- orientation -------------------------------------------------------------

def orientation_differentiae(image) -> np.ndarray:
    """``D[r, c] = sign(row r white count - column c white count)``."""
    img = np.asarray(image).reshape(28, 28) if np.asarray(image).ndim == 1 else np.asarray(image)
    return np.sign(img.sum(axis=1)[:, None] - img.sum(axis=0)[None, :])


def calibrate_orientation_threshold(train_images, train_labels) -> float:
    """Presence threshold halfway between the weakest row score of a row
    stripe's own row and the strongest row score seen on column stripes."""
    pos, neg = [], []
    for img, label in zip(train_images, train_labels):
        D = orientation_differentiae(img)
        rows = D.sum(axis=1)
        if label == 0:
            r = int(np.argmax(np.asarray(img).reshape(28, 28).sum(axis=1)))
            pos.append(rows[r])
        else:
            neg.append(rows.max())
    return (min(pos) + max(neg)) / 2.0


def oracle_orientation(image, threshold: float) -> int:
    """0 (horizontal) if more rows than columns are present, else 1."""
    D = orientation_differentiae(image)
    rows = np.sign(D.sum(axis=1) - threshold)
    cols = np.sign((-D).sum(axis=0) - threshold)
    return 0 if rows.sum() > cols.sum() else 1
