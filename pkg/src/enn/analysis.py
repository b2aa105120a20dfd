"""Structure analyses: sequential lesions, weight-distribution statistics and
firing-pattern matrices.

Layers are addressed by 0-based index or by role name ("subconcept",
"layer2", ...).  Neuron orderings come from the leaf order of a ward
linkage on the neurons' output vectors.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage

from .model import Network

COLLAPSE_THRESHOLD = 0.5
SPARSITY_RELATIVE = 0.01


def _net(model) -> Network:
    return getattr(model, "network", model)


def layer_position(net: Network, layer) -> int:
    if isinstance(layer, str):
        return net.layer_index(layer)
    k = int(layer)
    if not 0 <= k < len(net.layers):
        raise IndexError(f"network has {len(net.layers)} layers, no layer {k}")
    return k


def ward_order(vectors) -> np.ndarray:
    """Leaf order of a ward linkage on the rows (identity for < 2 rows)."""
    V = np.asarray(vectors, dtype=np.float64)
    if len(V) < 2:
        return np.arange(len(V))
    return leaves_list(linkage(V, method="ward"))


# -- lesions ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LesionCurve:
    order: np.ndarray
    accuracy: np.ndarray  # (width + 1, classes) per-class accuracy after k deletions
    overall: np.ndarray  # (width + 1,)

    def collapse_indices(self, threshold: float = COLLAPSE_THRESHOLD) -> np.ndarray:
        """Per class, the first deletion count with accuracy below the threshold
        (``width + 1`` when the class never collapses)."""
        below = self.accuracy < threshold
        return np.where(below.any(axis=0), below.argmax(axis=0), len(self.accuracy))

    def collapse_variance(self, threshold: float = COLLAPSE_THRESHOLD) -> float:
        return float(np.var(self.collapse_indices(threshold)))


def lesion(net: Network, layer: int, neurons) -> Network:
    """Zero the outgoing weights of ``neurons`` in ``layer``."""
    if layer >= len(net.layers) - 1:
        raise ValueError("output neurons have no outgoing weights")
    nxt = net.layers[layer + 1]
    W = np.array(nxt.weights)
    W[:, np.asarray(neurons, dtype=np.int64)] = 0.0
    return net.replace_layer(layer + 1, nxt.replace(weights=W))


def per_class_accuracy(pred, y, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    return np.array([np.mean(pred[y == c] == c) if (y == c).any() else np.nan for c in range(n_classes)])


def lesion_study(model, X, y, layer="subconcept", order=None) -> LesionCurve:
    """Delete the layer's neurons one at a time in ward leaf order of their
    outputs on ``X``, recording accuracy after every deletion."""
    net = _net(model)
    k = layer_position(net, layer)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    K = len(net.class_names)
    if order is None:
        order = ward_order(net.forward(X).activations[k].T)
    order = np.asarray(order, dtype=np.int64)
    acc, overall = [], []
    for n_del in range(len(order) + 1):
        pred = lesion(net, k, order[:n_del]).predict(X) if n_del else net.predict(X)
        acc.append(per_class_accuracy(pred, y, K))
        overall.append(np.mean(pred == y))
    return LesionCurve(order, np.array(acc), np.array(overall))


# -- weights ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightStats:
    counts: np.ndarray
    edges: np.ndarray
    excess_kurtosis: float  # nan when degenerate
    sparsity: float
    degenerate: bool


def excess_kurtosis(values) -> float:
    """Population fourth standardized moment minus 3; nan for constant data."""
    v = np.asarray(values, dtype=np.float64).ravel()
    d = v - v.mean()
    m2 = np.mean(d ** 2)
    if m2 <= np.finfo(float).tiny * 16 or m2 <= 1e-24 * max(1.0, float(np.mean(v ** 2))):
        return float("nan")
    return float(np.mean(d ** 4) / m2 ** 2 - 3.0)


def layer_weight_stats(weights, bins: int = 50) -> WeightStats:
    w = np.asarray(weights, dtype=np.float64).ravel()
    counts, edges = np.histogram(w, bins=bins)
    kurt = excess_kurtosis(w)
    top = np.max(np.abs(w)) if w.size else 0.0
    sparsity = float(np.mean(np.abs(w) < SPARSITY_RELATIVE * top)) if top > 0 else 1.0
    return WeightStats(counts, edges, kurt, sparsity, bool(np.isnan(kurt)))


def weight_stats(model, bins: int = 50) -> list[WeightStats]:
    return [layer_weight_stats(layer.weights, bins) for layer in _net(model).layers]


# -- firing patterns ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiringMatrix:
    matrix: np.ndarray  # (neurons, stimuli), neurons grouped by layer
    order: np.ndarray  # original neuron index of every row
    layer_of_row: np.ndarray
    stimuli: np.ndarray  # indices into the stimulus pool
    sparseness: np.ndarray  # per layer: mean fraction of neurons above 0.5


def population_sparseness(activations) -> float:
    """Mean over stimuli of the fraction of neurons with output above 0.5."""
    return float(np.mean(np.asarray(activations) > 0.5))


def firing_matrix(model, X, n_stimuli: int = 350, seed: int = 0) -> FiringMatrix:
    """Every neuron's output on ``n_stimuli`` random rows of ``X``; within
    each layer, neurons are ordered by ward leaf order of their outputs."""
    net = _net(model)
    X = np.asarray(X, dtype=np.float64)
    stim = np.sort(np.random.default_rng(seed).choice(len(X), min(n_stimuli, len(X)), replace=False))
    acts = net.forward(X[stim]).activations
    rows, order, layer_of = [], [], []
    for k, a in enumerate(acts):
        o = ward_order(a.T)
        rows.append(a.T[o])
        order.append(o)
        layer_of.append(np.full(len(o), k))
    return FiringMatrix(np.vstack(rows), np.concatenate(order), np.concatenate(layer_of), stim,
                        np.array([population_sparseness(a) for a in acts]))


# -- output -----------------------------------------------------------------

def write_matrix_csv(path, matrix, header=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in np.atleast_2d(matrix):
            w.writerow([repr(float(v)) for v in row])
    return path


def write_pgm(path, matrix, scale: int = 1) -> Path:
    """Binary grayscale image of a [0, 1] matrix (1 = white)."""
    m = np.clip(np.nan_to_num(np.asarray(matrix, dtype=np.float64)), 0.0, 1.0)
    img = np.round(m * 255).astype(np.uint8)
    if scale > 1:
        img = np.kron(img, np.ones((scale, scale), dtype=np.uint8))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + img.tobytes())
    return path
