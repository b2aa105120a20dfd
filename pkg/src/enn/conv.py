"""Convolutional front-end for ENNs.

Filters come from k-means clusters of image windows: one SVM per cluster
average against the other averages.  Feature maps are valid convolutions
(stride 1) followed by a sigmoid and non-overlapping 2x2 max pooling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .clustering import kmeans
from .model import Hyperplane, ModelFormatError, dumps_document, loads_document, sigmoid
from .svm import SvmProblem, train_svm
from .train import EnnHyperparams, EnnModel, task_seed, train_enn

MNIST_PADDED = 32


@dataclass(frozen=True, eq=False)
class ConvLayer:
    weights: np.ndarray  # (filters, channels, kh, kw), multiplier already applied
    biases: np.ndarray
    multiplier: float = 2.0

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]

    def hyperplanes(self) -> list[Hyperplane]:
        return [Hyperplane(w.ravel(), b) for w, b in zip(self.weights, self.biases)]


def as_maps(images, side: int | None = None) -> np.ndarray:
    """``(n, channels, h, w)`` view of flat or 2-D images."""
    a = np.asarray(images, dtype=np.float64)
    if a.ndim == 2:
        s = side or int(round(np.sqrt(a.shape[1])))
        return a.reshape(len(a), 1, s, s)
    if a.ndim == 3:
        return a[:, None]
    return a


def pad_to(maps, size: int = MNIST_PADDED) -> np.ndarray:
    maps = as_maps(maps)
    h, w = maps.shape[2:]
    top, left = (size - h) // 2, (size - w) // 2
    return np.pad(maps, ((0, 0), (0, 0), (top, size - h - top), (left, size - w - left)))


def sample_windows(images, labels, per_class: int, kernel, seed: int = 0, return_positions: bool = False):
    """``per_class`` windows from every class: random image of the class,
    origin uniform over all valid positions.  Rows are flattened
    ``(channels, kh, kw)`` windows."""
    if per_class < 1:
        raise ValueError("per_class must be positive")
    maps = as_maps(images)
    labels = np.asarray(labels)
    kh, kw = kernel
    H, W = maps.shape[2:]
    if kh > H or kw > W:
        raise ValueError(f"kernel {kernel} larger than the {H}x{W} image")
    rng = np.random.default_rng(seed)
    windows, positions = [], []
    for c in np.unique(labels):
        rows = np.flatnonzero(labels == c)
        picks = rows[rng.integers(len(rows), size=per_class)]
        tops = rng.integers(0, H - kh + 1, size=per_class)
        lefts = rng.integers(0, W - kw + 1, size=per_class)
        for i, t, l in zip(picks, tops, lefts):
            windows.append(maps[i, :, t:t + kh, l:l + kw].ravel())
            positions.append((int(i), int(t), int(l)))
    out = np.array(windows)
    return (out, np.array(positions)) if return_positions else out


def learn_conv_filters(windows, k: int, cost: float = 1.0, multiplier: float = 2.0, seed: int = 0,
                       fit_on: str = "centroids") -> list[Hyperplane]:
    """k-means on windows, then a one-vs-all SVM per cluster.

    ``fit_on="centroids"`` fits each SVM on the cluster averages only;
    ``"members"`` uses the member windows instead.
    """
    W = np.asarray(windows, dtype=np.float64)
    if not 2 <= k <= len(W):
        raise ValueError(f"need 2 <= k <= {len(W)} windows, got k={k}")
    km = kmeans(W, k, seed)
    out = []
    for j in range(k):
        if fit_on == "centroids":
            pos, neg = km.centroids[j:j + 1], np.delete(km.centroids, j, axis=0)
        elif fit_on == "members":
            pos, neg = W[km.assignment == j], W[km.assignment != j]
        else:
            raise ValueError("fit_on must be 'centroids' or 'members'")
        sol = train_svm(SvmProblem(pos, neg, cost), task_seed(seed, 7, j))
        out.append(sol.hyperplane.scaled(multiplier))
    return out


def conv_layer(hyperplanes, channels: int, kernel, multiplier: float = 2.0) -> ConvLayer:
    kh, kw = kernel
    W = np.stack([h.w.reshape(channels, kh, kw) for h in hyperplanes])
    return ConvLayer(W, np.array([h.b for h in hyperplanes]), multiplier)


def convolve(maps, layer: ConvLayer) -> np.ndarray:
    """Valid, stride-1 pre-activations ``(n, filters, h', w')``."""
    maps = as_maps(maps)
    win = sliding_window_view(maps, layer.kernel, axis=(2, 3))  # n, c, h', w', kh, kw
    return np.einsum("ncijkl,fckl->nfij", win, layer.weights, optimize=True) + layer.biases[None, :, None, None]


def max_pool(maps, size: int = 2) -> np.ndarray:
    n, c, h, w = maps.shape
    if h % size or w % size:
        raise ValueError(f"{h}x{w} map cannot be pooled in non-overlapping {size}x{size} cells")
    return maps.reshape(n, c, h // size, size, w // size, size).max(axis=(3, 5))


def conv_maps(images, layers) -> list[np.ndarray]:
    """Pooled maps after each layer."""
    a = as_maps(images)
    out = []
    for layer in layers:
        a = max_pool(sigmoid(convolve(a, layer)))
        out.append(a)
    return out


def conv_forward(images, layers) -> np.ndarray:
    """Flattened pooled maps of the last layer, one row per image."""
    return conv_maps(images, layers)[-1].reshape(len(as_maps(images)), -1)


# -- visualisation -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilterVisualization:
    weights: np.ndarray
    positive: np.ndarray | None  # None flags an empty side
    negative: np.ndarray | None

    @property
    def positive_empty(self) -> bool:
        return self.positive is None

    @property
    def negative_empty(self) -> bool:
        return self.negative is None


def weighted_side_means(windows, outputs):
    """Means of windows above/below 0.5 output, weighted by |output - 0.5|."""
    windows = np.asarray(windows, dtype=np.float64)
    outputs = np.asarray(outputs, dtype=np.float64)
    weight = np.abs(outputs - 0.5)
    means = []
    for side in (outputs >= 0.5, outputs < 0.5):
        w = weight[side]
        if not side.any() or w.sum() == 0:
            means.append(None)
        else:
            means.append(np.tensordot(w, windows[side], axes=1) / w.sum())
    return tuple(means)


def visualize_filter(layers, layer_index: int, filter_index: int, images) -> FilterVisualization:
    """Weighted means of the input patches each filter responds to.

    For the first layer the patches are the kernel windows; deeper filters
    use their full receptive field in the original image.
    """
    images = as_maps(images)
    if layer_index == 0:
        pre = convolve(images, layers[0])[:, filter_index]
        field, stride = layers[0].kernel, 1
    else:
        maps = conv_maps(images, layers[:layer_index])[-1]
        pre = convolve(maps, layers[layer_index])[:, filter_index]
        field, stride = receptive_field(layers[:layer_index + 1])
    out = sigmoid(pre)
    n, h, w = out.shape
    patches = sliding_window_view(images, field, axis=(2, 3))[:, :, ::stride, ::stride][:, :, :h, :w]
    patches = patches.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, -1)
    pos, neg = weighted_side_means(patches, out.ravel())
    shape = (images.shape[1], *field)
    reshape = lambda m: None if m is None else m.reshape(shape)
    lay = layers[layer_index]
    return FilterVisualization(lay.weights[filter_index], reshape(pos), reshape(neg))


def receptive_field(layers) -> tuple[tuple[int, int], int]:
    """Input-image field and stride of a unit in the last layer's conv map."""
    size, jump = np.array([1, 1]), 1
    for i, layer in enumerate(layers):
        size = size + (np.array(layer.kernel) - 1) * jump
        if i < len(layers) - 1:
            size = size + jump  # 2x2 pooling
            jump *= 2
    return (int(size[0]), int(size[1])), jump


# -- convolutional ENN -------------------------------------------------------

@dataclass(frozen=True)
class ConvSpec:
    n_filters: int
    kernel: tuple = (5, 5)
    multiplier: float = 2.0
    windows_per_class: int = 100
    cost: float = 1.0
    fit_on: str = "centroids"


@dataclass(frozen=True, eq=False)
class CennModel:
    layers: tuple
    enn: EnnModel
    pad: int | None = MNIST_PADDED

    def features(self, X) -> np.ndarray:
        maps = pad_to(X, self.pad) if self.pad else as_maps(X)
        return conv_forward(maps, self.layers)

    def predict(self, X) -> np.ndarray:
        return self.enn.predict(self.features(X))

    def error_rate(self, X, y) -> float:
        return float(np.mean(self.predict(X) != np.asarray(y)))

    def to_bytes(self) -> bytes:
        doc = {
            "format": "cenn",
            "pad": self.pad,
            "conv_layers": [{"weights": l.weights.tolist(), "biases": l.biases.tolist(),
                             "multiplier": l.multiplier} for l in self.layers],
            "enn": loads_document(self.enn.to_bytes()),
        }
        return dumps_document(doc)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CennModel":
        doc = loads_document(data)
        if not isinstance(doc, dict) or doc.get("format") != "cenn":
            raise ModelFormatError("not a convolutional ENN document", "$.format")
        try:
            layers = tuple(ConvLayer(np.array(l["weights"], dtype=np.float64), np.array(l["biases"], dtype=np.float64),
                                     float(l["multiplier"])) for l in doc["conv_layers"])
            enn = EnnModel.from_bytes(dumps_document(doc["enn"]))
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"bad convolutional ENN document: {exc}", "$") from exc
        return cls(layers, enn, doc.get("pad"))


def train_cenn(X, y, specs, hp: EnnHyperparams, seed: int = 0, pad: int | None = MNIST_PADDED,
               jobs: int = 1) -> CennModel:
    """Learn conv filters layer by layer (later layers from pooled maps of
    the earlier ones), then an ENN on the flattened features."""
    y = np.asarray(y)
    maps = pad_to(X, pad) if pad else as_maps(X)
    layers = []
    for i, spec in enumerate(specs):
        win = sample_windows(maps, y, spec.windows_per_class, spec.kernel, task_seed(seed, 8, i))
        hyper = learn_conv_filters(win, spec.n_filters, spec.cost, spec.multiplier, task_seed(seed, 9, i), spec.fit_on)
        layer = conv_layer(hyper, maps.shape[1], spec.kernel, spec.multiplier)
        layers.append(layer)
        maps = max_pool(sigmoid(convolve(maps, layer)))
    feats = maps.reshape(len(maps), -1)
    return CennModel(tuple(layers), train_enn(feats, y, hp, seed, jobs=jobs), pad)
