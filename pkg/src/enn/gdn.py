"""Gradient-descent-trained networks (GDNs) with the same layer widths as an
ENN: sigmoid hidden layers, softmax (or sigmoid) outputs, categorical
cross-entropy and Adam.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SIGMOID, SOFTMAX, SYMBOLIC, Layer, Network, sigmoid
from .train import TrainingError


@dataclass(frozen=True)
class AdamConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class GdnConfig:
    hidden_widths: tuple = (4, 4)
    batch_size: int = 32
    epochs: int = 100
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    output_activation: str = SOFTMAX
    cv_folds: int = 10

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if isinstance(self.adam, dict):
            object.__setattr__(self, "adam", AdamConfig(**self.adam))
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("layer widths must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.output_activation not in (SOFTMAX, SIGMOID):
            raise ValueError("output activation must be softmax or sigmoid")


class Adam:
    """Adam with bias-corrected moments over a list of arrays."""

    def __init__(self, params, cfg: AdamConfig = AdamConfig()):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = c.beta1 * self.m[i] + (1 - c.beta1) * g
            self.v[i] = c.beta2 * self.v[i] + (1 - c.beta2) * g * g
            m_hat = self.m[i] / (1 - c.beta1 ** self.t)
            v_hat = self.v[i] / (1 - c.beta2 ** self.t)
            out.append(p - c.alpha * m_hat / (np.sqrt(v_hat) + c.eps))
        return out


def glorot_uniform(n_in: int, n_out: int, rng) -> np.ndarray:
    limit = math.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def random_params(widths, rng) -> list:
    """Flat list ``[W1, b1, W2, b2, ...]`` for consecutive ``widths``."""
    params = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        params += [glorot_uniform(n_in, n_out, rng), np.zeros(n_out)]
    return params


def params_of(net: Network) -> list:
    out = []
    for layer in net.layers:
        out += [np.array(layer.weights), np.array(layer.biases)]
    return out


def network_of(params, output_activation: str, class_names, roles=None) -> Network:
    n = len(params) // 2
    layers = tuple(Layer(params[2 * i], params[2 * i + 1], SIGMOID if i < n - 1 else output_activation)
                   for i in range(n))
    return Network(layers, tuple(class_names), roles or {})


def loss_and_grads(params, X, y, want_input: bool = False):
    """Mean softmax cross-entropy of the logits and its gradients.

    Hidden layers are sigmoid; the loss always uses softmax of the last
    pre-activation.  Returns ``(loss, grads)`` or ``(loss, grads, dX)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    n_layers = len(params) // 2
    acts = [X]
    for i in range(n_layers - 1):
        acts.append(sigmoid(acts[-1] @ params[2 * i].T + params[2 * i + 1]))
    logits = acts[-1] @ params[-2].T + params[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -float(logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    for i in range(n_layers - 1, -1, -1):
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        back = delta @ params[2 * i]
        if i > 0:
            delta = back * acts[i] * (1.0 - acts[i])
    if want_input:
        return loss, grads, back
    return loss, grads


def network_input_gradient(net: Network, x, label: int) -> np.ndarray:
    """Gradient of the cross-entropy with respect to the input of ``net``.

    Every hidden layer is treated as sigmoid; symbolic layers have no
    gradient and are rejected.
    """
    if any(layer.activation == SYMBOLIC for layer in net.layers):
        raise ValueError("symbolic networks are not differentiable")
    _, _, dx = loss_and_grads(params_of(net), np.atleast_2d(x), np.array([label]), want_input=True)
    return dx[0]


def train_gdn(X, y, cfg: GdnConfig = GdnConfig(), class_names=None, init: Network | None = None,
              n_classes: int | None = None, checkpoints=(), validation=None):
    """Backprop with Adam.  Returns ``(network, history)``.

    ``init`` seeds the weights (e.g. from :func:`seed_with_noise`).
    ``checkpoints`` lists epochs at which ``validation=(Xv, yv)`` accuracy
    is recorded into ``history["checkpoints"]``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    names = tuple(class_names) if class_names is not None else tuple(str(c) for c in range(K))
    rng = np.random.default_rng(cfg.seed)
    if init is not None:
        params = params_of(init)
        widths = [params[0].shape[1]] + [p.shape[0] for p in params[1::2]]
        if widths[0] != X.shape[1] or widths[-1] != K:
            raise ValueError(f"seed network widths {widths} do not fit the data")
    else:
        params = random_params([X.shape[1], *cfg.hidden_widths, K], rng)
    adam = Adam(params, cfg.adam)
    history = {"loss": [], "checkpoints": {}}
    wanted = set(int(e) for e in checkpoints)

    def record(epoch):
        if epoch in wanted and validation is not None:
            net = network_of(params, cfg.output_activation, names)
            history["checkpoints"][epoch] = 1.0 - net.error_rate(*validation)

    record(0)
    n = len(y)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for k, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(params, X[batch], y[batch])
            if not math.isfinite(loss):
                raise TrainingError("gdn", f"loss is {loss} at epoch {epoch} batch {k}")
            params = adam.step(params, grads)
            total += loss * len(batch)
        history["loss"].append(total / n)
        record(epoch + 1)
    roles = {i: f"layer{i + 1}" for i in range(len(params) // 2)}
    return network_of(params, cfg.output_activation, names, roles), history


def seed_with_noise(model, noise_fraction: float, seed: int = 0, output_activation: str = SOFTMAX) -> Network:
    """Copy of the network with N(0, (fraction x mean|W|)^2) noise added to
    every weight and bias, layer by layer; hidden layers become sigmoid."""
    if noise_fraction < 0:
        raise ValueError("noise_fraction must be nonnegative")
    net = getattr(model, "network", model)
    rng = np.random.default_rng(seed)
    layers = []
    for i, layer in enumerate(net.layers):
        std = noise_fraction * float(np.mean(np.abs(layer.weights)))
        W = layer.weights + rng.normal(0.0, 1.0, layer.weights.shape) * std
        b = layer.biases + rng.normal(0.0, 1.0, layer.biases.shape) * std
        act = output_activation if i == len(net.layers) - 1 else SIGMOID
        layers.append(Layer(W, b, act))
    return Network(tuple(layers), net.class_names, net.roles)


def cross_validate(X, y, cfg: GdnConfig, grid: dict, folds: int | None = None, seed: int = 0):
    """Pick ``(batch_size, epochs)`` by stratified k-fold validation accuracy.

    Each batch size is trained once per fold up to the largest epoch count;
    accuracy is read at every requested epoch.  Ties go to fewer epochs,
    then to the smaller batch.  Returns ``(best, table)`` where ``table``
    maps ``(batch_size, epochs)`` to mean accuracy.
    """
    from .datasets import stratified_folds

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    batches = sorted(set(int(b) for b in grid.get("batch_size", [cfg.batch_size])))
    epochs = sorted(set(int(e) for e in grid.get("epochs", [cfg.epochs])))
    if not batches or not epochs:
        raise ValueError("empty grid")
    k = folds or cfg.cv_folds
    K = int(y.max() + 1)
    counts = np.bincount(y, minlength=K)
    if counts.min() < k:
        raise ValueError(f"class with {counts.min()} samples cannot be stratified into {k} folds")
    fold = stratified_folds(y, k, seed)
    acc = {(b, e): [] for b in batches for e in epochs}
    for b in batches:
        for f in range(k):
            tr, va = fold != f, fold == f
            run = GdnConfig(cfg.hidden_widths, b, max(epochs), cfg.adam, cfg.seed + f, cfg.output_activation, k)
            _, hist = train_gdn(X[tr], y[tr], run, n_classes=K, checkpoints=epochs, validation=(X[va], y[va]))
            for e in epochs:
                acc[(b, e)].append(hist["checkpoints"][e])
    table = {key: float(np.mean(v)) for key, v in acc.items()}
    best = None
    for e in epochs:
        for b in batches:
            if best is None or table[(b, e)] > table[best]:
                best = (b, e)
    return best, table
