"""Layered feed-forward networks with sigmoid, symbolic and softmax units.

A :class:`Network` is an immutable stack of dense :class:`Layer` objects.
Every neuron is a hyperplane ``w . x + b`` followed by the layer's
activation; the forward pass keeps every intermediate output so that
analyses can look inside the network.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import expit

SIGMOID = "sigmoid"
SYMBOLIC = "symbolic"
SOFTMAX = "softmax"
IDENTITY = "identity"
ACTIVATIONS = (SIGMOID, SYMBOLIC, SOFTMAX, IDENTITY)

SCHEMA_VERSION = 1
MODEL_FORMAT = "enn-model"

DEFAULT_SYMBOLIC_TOLERANCE = 1e-9


class ModelFormatError(ValueError):
    """Raised when a serialized model document cannot be read."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def sigmoid(x):
    """Logistic function. Saturates without overflow; NaN propagates."""
    return expit(x)


def symbolic_activation(z, tol: float = DEFAULT_SYMBOLIC_TOLERANCE):
    """Three-valued sign: 1 above ``tol``, 0 below ``-tol``, 0.5 in between."""
    if tol < 0:
        raise ValueError("symbolic tolerance must be nonnegative")
    z = np.asarray(z, dtype=np.float64)
    out = np.where(z > tol, 1.0, np.where(z < -tol, 0.0, 0.5))
    return out if out.ndim else float(out)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Hyperplane:
    """One neuron: weights, bias, the training-time geometric margin and
    the indices of the training samples that supported it.

    ``margin`` is ``1/||w||`` of the unscaled SVM solution; ``multiplier``
    records any steepness scaling already folded into ``w`` and ``b``.
    """

    w: np.ndarray
    b: float
    margin: float = float("nan")
    support_indices: tuple[int, ...] = ()
    multiplier: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(self.w, 1, "w"))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "support_indices", tuple(int(i) for i in self.support_indices))

    def value(self, x):
        return np.asarray(x, dtype=np.float64) @ self.w + self.b

    def scaled(self, multiplier: float) -> "Hyperplane":
        if not multiplier > 0:
            raise ValueError(f"multiplier must be positive, got {multiplier}")
        return Hyperplane(self.w * multiplier, self.b * multiplier, self.margin,
                          self.support_indices, self.multiplier * multiplier)


@dataclass(frozen=True, eq=False)
class Layer:
    """Dense layer stored as a ``(n_out, n_in)`` weight matrix."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str = SIGMOID
    symbolic_tolerance: float = DEFAULT_SYMBOLIC_TOLERANCE
    margins: np.ndarray | None = None
    support: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights, 2, "weights"))
        object.__setattr__(self, "biases", _frozen(self.biases, 1, "biases"))
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ValueError("weights and biases disagree on the number of neurons")
        if self.weights.shape[0] == 0:
            raise ValueError("a layer needs at least one neuron")
        if self.symbolic_tolerance < 0:
            raise ValueError("symbolic tolerance must be nonnegative")
        if self.margins is not None:
            m = _frozen(self.margins, 1, "margins")
            if m.shape[0] != self.n_out:
                raise ValueError("one margin per neuron required")
            object.__setattr__(self, "margins", m)
        if self.support is not None:
            sup = tuple(tuple(int(i) for i in s) for s in self.support)
            if len(sup) != self.n_out:
                raise ValueError("one support list per neuron required")
            object.__setattr__(self, "support", sup)

    @classmethod
    def from_hyperplanes(cls, hyperplanes: Sequence[Hyperplane], activation: str = SIGMOID,
                         symbolic_tolerance: float = DEFAULT_SYMBOLIC_TOLERANCE) -> "Layer":
        if not hyperplanes:
            raise ValueError("a layer needs at least one neuron")
        dims = {h.w.shape[0] for h in hyperplanes}
        if len(dims) != 1:
            raise ValueError(f"hyperplanes disagree on input dimension: {sorted(dims)}")
        return cls(np.stack([h.w for h in hyperplanes]),
                   np.array([h.b for h in hyperplanes]),
                   activation, symbolic_tolerance,
                   np.array([h.margin for h in hyperplanes]),
                   tuple(h.support_indices for h in hyperplanes))

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def hyperplanes(self) -> list[Hyperplane]:
        margins = self.margins if self.margins is not None else np.full(self.n_out, np.nan)
        support = self.support or ((),) * self.n_out
        return [Hyperplane(self.weights[i], self.biases[i], margins[i], support[i])
                for i in range(self.n_out)]

    def pre_activation(self, a: np.ndarray) -> np.ndarray:
        return a @ self.weights.T + self.biases

    def activate(self, z: np.ndarray) -> np.ndarray:
        if self.activation == SIGMOID:
            return sigmoid(z)
        if self.activation == SYMBOLIC:
            return symbolic_activation(z, self.symbolic_tolerance)
        if self.activation == SOFTMAX:
            return softmax(z)
        return np.array(z, dtype=np.float64)

    def replace(self, **changes) -> "Layer":
        fields = dict(weights=self.weights, biases=self.biases, activation=self.activation,
                      symbolic_tolerance=self.symbolic_tolerance, margins=self.margins,
                      support=self.support)
        fields.update(changes)
        return Layer(**fields)


@dataclass(frozen=True)
class ForwardTrace:
    """Outputs of every layer (``activations[k]`` is layer ``k``'s output)
    plus the final layer's pre-activations."""

    activations: tuple[np.ndarray, ...]
    logits: np.ndarray

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple[Layer, ...]
    class_names: tuple[str, ...]
    roles: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        object.__setattr__(self, "roles", {int(k): str(v) for k, v in dict(self.roles).items()})
        if not layers:
            raise ValueError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].n_in != layers[k - 1].n_out:
                raise ValueError(f"layer {k} expects {layers[k].n_in} inputs but layer {k - 1} "
                                 f"emits {layers[k - 1].n_out}")
        for k, layer in enumerate(layers[:-1]):
            if layer.activation == SOFTMAX:
                raise ValueError(f"softmax is only allowed on the final layer (found on layer {k})")
        if layers[-1].n_out != len(self.class_names):
            raise ValueError(f"output width {layers[-1].n_out} != {len(self.class_names)} class names")
        for k in self.roles:
            if not 0 <= k < len(layers):
                raise ValueError(f"role annotation for missing layer {k}")

    @property
    def n_inputs(self) -> int:
        return self.layers[0].n_in

    @property
    def widths(self) -> list[int]:
        return [layer.n_out for layer in self.layers]

    def layer_index(self, role: str) -> int:
        for k, r in self.roles.items():
            if r == role:
                return k
        raise KeyError(f"no layer annotated as {role!r}")

    def replace_layer(self, index: int, layer: Layer) -> "Network":
        layers = list(self.layers)
        layers[index] = layer
        return Network(tuple(layers), self.class_names, self.roles)

    def forward(self, x) -> ForwardTrace:
        return forward(self, x)

    def predict_proba(self, X) -> np.ndarray:
        return forward(self, X).output

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)

    def error_rate(self, X, y) -> float:
        return float(np.mean(self.predict(X) != np.asarray(y)))


def forward(net: Network, x) -> ForwardTrace:
    """Evaluate ``net`` on one sample (1-D) or a batch (2-D, one row per sample)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim not in (1, 2) or a.shape[-1] != net.n_inputs:
        raise ValueError(f"input of shape {a.shape} does not match network input width {net.n_inputs}")
    outs = []
    z = a
    for layer in net.layers:
        z = layer.pre_activation(a)
        a = layer.activate(z)
        outs.append(a)
    return ForwardTrace(tuple(outs), z)


def classify(net: Network, x, mask=None) -> tuple[int, np.ndarray]:
    """Return ``(class index, output vector)`` for a single sample.

    ``mask`` marks admissible outputs with True. Ties go to the lowest index.
    """
    probs = forward(net, x).output
    if probs.ndim != 1:
        raise ValueError("classify takes a single sample")
    return masked_argmax(probs, mask), probs


def masked_argmax(values, mask=None) -> int:
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        return int(np.argmax(values))
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape:
        raise ValueError(f"mask length {mask.shape} != output width {values.shape}")
    if not mask.any():
        raise ValueError("every output is masked")
    return int(np.argmax(np.where(mask, values, -np.inf)))


# -- serialization ---------------------------------------------------------

def _encode_reals(values) -> list:
    # JSON has no inf/nan; those are written as strings and parsed back by float()
    return [float(v) if np.isfinite(v) else str(float(v)) for v in values]


def _decode_reals(values, where: str) -> np.ndarray:
    if not isinstance(values, list):
        raise ModelFormatError("expected a list of numbers", where)
    try:
        return np.array([float(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(str(exc), where) from exc


def _layer_doc(layer: Layer) -> dict[str, Any]:
    return {
        "activation": layer.activation,
        "symbolic_tolerance": layer.symbolic_tolerance,
        "weights": layer.weights.tolist(),
        "biases": layer.biases.tolist(),
        "margins": None if layer.margins is None else _encode_reals(layer.margins),
        "support": None if layer.support is None else [list(s) for s in layer.support],
    }


def network_document(net: Network, metadata: Mapping[str, Any] | None = None) -> dict[str, Any]:
    return {
        "format": MODEL_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "class_names": list(net.class_names),
        "roles": {str(k): v for k, v in sorted(net.roles.items())},
        "layers": [_layer_doc(layer) for layer in net.layers],
        "metadata": dict(metadata or {}),
    }


def dumps_document(doc: Mapping[str, Any]) -> bytes:
    return (json.dumps(doc, sort_keys=True, allow_nan=False, separators=(",", ":")) + "\n").encode()


def serialize(net: Network, metadata: Mapping[str, Any] | None = None) -> bytes:
    """Model file bytes: a JSON document; floats round-trip exactly."""
    return dumps_document(network_document(net, metadata))


def _require(doc: Mapping, key: str, kind, where: str):
    if key not in doc:
        raise ModelFormatError(f"missing field {key!r}", where)
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ModelFormatError(f"field {key!r} has type {type(value).__name__}", where)
    return value


def network_from_document(doc: Any) -> tuple[Network, dict[str, Any]]:
    if not isinstance(doc, dict):
        raise ModelFormatError("top level must be an object", "$")
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not an {MODEL_FORMAT} document", "$.format")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema version {version!r} (this reader handles "
                               f"{SCHEMA_VERSION})", "$.schema_version")
    layers_doc = _require(doc, "layers", list, "$")
    if not layers_doc:
        raise ModelFormatError("empty layer list", "$.layers")
    layers = []
    for k, ld in enumerate(layers_doc):
        where = f"$.layers[{k}]"
        if not isinstance(ld, dict):
            raise ModelFormatError("layer must be an object", where)
        try:
            layers.append(Layer(
                np.array(_require(ld, "weights", list, where), dtype=np.float64),
                np.array(_require(ld, "biases", list, where), dtype=np.float64),
                _require(ld, "activation", str, where),
                float(ld.get("symbolic_tolerance", DEFAULT_SYMBOLIC_TOLERANCE)),
                None if ld.get("margins") is None else _decode_reals(ld["margins"], where + ".margins"),
                None if ld.get("support") is None else ld["support"],
            ))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(str(exc), where) from exc
    roles = _require(doc, "roles", dict, "$")
    try:
        net = Network(tuple(layers), tuple(_require(doc, "class_names", list, "$")),
                      {int(k): v for k, v in roles.items()})
    except ValueError as exc:
        raise ModelFormatError(str(exc), "$") from exc
    return net, dict(doc.get("metadata") or {})


def loads_document(data: bytes | str) -> Any:
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc


def deserialize(data: bytes | str) -> Network:
    return network_from_document(loads_document(data))[0]
