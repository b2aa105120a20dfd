"""Deliberation: when the top two admissible outputs are too close, shift
all subconcept biases together until one answer stands out.

Symbolic networks search over the distinct subconcept pre-activation levels
(one level per step): raise the threshold while several subconcepts fire,
lower it while none do, and stop at a single survivor or when a lowering
step still leaves several (then the lowest-index survivor wins).
Continuous networks move the bias by a fixed step and halve it whenever
the direction flips.  The model is never modified.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import SYMBOLIC, masked_argmax

SUBCONCEPT_ROLE = "subconcept"


@dataclass(frozen=True)
class DeliberationConfig:
    trigger_ratio: float = 2.0
    max_steps: int = 100
    bias_step: float | None = None  # continuous mode; None -> 0.1 x mean |subconcept bias|
    level_tolerance: float = 1e-6  # symbolic mode: pre-activations closer than this share a level

    def __post_init__(self):
        if not self.trigger_ratio > 1:
            raise ValueError("trigger_ratio must exceed 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.bias_step is not None and not self.bias_step > 0:
            raise ValueError("bias_step must be positive")
        if self.level_tolerance < 0:
            raise ValueError("level_tolerance must be nonnegative")


@dataclass(frozen=True)
class Deliberation:
    label: int
    probabilities: np.ndarray
    triggered: bool
    resolved: bool
    transcript: tuple = field(default_factory=tuple)  # (bias shift, subconcepts firing) per step

    def to_dict(self) -> dict:
        return {"label": self.label, "triggered": self.triggered, "resolved": self.resolved,
                "status": "resolved" if self.resolved else "unresolved",
                "transcript": [[float(s), int(n)] for s, n in self.transcript]}


def needs_deliberation(probs, mask, ratio: float) -> bool:
    """True when the best admissible output is not ``ratio`` times the runner-up."""
    p = np.asarray(probs, dtype=np.float64)[np.asarray(mask, dtype=bool)]
    if len(p) < 2:
        return False
    top, second = np.sort(p)[::-1][:2]
    return bool(top == second or top < ratio * second)


def _split(model):
    net = model.network
    k = net.layer_index(SUBCONCEPT_ROLE)
    return net, k, np.asarray(model.subconcept_class)


def _forward_from(net, k, z, shift):
    """Outputs of the layers above the subconcept layer for shifted biases."""
    a = net.layers[k].activate(z + shift)
    for layer in net.layers[k + 1:]:
        a = layer.activate(layer.pre_activation(a))
    return a


def _levels(values, tol):
    """Distinct values (descending) with near-equal values merged."""
    out = []
    for v in np.sort(values)[::-1]:
        if not out or out[-1][-1] - v > tol:
            out.append([v])
        else:
            out[-1].append(v)
    return [g[0] for g in out], [g[-1] for g in out]


def deliberate_classify(model, x, mask=None, cfg: DeliberationConfig = DeliberationConfig()) -> Deliberation:
    """Classify one sample, deliberating when the output is ambiguous.

    ``model`` needs ``network`` (with a subconcept layer role) and
    ``subconcept_class``; ``mask`` marks admissible classes with True.
    """
    net, k, owner = _split(model)
    x = np.asarray(x, dtype=np.float64)
    trace = net.forward(x)
    probs = trace.output
    n_classes = len(probs)
    mask = np.ones(n_classes, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    base = masked_argmax(probs, mask)
    if not needs_deliberation(probs, mask, cfg.trigger_ratio):
        return Deliberation(base, probs, False, True)
    a = x
    for layer in net.layers[:k]:
        a = layer.activate(layer.pre_activation(a))
    layer = net.layers[k]
    z = layer.pre_activation(a)
    candidates = mask[owner]
    if layer.activation == SYMBOLIC:
        return _symbolic_search(net, k, z, owner, candidates, probs, base, cfg)
    return _continuous_search(net, k, z, candidates, mask, probs, base, cfg)


def _symbolic_search(net, k, z, owner, candidates, probs, base, cfg):
    tol = net.layers[k].symbolic_tolerance
    cand = np.flatnonzero(candidates)
    highs, lows = _levels(z[cand], cfg.level_tolerance)

    def firing(admitted):
        if admitted == 0:
            return cand[:0]
        return cand[z[cand] >= lows[admitted - 1]]

    def shift_for(admitted):
        # place the threshold midway between the last admitted level and the next one
        if admitted == 0:
            return -(highs[0] + tol + cfg.level_tolerance)
        below = highs[admitted] if admitted < len(highs) else lows[-1] - 2 * (tol + 1.0)
        return -(lows[admitted - 1] + below) / 2.0

    admitted = int(np.sum(np.array(lows) > tol))
    transcript = []
    last_change = 0
    for _ in range(cfg.max_steps):
        fired = firing(admitted)
        transcript.append((shift_for(admitted) if transcript else 0.0, len(fired)))
        if len(fired) == 1 or (len(fired) > 1 and last_change < 0):
            winner = int(fired[0])
            out = _forward_from(net, k, z, shift_for(admitted))
            return Deliberation(int(owner[winner]), out, True, True, tuple(transcript))
        if len(fired) == 0:
            admitted += 1
            last_change = -1
        else:
            admitted -= 1
            last_change = 1
    return Deliberation(base, probs, True, False, tuple(transcript))


def _continuous_search(net, k, z, candidates, mask, probs, base, cfg):
    biases = net.layers[k].biases
    step = cfg.bias_step if cfg.bias_step is not None else 0.1 * float(np.mean(np.abs(biases)))
    if step <= 0:
        step = 0.1
    shift, direction = 0.0, 0
    transcript = []
    for _ in range(cfg.max_steps):
        s_out = net.layers[k].activate(z + shift)
        fired = int(np.sum(s_out[candidates] > 0.5))
        out = _forward_from(net, k, z, shift)
        transcript.append((shift, fired))
        if not needs_deliberation(out, mask, cfg.trigger_ratio):
            return Deliberation(masked_argmax(out, mask), out, True, True, tuple(transcript))
        new = 1 if fired == 0 else -1
        if direction and new != direction:
            step /= 2.0
        direction = new
        shift += new * step
    return Deliberation(base, probs, True, False, tuple(transcript))


def deliberation_policy(model, cfg: DeliberationConfig = DeliberationConfig()):
    return lambda x, mask: deliberate_classify(model, x, mask, cfg).label
