"""Robustness probes: decision-boundary distance along straight-line
interpolations, Gaussian input noise, and FGSM (self and transfer attacks).

Any object with a batch ``predict(X)`` works as a victim.  FGSM designers
must be differentiable networks (sigmoid hidden layers).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gdn import loss_and_grads, params_of
from .model import SYMBOLIC, Network

COARSE_STEP = 0.01
BISECT_TOL = 1e-4


def _predict(model, X) -> np.ndarray:
    return np.asarray(model.predict(np.atleast_2d(X)))


def _network(model) -> Network:
    net = getattr(model, "network", model)
    if any(layer.activation == SYMBOLIC for layer in net.layers):
        raise ValueError("symbolic networks are not differentiable; attack the sigmoid-mode model")
    return net


# -- decision boundaries ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryProbe:
    source: np.ndarray
    target: np.ndarray
    source_class: int
    t_star: float
    l1_distance: float


def boundary_probe(model, source, target) -> BoundaryProbe:
    """First prediction flip on ``(1 - t) source + t target``: coarse scan in
    steps of 0.01, then bisection until the bracket is below 1e-4."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    cls = int(_predict(model, source)[0])
    if int(_predict(model, target)[0]) == cls:
        raise ValueError("target must be classified differently from the source")
    ts = np.round(np.arange(1, int(round(1 / COARSE_STEP)) + 1) * COARSE_STEP, 12)
    preds = _predict(model, source + ts[:, None] * (target - source))
    k = int(np.flatnonzero(preds != cls)[0])
    lo, hi = (ts[k - 1] if k else 0.0), ts[k]
    while hi - lo >= BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if int(_predict(model, source + mid * (target - source))[0]) == cls:
            lo = mid
        else:
            hi = mid
    return BoundaryProbe(source, target, cls, float(hi), float(hi * np.mean(np.abs(target - source))))


def white_noise_targets(model, source, n: int = 20, seed: int = 0, max_draws: int = 100_000) -> np.ndarray:
    """Uniform black/white pixel images, resampled until their prediction
    differs from the source's."""
    rng = np.random.default_rng(seed)
    cls = int(_predict(model, source)[0])
    out, draws = [], 0
    while len(out) < n:
        batch = rng.integers(0, 2, size=(max(n, 32), np.size(source))).astype(np.float64)
        draws += len(batch)
        out.extend(batch[_predict(model, batch) != cls][: n - len(out)])
        if draws >= max_draws and len(out) < n:
            raise RuntimeError(f"only {len(out)} of {n} noise targets leave class {cls}")
    return np.array(out)


def other_class_targets(model, source, X, n: int = 20, seed: int = 0) -> np.ndarray:
    """``n`` images from ``X`` predicted as a different class than the source."""
    cls = int(_predict(model, source)[0])
    pool = np.flatnonzero(_predict(model, X) != cls)
    if len(pool) < n:
        raise ValueError(f"only {len(pool)} candidate targets")
    return np.asarray(X)[np.random.default_rng(seed).choice(pool, n, replace=False)]


def boundary_distance(model, source, targets=None, n_targets: int = 20, seed: int = 0) -> list[BoundaryProbe]:
    """Probes from ``source`` toward ``targets`` (white noise when omitted)."""
    if targets is None:
        targets = white_noise_targets(model, source, n_targets, seed)
    return [boundary_probe(model, source, t) for t in targets]


# -- Gaussian noise -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseCurve:
    sigmas: np.ndarray
    errors: np.ndarray  # mean over repeats
    spread: np.ndarray  # standard deviation over repeats


def noise_curve(model, X, y, sigmas, repeats: int = 20, seed: int = 0, clip: bool = False) -> NoiseCurve:
    """Test error under additive N(0, sigma^2) pixel noise, fresh noise per
    repeat.  Pixels are not clipped unless ``clip``."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if (sigmas < 0).any() or (np.diff(sigmas) < 0).any():
        raise ValueError("sigmas must be nonnegative and ascending")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    errs = np.zeros((len(sigmas), repeats))
    for i, s in enumerate(sigmas):
        for r in range(repeats):
            noisy = X + rng.normal(0.0, s, X.shape) if s > 0 else X
            if clip:
                noisy = np.clip(noisy, 0.0, 1.0)
            errs[i, r] = np.mean(_predict(model, noisy) != y)
    return NoiseCurve(sigmas, errs.mean(axis=1), errs.std(axis=1))


# -- FGSM -------------------------------------------------------------------

def epsilon_grid(lo: float = 0.001, hi: float = 1.0, factor: float = 1.05) -> np.ndarray:
    n = int(np.floor(np.log(hi / lo) / np.log(factor))) + 1
    grid = lo * factor ** np.arange(n)
    return grid if np.isclose(grid[-1], hi) else np.append(grid, hi)


def fgsm_directions(designer, X, y) -> np.ndarray:
    """``sign`` of the cross-entropy input gradient, one row per image."""
    net = _network(designer)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, _, dX = loss_and_grads(params_of(net), X, np.atleast_1d(y), want_input=True)
    return np.sign(dX)


@dataclass(frozen=True, eq=False)
class AttackResult:
    image_id: int
    designer: str
    victim: str
    eps_min: float  # inf when the victim survives the whole grid
    eps_below: float  # largest scanned scale still classified correctly
    grad_sign: np.ndarray


def fgsm_epsilon_min(designer, victim, image, label: int, grid=None, refine: int = 10, clip: bool = False,
                     image_id: int = 0, names=("designer", "victim"), direction=None) -> AttackResult:
    """Smallest scale ``eps`` on the ascending grid at which the victim
    misclassifies ``image + eps * sign(grad)``; the bracketing grid step is
    refined linearly with ``refine`` points."""
    grid = epsilon_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    x = np.asarray(image, dtype=np.float64)
    if int(_predict(victim, x)[0]) != label:
        raise ValueError("victim must classify the clean image correctly")
    d = fgsm_directions(designer, x, label)[0] if direction is None else np.asarray(direction)

    def wrong(eps):
        adv = x[None] + np.asarray(eps)[:, None] * d[None]
        if clip:
            adv = np.clip(adv, 0.0, 1.0)
        return _predict(victim, adv) != label

    flips = np.flatnonzero(wrong(grid))
    if not len(flips):
        return AttackResult(image_id, names[0], names[1], float("inf"), float(grid[-1]), d)
    k = int(flips[0])
    lo, hi = (grid[k - 1] if k else 0.0), grid[k]
    fine = np.linspace(lo, hi, refine + 2)[1:]
    j = int(np.flatnonzero(wrong(fine))[0])
    below = fine[j - 1] if j else lo
    return AttackResult(image_id, names[0], names[1], float(fine[j]), float(below), d)


def attack_error(designer, victim, X, y, eps: float, clip: bool = False) -> float:
    """Victim error on FGSM images built from the designer's gradients."""
    adv = np.asarray(X, dtype=np.float64) + eps * fgsm_directions(designer, X, y)
    if clip:
        adv = np.clip(adv, 0.0, 1.0)
    return float(np.mean(_predict(victim, adv) != np.asarray(y)))


def transfer_table(designers: dict, victims: dict, X, y, grid=None, ids=None) -> list[dict]:
    """One row per (image, victim) with ``eps_min_designer_<name>`` columns.
    Images the victim misclassifies when clean are skipped."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    ids = np.arange(len(X)) if ids is None else np.asarray(ids)
    dirs = {name: fgsm_directions(m, X, y) for name, m in designers.items()}
    rows = []
    for vname, victim in victims.items():
        ok = _predict(victim, X) == y
        for i in np.flatnonzero(ok):
            row = {"id": int(ids[i]), "victim": vname}
            for dname, m in designers.items():
                res = fgsm_epsilon_min(m, victim, X[i], int(y[i]), grid, direction=dirs[dname][i])
                row[f"eps_min_designer_{dname}"] = res.eps_min
            rows.append(row)
    return rows


def write_csv(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return path
