"""Building an ENN layer by layer.

1. ward clustering inside each class, one global cutoff for all classes;
2. a pairwise SVM between every two subconcepts of different classes
   (the differentia layer);
3-4. per-subconcept SVMs on differentia outputs, pruned by repeatedly
   masking the weakest differentia;
5. a concept layer wired from subconcepts, refined by SGD on the final layer.
"""
from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import SubconceptPartition, partition_classes, sample_order
from .model import (SIGMOID, SOFTMAX, SYMBOLIC, Layer, Network, ModelFormatError,
                    dumps_document, loads_document, network_document, network_from_document,
                    sigmoid, symbolic_activation)
from .svm import SvmProblem, train_svm

DIFFERENTIA, SUBCONCEPT, CONCEPT = "differentia", "subconcept", "concept"
DIRECT_WEIGHT = 10.0
DIRECT_BIAS = -5.0
# pruning compares margins with this relative slack so that solver round-off
# does not count as a margin loss
MARGIN_SLACK = 1e-7


class TrainingError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    train_multiplier: bool = True
    # > 0 holds out a stratified slice and keeps the parameters with the
    # lowest held-out cross-entropy, stopping after `patience` stale epochs
    validation_fraction: float = 0.0
    patience: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.validation_fraction < 1.0 or self.patience < 1:
            raise ValueError("validation_fraction must lie in [0, 1) and patience be >= 1")


@dataclass(frozen=True)
class EnnHyperparams:
    target_subconcepts: int
    svm_cost: float = 1.0
    differentia_multiplier: float = 1.0  # math.inf selects symbolic neurons
    subconcept_multiplier_max: float = 1.0
    margin_fraction: float = 0.5
    error_tolerance: float = 0.0
    error_tolerance_unit: str = "rate"  # or "count"
    concept_init: str = "direct"  # or "svm"
    concept_activation: str = SOFTMAX  # or "sigmoid"
    final_sgd: SgdConfig = field(default_factory=SgdConfig)
    prune: bool = True
    subconcept_inputs: str = "all"  # or "associated"
    class_weight: str = "none"
    symbolic_tolerance: float = 1e-9
    svm_tol: float = 1e-6  # dual projected-gradient tolerance

    def __post_init__(self):
        if isinstance(self.final_sgd, dict):
            object.__setattr__(self, "final_sgd", SgdConfig(**self.final_sgd))
        if self.target_subconcepts < 1:
            raise ValueError("target_subconcepts must be positive")
        for name in ("svm_cost", "differentia_multiplier", "subconcept_multiplier_max", "svm_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.margin_fraction <= 1.0:
            raise ValueError("margin_fraction must lie in [0, 1]")
        if not self.error_tolerance >= 0:
            raise ValueError("error_tolerance must be nonnegative")
        choices = {"error_tolerance_unit": ("rate", "count"), "concept_init": ("direct", "svm"),
                   "concept_activation": (SOFTMAX, SIGMOID), "subconcept_inputs": ("all", "associated"),
                   "class_weight": ("none", "balanced")}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @property
    def symbolic(self) -> bool:
        return math.isinf(self.differentia_multiplier)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = str(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnnHyperparams":
        d = dict(d)
        for k, v in d.items():
            if isinstance(v, str) and v in ("inf", "-inf", "nan"):
                d[k] = float(v)
        return cls(**d)

    def replace(self, **changes) -> "EnnHyperparams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DifferentiaCatalog:
    """Differentiae as ``(subconcept_a, subconcept_b, hyperplane)``; the
    hyperplane is positive on the side of ``subconcept_a`` (``a < b``)."""
    entries: tuple

    def __post_init__(self):
        seen = set()
        for a, b, _ in self.entries:
            if not a < b or (a, b) in seen:
                raise ValueError(f"bad or duplicated differentia pair ({a}, {b})")
            seen.add((a, b))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b, _ in self.entries]

    def associated(self, subconcept: int) -> np.ndarray:
        return np.array([k for k, (a, b, _) in enumerate(self.entries) if subconcept in (a, b)],
                        dtype=np.int64)

    def subset(self, keep) -> "DifferentiaCatalog":
        return DifferentiaCatalog(tuple(self.entries[int(k)] for k in keep))


@dataclass(frozen=True, eq=False)
class EnnModel:
    network: Network
    partition: SubconceptPartition
    catalog: DifferentiaCatalog
    hyperparams: EnnHyperparams
    support_vector_ids: frozenset
    subconcept_multiplier: float
    report: dict = field(default_factory=dict)
    wall_time: float = 0.0  # not serialized, so saved bytes stay reproducible

    def __post_init__(self):
        widths = self.network.widths
        if widths[0] != len(self.catalog):
            raise ValueError("differentia layer width must equal the catalog size")
        if widths[1] != self.partition.n_subconcepts:
            raise ValueError("subconcept layer width must equal the subconcept count")
        if widths[2] != len(self.partition.counts_per_class):
            raise ValueError("concept layer width must equal the class count")

    @property
    def subconcept_class(self) -> np.ndarray:
        return self.partition.subconcept_class

    def predict(self, X) -> np.ndarray:
        return self.network.predict(X)

    def error_rate(self, X, y) -> float:
        return self.network.error_rate(X, y)

    def to_bytes(self) -> bytes:
        return dumps_document(network_document(self.network, self._metadata()))

    def _metadata(self) -> dict:
        p = self.partition
        return {
            "kind": "enn",
            "hyperparams": self.hyperparams.to_dict(),
            "subconcept_multiplier": self.subconcept_multiplier,
            "partition": {
                "classes": p.classes.tolist(), "local_ids": p.local_ids.tolist(),
                "means": p.means.tolist(), "cutoff": p.cutoff, "target": p.target,
                "counts_per_class": list(p.counts_per_class),
            },
            "differentia_pairs": [list(pair) for pair in self.catalog.pairs],
            "support_vector_ids": sorted(int(i) for i in self.support_vector_ids),
            "report": self.report,
        }

    @classmethod
    def from_bytes(cls, data: bytes) -> "EnnModel":
        net, meta = network_from_document(loads_document(data))
        if meta.get("kind") != "enn":
            raise ModelFormatError("model file does not hold an ENN", "$.metadata.kind")
        try:
            hp = EnnHyperparams.from_dict(meta["hyperparams"])
            p = meta["partition"]
            partition = SubconceptPartition(
                np.array(p["classes"], dtype=np.int64), np.array(p["local_ids"], dtype=np.int64),
                np.array(p["means"], dtype=np.float64), float(p["cutoff"]), int(p["target"]),
                tuple(int(c) for c in p["counts_per_class"]))
            mult = 1.0 if hp.symbolic else hp.differentia_multiplier
            hyperplanes = net.layers[0].hyperplanes
            catalog = DifferentiaCatalog(tuple(
                (int(a), int(b), dataclasses.replace(h, multiplier=mult))
                for (a, b), h in zip(meta["differentia_pairs"], hyperplanes)))
            return cls(net, partition, catalog, hp, frozenset(meta["support_vector_ids"]),
                       float(meta["subconcept_multiplier"]), dict(meta.get("report", {})))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"bad ENN metadata: {exc}", "$.metadata") from exc


def task_seed(seed: int, *ids: int) -> int:
    """Per-task seed derived from the master seed and the task identity."""
    return int(np.random.SeedSequence([int(seed), *[int(i) for i in ids]]).generate_state(1)[0] & 0x7FFFFFFF)


def _map(fn, items, jobs: int):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _layer_activation(hp: EnnHyperparams) -> str:
    return SYMBOLIC if hp.symbolic else SIGMOID


def _apply(z, hp: EnnHyperparams, multiplier: float = 1.0):
    if hp.symbolic:
        return symbolic_activation(z, hp.symbolic_tolerance)
    return sigmoid(multiplier * z)


# -- step ii -----------------------------------------------------------------

def learn_differentiae(X, partition: SubconceptPartition, hp: EnnHyperparams, seed: int = 0,
                       jobs: int = 1) -> tuple[DifferentiaCatalog, Layer]:
    """One SVM per pair of subconcepts from different classes.

    ``X`` must list samples in the partition's (class-major) order.
    Support indices are translated into rows of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    owner = partition.subconcept_class
    members = [partition.members(s) for s in range(partition.n_subconcepts)]
    pairs = [(a, b) for a in range(len(owner)) for b in range(a + 1, len(owner)) if owner[a] != owner[b]]
    if not pairs:
        raise TrainingError(DIFFERENTIA, "need subconcepts from at least two classes")

    def fit(pair):
        a, b = pair
        sol = train_svm(SvmProblem(X[members[a]], X[members[b]], hp.svm_cost,
                                   class_weight=hp.class_weight), task_seed(seed, 1, a, b), hp.svm_tol)
        rows = np.concatenate([members[a], members[b]])
        h = dataclasses.replace(sol.hyperplane, support_indices=tuple(rows[list(sol.hyperplane.support_indices)]))
        return h if hp.symbolic else h.scaled(hp.differentia_multiplier)

    hyperplanes = _map(fit, pairs, jobs)
    catalog = DifferentiaCatalog(tuple((a, b, h) for (a, b), h in zip(pairs, hyperplanes)))
    layer = Layer.from_hyperplanes(hyperplanes, _layer_activation(hp), hp.symbolic_tolerance)
    return catalog, layer


# -- steps iii-iv ------------------------------------------------------------

@dataclass(frozen=True)
class PruneRecord:
    subconcept: int
    initial_features: int
    kept_features: tuple
    initial_margin: float
    final_margin: float
    initial_error: float
    final_error: float
    halted_by: str  # "margin", "error", "single", or "disabled"


def prune_subconcept(H, pos_rows, neg_rows, features, hp: EnnHyperparams, seed: int) -> PruneRecord:
    """Greedy masking of the lowest-|w| differentia for one subconcept."""
    n = len(pos_rows) + len(neg_rows)
    pos, neg = H[pos_rows], H[neg_rows]

    def fit(active):
        mask = np.zeros(H.shape[1], dtype=bool)
        mask[active] = True
        return train_svm(SvmProblem(pos, neg, hp.svm_cost, mask, hp.class_weight), seed, hp.svm_tol)

    active = np.array(sorted(features), dtype=np.int64)
    first = current = fit(active)
    halted = "disabled"
    if hp.prune:
        halted = "single"
        while len(active) > 1:
            weakest = int(np.argmin(np.abs(current.w[active])))
            trial = np.delete(active, weakest)
            sol = fit(trial)
            increase = sol.train_error - first.train_error
            if hp.error_tolerance_unit == "count":
                increase *= n
            if sol.margin < hp.margin_fraction * first.margin * (1 - MARGIN_SLACK):
                halted = "margin"
                break
            if increase > hp.error_tolerance + 1e-12:
                halted = "error"
                break
            active, current = trial, sol
    return PruneRecord(-1, len(features), tuple(int(k) for k in active), first.margin,
                       current.margin, first.train_error, current.train_error, halted)


def prune_and_build_subconcepts(catalog: DifferentiaCatalog, H, partition: SubconceptPartition,
                                hp: EnnHyperparams, seed: int = 0, jobs: int = 1):
    """Prune differentiae and fit the final subconcept SVMs.

    ``H`` holds differentia-layer outputs for the class-major training set.
    Returns ``(kept, hyperplanes, records)``: catalog indices that survive,
    unscaled subconcept hyperplanes over the surviving differentiae, and one
    :class:`PruneRecord` per subconcept.
    """
    if len(catalog) == 0:
        raise TrainingError(SUBCONCEPT, "empty differentia catalog")
    H = np.asarray(H, dtype=np.float64)
    owner = partition.subconcept_class
    classes = partition.classes
    n_sub = partition.n_subconcepts

    def prune(s):
        try:
            rec = prune_subconcept(H, partition.members(s), np.flatnonzero(classes != owner[s]),
                                   catalog.associated(s), hp, task_seed(seed, 2, s))
        except ValueError as exc:
            raise TrainingError(SUBCONCEPT, f"subconcept {s}: {exc}") from exc
        return dataclasses.replace(rec, subconcept=s)

    records = _map(prune, range(n_sub), jobs)
    kept = sorted(set().union(*[set(r.kept_features) for r in records]))
    Hk = H[:, kept]
    position = {k: i for i, k in enumerate(kept)}

    def final(s):
        if hp.subconcept_inputs == "associated":
            mask = np.zeros(len(kept), dtype=bool)
            mask[[position[k] for k in catalog.associated(s) if k in position]] = True
        else:
            mask = None
        pos_rows = partition.members(s)
        neg_rows = np.flatnonzero(classes != owner[s])
        try:
            sol = train_svm(SvmProblem(Hk[pos_rows], Hk[neg_rows], hp.svm_cost, mask, hp.class_weight),
                            task_seed(seed, 3, s), hp.svm_tol)
        except ValueError as exc:
            raise TrainingError(SUBCONCEPT, f"subconcept {s}: {exc}") from exc
        rows = np.concatenate([pos_rows, neg_rows])
        return dataclasses.replace(sol.hyperplane,
                                   support_indices=tuple(rows[list(sol.hyperplane.support_indices)]))

    hyperplanes = _map(final, range(n_sub), jobs)
    # a surviving differentia that every final SVM ignores carries no signal
    W = np.stack([h.w for h in hyperplanes])
    used = np.flatnonzero(np.any(W != 0.0, axis=0))
    if len(used) < len(kept):
        kept = [kept[i] for i in used]
        hyperplanes = [dataclasses.replace(h, w=h.w[used]) for h in hyperplanes]
    return kept, hyperplanes, records


# -- step v ------------------------------------------------------------------

def concept_loss_and_grad(W, b, multiplier: float, Z, y):
    """Mean softmax cross-entropy of ``softmax(sigmoid(m Z) W^T + b)``.

    ``Z`` holds unscaled subconcept pre-activations.  Returns
    ``(loss, dW, db, dm)``.
    """
    S = sigmoid(multiplier * Z)
    logits = S @ W.T + b
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -float(logp[np.arange(n), y].mean())
    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    dW = dz.T @ S
    db = dz.sum(axis=0)
    dS = dz @ W
    dm = float((dS * S * (1.0 - S) * Z).sum())
    return loss, dW, db, dm


def direct_wiring(subconcept_class, n_classes: int):
    W = np.zeros((n_classes, len(subconcept_class)))
    W[subconcept_class, np.arange(len(subconcept_class))] = DIRECT_WEIGHT
    return W, np.full(n_classes, DIRECT_BIAS)


def learn_concept_layer(Z, y, subconcept_class, n_classes: int, hp: EnnHyperparams, seed: int = 0):
    """Concept weights from direct wiring or one-vs-all SVMs, then SGD on the
    final layer (and the subconcept multiplier) unless the model is symbolic.

    Returns ``(layer, multiplier, support_rows, history)``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    m = hp.subconcept_multiplier_max
    support = set()
    if hp.concept_init == "direct":
        W, b = direct_wiring(subconcept_class, n_classes)
    else:
        S = _apply(Z, hp, m)
        rows, bs = [], []
        for c in range(n_classes):
            pos_rows, neg_rows = np.flatnonzero(y == c), np.flatnonzero(y != c)
            if len(pos_rows) == 0 or len(neg_rows) == 0:
                raise TrainingError(CONCEPT, f"class {c} has no samples on one side")
            sol = train_svm(SvmProblem(S[pos_rows], S[neg_rows], hp.svm_cost, class_weight=hp.class_weight),
                            task_seed(seed, 4, c), hp.svm_tol)
            order = np.concatenate([pos_rows, neg_rows])
            support.update(order[list(sol.hyperplane.support_indices)].tolist())
            rows.append(sol.w)
            bs.append(sol.b)
        W, b = np.array(rows), np.array(bs)
    history = []
    if hp.symbolic:
        return Layer(W, b, SYMBOLIC, hp.symbolic_tolerance), 1.0, support, history
    cfg = hp.final_sgd
    rng = np.random.default_rng(task_seed(cfg.seed, 5))
    train_rows, val_rows = _holdout(y, cfg.validation_fraction, rng)
    n = len(train_rows)
    m_floor = 1e-6 * hp.subconcept_multiplier_max
    best = None
    stale = 0
    for epoch in range(cfg.epochs):
        order = train_rows[rng.permutation(n)]
        for k, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            loss, dW, db, dm = concept_loss_and_grad(W, b, m, Z[batch], y[batch])
            if not (math.isfinite(loss) and np.isfinite(dW).all() and math.isfinite(dm)):
                raise TrainingError(CONCEPT, f"final-layer SGD diverged at epoch {epoch} batch {k} "
                                             f"(learning rate {cfg.learning_rate}, multiplier {m})")
            W = W - cfg.learning_rate * dW
            b = b - cfg.learning_rate * db
            if cfg.train_multiplier:
                m = float(np.clip(m - cfg.learning_rate * dm, m_floor, hp.subconcept_multiplier_max))
        history.append(concept_loss_and_grad(W, b, m, Z[train_rows], y[train_rows])[0])
        if len(val_rows):
            val = concept_loss_and_grad(W, b, m, Z[val_rows], y[val_rows])[0]
            if best is None or val < best[0]:
                best, stale = (val, W, b, m), 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    if best is not None:
        _, W, b, m = best
    return Layer(W, b, hp.concept_activation), m, support, history


def _holdout(y, fraction: float, rng):
    """Stratified split of row indices into (train, validation)."""
    rows = np.arange(len(y))
    if fraction <= 0:
        return rows, rows[:0]
    val = []
    for c in np.unique(y):
        idx = rows[y == c]
        k = int(round(fraction * len(idx)))
        if 0 < k < len(idx):
            val.extend(rng.choice(idx, size=k, replace=False).tolist())
    mask = np.zeros(len(y), dtype=bool)
    mask[val] = True
    return rows[~mask], rows[mask]


# -- orchestration -----------------------------------------------------------

def train_enn(X, y, hp: EnnHyperparams, seed: int = 0, class_names=None, jobs: int = 1,
              n_classes: int | None = None) -> EnnModel:
    """Run the five steps on ``(X, y)`` with integer labels ``0..K-1``."""
    start = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise TrainingError("input", f"X of shape {X.shape} does not match {len(y)} labels")
    if not np.isfinite(X).all():
        raise TrainingError("input", "features must be finite")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if K < 2:
        raise TrainingError("input", "need at least two classes")
    counts = np.bincount(y, minlength=K)
    if (counts == 0).any():
        raise TrainingError("input", f"classes without samples: {np.flatnonzero(counts == 0).tolist()}")
    names = tuple(class_names) if class_names is not None else tuple(str(c) for c in range(K))

    order = sample_order(y, K)
    Xo, yo = X[order], y[order]
    try:
        partition = partition_classes(Xo, yo, K, hp.target_subconcepts)
    except ValueError as exc:
        raise TrainingError("clustering", str(exc)) from exc

    catalog, d_layer = learn_differentiae(Xo, partition, hp, seed, jobs)
    n_before = len(catalog)
    H = d_layer.activate(d_layer.pre_activation(Xo))
    kept, sub_planes, records = prune_and_build_subconcepts(catalog, H, partition, hp, seed, jobs)
    Hk = H[:, kept]
    Z = Hk @ np.stack([h.w for h in sub_planes]).T + np.array([h.b for h in sub_planes])
    c_layer, m, concept_support, history = learn_concept_layer(
        Z, yo, partition.subconcept_class, K, hp, seed)

    # support indices so far are rows of the class-major arrays
    def original(h):
        return dataclasses.replace(h, support_indices=sorted(int(order[r]) for r in h.support_indices))

    catalog = DifferentiaCatalog(tuple((a, b, original(h)) for a, b, h in catalog.subset(kept).entries))
    sub_planes = [original(h) for h in sub_planes]
    support_ids = frozenset(int(order[r]) for r in concept_support).union(
        *[h.support_indices for _, _, h in catalog.entries], *[h.support_indices for h in sub_planes])

    act = _layer_activation(hp)
    d_layer = Layer.from_hyperplanes([h for _, _, h in catalog.entries], act, hp.symbolic_tolerance)
    s_planes = sub_planes if hp.symbolic else [h.scaled(m) for h in sub_planes]
    s_layer = Layer.from_hyperplanes(s_planes, act, hp.symbolic_tolerance)
    net = Network((d_layer, s_layer, c_layer), names, {0: DIFFERENTIA, 1: SUBCONCEPT, 2: CONCEPT})
    report = {
        "achieved_subconcepts": partition.n_subconcepts,
        "target_subconcepts": hp.target_subconcepts,
        "cutoff": partition.cutoff,
        "differentiae_before_pruning": n_before,
        "differentiae_after_pruning": len(catalog),
        "support_vectors": len(support_ids),
        "subconcept_multiplier": m,
        "pruning_halts": _halt_counts(records),
        "final_layer_loss": history[-1] if history else None,
        "train_error": float(np.mean(net.predict(X) != y)),
    }
    return EnnModel(net, partition, catalog, hp, support_ids, m, report, time.perf_counter() - start)


def _halt_counts(records) -> dict:
    out: dict = {}
    for r in records:
        out[r.halted_by] = out.get(r.halted_by, 0) + 1
    return dict(sorted(out.items()))


def count_support_vectors(model: EnnModel) -> int:
    return len(model.support_vector_ids)


def subconcept_preactivations(model: EnnModel, X) -> np.ndarray:
    """Unscaled-by-activation subconcept inputs ``w . h + b`` (scaled weights)."""
    net = model.network
    d, s = net.layers[0], net.layers[1]
    H = d.activate(d.pre_activation(np.asarray(X, dtype=np.float64)))
    return s.pre_activation(H)


# -- hyperparameter search ---------------------------------------------------

def cross_validate_enn(X, y, base: EnnHyperparams, grid: dict, folds: int = 10, seed: int = 0,
                       jobs: int = 1):
    """Grid search with stratified k-fold validation error.

    Returns ``(best_hyperparams, rows)``; each row is ``(settings, mean_error)``.
    Ties go to the grid point listed first.
    """
    from itertools import product

    from .datasets import stratified_folds

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    K = int(y.max() + 1)
    fold_of = stratified_folds(y, folds, seed)
    names = list(grid)
    rows = []
    best = None
    for values in product(*(grid[n] for n in names)):
        settings = dict(zip(names, values))
        hp = base.replace(**settings)
        errors = []
        for f in range(folds):
            tr, va = fold_of != f, fold_of == f
            model = train_enn(X[tr], y[tr], hp, seed, jobs=jobs, n_classes=K)
            errors.append(model.error_rate(X[va], y[va]))
        mean = float(np.mean(errors))
        rows.append((settings, mean))
        if best is None or mean < best[1]:
            best = (hp, mean)
    return best[0], rows
