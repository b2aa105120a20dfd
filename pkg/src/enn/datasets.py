"""Dataset generators, the MNIST IDX reader and on-disk persistence.

Every generator is a pure function of its seed.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from skimage.draw import line as draw_line

IMAGE_SIDE = 28
HORIZONTAL, VERTICAL = 0, 1
ORIENTATION_NAMES = ("horizontal", "vertical")

N_CITIES = 10
VISITED_DISTANCE = 10.0
CURRENT_SCALE = 10.0
TSP_FEATURES = N_CITIES * (N_CITIES - 1) // 2 + N_CITIES

N_BDT_FEATURES = 10
TABLE_SIZE = 2 ** N_BDT_FEATURES
BDT_BRANCH_PROB = 0.7
BDT_MAX_DEPTH = 7

LOGIC_SCALE = 2.0
DEFAULT_DATA_DIR = "/root/data/mnist"


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    class_names: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError(f"X of shape {X.shape} does not match {len(y)} labels")
        if not np.isfinite(X).all():
            raise ValueError("features must be finite")
        if len(y) and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise ValueError("labels must index class_names")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, rows, **meta) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.X[rows], self.y[rows], self.class_names, {**self.meta, **meta})


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


# -- rectangles --------------------------------------------------------------

def rectangle_image(top: int, left: int, h: int, w: int, side: int = IMAGE_SIDE) -> np.ndarray:
    img = np.zeros((side, side), dtype=np.float32)
    img[top:top + h, left:left + w] = 1.0
    return img


def _rectangles(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    labels = np.tile([HORIZONTAL, VERTICAL], (n + 1) // 2)[:n]
    labels = labels[rng.permutation(n)]
    X = np.zeros((n, IMAGE_SIDE * IMAGE_SIDE), dtype=np.float32)
    for i, label in enumerate(labels):
        a, b = rng.integers(3, 27, size=2)
        while a == b:
            a, b = rng.integers(3, 27, size=2)
        h, w = (min(a, b), max(a, b)) if label == HORIZONTAL else (max(a, b), min(a, b))
        top = rng.integers(0, IMAGE_SIDE - h + 1)
        left = rng.integers(0, IMAGE_SIDE - w + 1)
        X[i] = rectangle_image(top, left, h, w).ravel()
    return X, labels


def gen_rectangles(n_train: int = 50_000, n_test: int = 10_000, seed: int = 0):
    """Filled axis-aligned non-square white rectangles on black; wider
    rectangles are horizontal.  Returns ``(train, test)``."""
    rng = _rng(seed)
    out = []
    for split, n in (("train", n_train), ("test", n_test)):
        X, y = _rectangles(n, rng)
        out.append(LabeledDataset(X, y, ORIENTATION_NAMES, {"generator": "rectangles", "seed": seed, "split": split}))
    return tuple(out)


# -- orientation -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrientationSets:
    train: LabeledDataset
    lines: LabeledDataset
    diagonals: LabeledDataset
    boxes: LabeledDataset
    shapes: np.ndarray  # (n, 4) rows of (top, left, height, width) for diagonals/boxes


def orientation_train() -> LabeledDataset:
    X = np.zeros((2 * IMAGE_SIDE, IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    for r in range(IMAGE_SIDE):
        X[r, r, :] = 1.0
        X[IMAGE_SIDE + r, :, r] = 1.0
    y = np.repeat([HORIZONTAL, VERTICAL], IMAGE_SIDE)
    return LabeledDataset(X.reshape(len(X), -1), y, ORIENTATION_NAMES,
                          {"generator": "orientation", "split": "train"})


def box_image(top: int, left: int, h: int, w: int) -> np.ndarray:
    img = np.zeros((IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    bottom, right = top + h - 1, left + w - 1
    img[[top, bottom], left:right + 1] = 1.0
    img[top:bottom + 1, [left, right]] = 1.0
    return img


def diagonal_image(top: int, left: int, h: int, w: int, anti: bool) -> np.ndarray:
    img = np.zeros((IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    bottom, right = top + h - 1, left + w - 1
    rr, cc = draw_line(bottom, left, top, right) if anti else draw_line(top, left, bottom, right)
    img[rr, cc] = 1.0
    return img


def gen_orientation(seed: int = 0, per_shape: int = 50) -> OrientationSets:
    """Stripe training set plus diagonal, box and line test sets.

    For every non-square (height, width) at most ``per_shape`` distinct
    placements are drawn; wider shapes are horizontal.
    """
    rng = _rng(seed)
    rows, diag, box = [], [], []
    for h in range(1, IMAGE_SIDE + 1):
        for w in range(1, IMAGE_SIDE + 1):
            if h == w:
                continue
            n_pos = (IMAGE_SIDE - h + 1) * (IMAGE_SIDE - w + 1)
            picks = rng.choice(n_pos, size=min(per_shape, n_pos), replace=False)
            anti = rng.random(len(picks)) < 0.5
            for p, a in zip(np.sort(picks), anti):
                top, left = divmod(int(p), IMAGE_SIDE - w + 1)
                rows.append((top, left, h, w))
                diag.append(diagonal_image(top, left, h, w, bool(a)).ravel())
                box.append(box_image(top, left, h, w).ravel())
    shapes = np.array(rows, dtype=np.int64)
    y = np.where(shapes[:, 3] > shapes[:, 2], HORIZONTAL, VERTICAL)
    meta = {"generator": "orientation", "seed": seed}
    diagonals = LabeledDataset(np.array(diag), y, ORIENTATION_NAMES, {**meta, "split": "diagonals"})
    boxes = LabeledDataset(np.array(box), y, ORIENTATION_NAMES, {**meta, "split": "boxes"})
    thin = np.flatnonzero((shapes[:, 2] == 1) | (shapes[:, 3] == 1))
    lines = diagonals.subset(thin, split="lines")
    return OrientationSets(orientation_train(), lines, diagonals, boxes, shapes)


# -- Boolean logic -----------------------------------------------------------

def boolean_function(index: int, a: int, b: int) -> int:
    """Function ``index`` (0..15) has truth-table bit ``2a + b``."""
    return (index >> (2 * a + b)) & 1


def gen_logic() -> LabeledDataset:
    rows, labels = [], []
    for k in range(16):
        for a in (0, 1):
            for b in (0, 1):
                onehot = np.zeros(16)
                onehot[k] = 1.0
                rows.append(np.r_[LOGIC_SCALE * (2 * a - 1), LOGIC_SCALE * (2 * b - 1), onehot])
                labels.append(boolean_function(k, a, b))
    return LabeledDataset(np.array(rows), np.array(labels), ("False", "True"), {"generator": "logic"})


# -- TSP ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TspInstance:
    coords: np.ndarray
    visited: np.ndarray
    current: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2 or ((coords < 0) | (coords > 1)).any():
            raise ValueError("coords must be points in the unit square")
        visited = np.asarray(self.visited, dtype=bool)
        if visited.shape != (len(coords),) or not 0 <= self.current < len(coords):
            raise ValueError("visited/current do not match the map")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "visited", visited)

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.coords[:, None] - self.coords[None], axis=-1)


def encode_tsp(M, current: int, gone) -> np.ndarray:
    """55 features: upper-triangle distances, then 10 x one-hot(current).

    ``gone`` marks cities already left behind; every distance touching one
    of them reads as 10.
    """
    M = np.array(M, dtype=np.float64)
    gone = np.asarray(gone, dtype=bool)
    M[gone, :] = VISITED_DISTANCE
    M[:, gone] = VISITED_DISTANCE
    iu = np.triu_indices(N_CITIES, 1)
    onehot = np.zeros(N_CITIES)
    onehot[current] = CURRENT_SCALE
    return np.r_[M[iu], onehot]


def decode_tsp(x) -> tuple[np.ndarray, int]:
    """Inverse of :func:`encode_tsp` (visited cities read as distance 10)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (TSP_FEATURES,):
        raise ValueError(f"expected {TSP_FEATURES} features, got {x.shape}")
    M = np.zeros((N_CITIES, N_CITIES))
    iu = np.triu_indices(N_CITIES, 1)
    M[iu] = x[:len(iu[0])]
    M = M + M.T
    return M, int(np.argmax(x[len(iu[0]):]))


def encode_tsp_state(instance: TspInstance) -> np.ndarray:
    gone = instance.visited.copy()
    gone[instance.current] = False
    return encode_tsp(instance.distances, instance.current, gone)


def tsp_train() -> LabeledDataset:
    rows, labels = [], []
    for c in range(N_CITIES):
        for u in range(N_CITIES):
            if u == c:
                continue
            M = np.full((N_CITIES, N_CITIES), VISITED_DISTANCE)
            M[c, u] = M[u, c] = 0.0
            np.fill_diagonal(M, 0.0)
            rows.append(encode_tsp(M, c, np.zeros(N_CITIES, dtype=bool)))
            labels.append(u)
    return LabeledDataset(np.array(rows), np.array(labels), tuple(f"city{i}" for i in range(N_CITIES)),
                          {"generator": "tsp", "split": "train"})


def gen_tsp_maps(n: int = 5000, seed: int = 0) -> list[TspInstance]:
    rng = _rng(seed)
    out = []
    for _ in range(n):
        visited = np.zeros(N_CITIES, dtype=bool)
        visited[0] = True
        out.append(TspInstance(rng.random((N_CITIES, 2)), visited, 0))
    return out


def gen_tsp(n_test: int = 5000, seed: int = 0):
    """Returns ``(train dataset, test maps)``."""
    return tsp_train(), gen_tsp_maps(n_test, seed)


# -- BDT ---------------------------------------------------------------------

def truth_table_inputs() -> np.ndarray:
    """``T[t, f]`` is the value of feature ``f`` in truth-table row ``t``."""
    t = np.arange(TABLE_SIZE)
    return ((t[:, None] >> np.arange(N_BDT_FEATURES)) & 1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class TruthTableInstance:
    labels: np.ndarray
    tree: object = None  # leaf label, or (feature, branch for 0, branch for 1)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (TABLE_SIZE,) or not np.isin(labels, (0, 1)).all():
            raise ValueError(f"a truth table holds {TABLE_SIZE} binary labels")
        object.__setattr__(self, "labels", labels)


def tree_labels(tree) -> np.ndarray:
    T = truth_table_inputs()

    def walk(node, rows):
        if not isinstance(node, tuple):
            return {int(r): int(node) for r in rows}
        f, lo, hi = node
        out = walk(lo, rows[T[rows, f] == 0])
        out.update(walk(hi, rows[T[rows, f] == 1]))
        return out

    table = walk(tree, np.arange(TABLE_SIZE))
    return np.array([table[t] for t in range(TABLE_SIZE)])


def random_tree(rng, depth: int = 0, used: tuple = ()):
    if depth < BDT_MAX_DEPTH and rng.random() < BDT_BRANCH_PROB:
        free = [f for f in range(N_BDT_FEATURES) if f not in used]
        f = int(free[rng.integers(len(free))])
        return (f, random_tree(rng, depth + 1, used + (f,)), random_tree(rng, depth + 1, used + (f,)))
    return int(rng.integers(2))


def bdt_train() -> LabeledDataset:
    T = truth_table_inputs()
    rows, labels = [], []
    for f in range(N_BDT_FEATURES):
        for polarity in (0, 1):
            rows.append(T[:, f] ^ polarity)
            labels.append(f)
    return LabeledDataset(np.array(rows, dtype=np.float64), np.array(labels),
                          tuple(f"feature{f}" for f in range(N_BDT_FEATURES)), {"generator": "bdt", "split": "train"})


def gen_bdt_tables(n: int = 5000, seed: int = 0) -> list[TruthTableInstance]:
    """Unique truth tables of random trees (duplicates are discarded)."""
    rng = _rng(seed)
    seen, out = set(), []
    while len(out) < n:
        tree = random_tree(rng)
        labels = tree_labels(tree)
        key = labels.astype(np.uint8).tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(TruthTableInstance(labels, tree))
    return out


def gen_bdt(n_test: int = 5000, seed: int = 0):
    return bdt_train(), gen_bdt_tables(n_test, seed)


# -- MNIST -------------------------------------------------------------------

class IdxFormatError(ValueError):
    pass


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    data = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"{path}: header needs {header} bytes, file has {len(data)}")
    found = struct.unpack(">I", data[:4])[0]
    if found != magic:
        raise IdxFormatError(f"{path}: magic number at offset 0 is {found}, expected {magic}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    expected = header + int(np.prod(dims))
    if len(data) != expected:
        raise IdxFormatError(f"{path}: expected {expected} bytes for dimensions {dims}, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)


def load_mnist_idx(image_path, label_path, split: str = "") -> LabeledDataset:
    images = _read_idx(image_path, 2051, 3)
    labels = _read_idx(label_path, 2049, 1)
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    if len(labels) and labels.max() > 9:
        raise IdxFormatError(f"{label_path}: label {labels.max()} outside 0..9")
    X = images.reshape(len(images), -1).astype(np.float32) / np.float32(255.0)
    return LabeledDataset(X, labels.astype(np.int64), tuple(str(d) for d in range(10)),
                          {"generator": "mnist", "split": split})


def mnist_dir() -> Path:
    return Path(os.environ.get("ENN_DATA_DIR", DEFAULT_DATA_DIR))


def mnist_available(directory=None) -> bool:
    d = Path(directory) if directory else mnist_dir()
    return all((d / f).exists() for f in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                          "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"))


def load_mnist(directory=None) -> tuple[LabeledDataset, LabeledDataset]:
    d = Path(directory) if directory else mnist_dir()
    return (load_mnist_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte", "train"),
            load_mnist_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte", "test"))


# -- sampling ----------------------------------------------------------------

def balanced_subsample(ds: LabeledDataset, n_per_class: int, seed: int = 0) -> LabeledDataset:
    """Exactly ``n_per_class`` samples of every class, kept in dataset order."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be positive")
    rng = _rng(seed)
    picks = []
    for c in range(ds.n_classes):
        rows = np.flatnonzero(ds.y == c)
        if len(rows) < n_per_class:
            raise ValueError(f"class {ds.class_names[c]!r} has {len(rows)} samples, {n_per_class} requested")
        picks.append(rng.choice(rows, size=n_per_class, replace=False))
    return ds.subset(np.sort(np.concatenate(picks)), subsample=n_per_class, subsample_seed=seed)


def stratified_folds(y, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample; each class is dealt round-robin after shuffling."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("need at least two folds")
    rng = _rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        rows = rng.permutation(np.flatnonzero(y == c))
        fold[rows] = (np.arange(len(rows)) + offset) % k
        offset += len(rows)
    return fold


# -- persistence -------------------------------------------------------------

def _sha256(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()


def save_dataset(ds: LabeledDataset, directory, name: str) -> Path:
    """Writes ``name.X.npy``, ``name.y.npy`` and ``name.json`` (manifest)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.save(d / f"{name}.X.npy", ds.X, allow_pickle=False)
    np.save(d / f"{name}.y.npy", ds.y, allow_pickle=False)
    manifest = {
        "name": name, "meta": ds.meta, "class_names": list(ds.class_names),
        "counts": np.bincount(ds.y, minlength=ds.n_classes).tolist(),
        "shape": list(ds.X.shape), "dtype": str(ds.X.dtype),
        "sha256": {"X": _sha256(ds.X), "y": _sha256(ds.y)},
    }
    path = d / f"{name}.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return path


def load_dataset(directory, name: str) -> LabeledDataset:
    d = Path(directory)
    manifest = json.loads((d / f"{name}.json").read_text())
    X = np.load(d / f"{name}.X.npy", allow_pickle=False)
    y = np.load(d / f"{name}.y.npy", allow_pickle=False)
    for key, arr in (("X", X), ("y", y)):
        if _sha256(arr) != manifest["sha256"][key]:
            raise ValueError(f"{name}.{key}.npy does not match its manifest checksum")
    return LabeledDataset(X, y, tuple(manifest["class_names"]), manifest["meta"])
