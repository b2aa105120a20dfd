"""Ward agglomerative clustering, the single-cutoff subconcept partition, and
k-means for image windows."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist, pdist, squareform

KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class LinkageTree:
    """Merge sequence; leaves are ``0..n-1`` and merge ``s`` creates ``n + s``."""
    merges: tuple  # (cluster_a, cluster_b, height, new_size), cluster_a < cluster_b
    n_leaves: int

    def __post_init__(self):
        if len(self.merges) != max(self.n_leaves - 1, 0):
            raise ValueError(f"{self.n_leaves} leaves need {self.n_leaves - 1} merges, got {len(self.merges)}")

    @property
    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges], dtype=np.float64)

    def to_scipy(self) -> np.ndarray:
        """The tree as a scipy-style ``(n-1, 4)`` linkage matrix."""
        return np.array([[a, b, h, s] for a, b, h, s in self.merges], dtype=np.float64).reshape(-1, 4)

    def n_clusters_at(self, height: float) -> int:
        return self.n_leaves - int(np.count_nonzero(self.heights <= height))

    def labels_at(self, height: float) -> np.ndarray:
        """Cluster labels after applying every merge with height <= ``height``.

        Labels are dense and numbered in order of each cluster's lowest sample.
        """
        n = self.n_leaves
        parent = np.arange(2 * n - 1) if n else np.zeros(0, dtype=np.int64)
        for step, (a, b, h, _) in enumerate(self.merges):
            if h > height:
                break
            parent[a] = n + step
            parent[b] = n + step
        roots = np.empty(n, dtype=np.int64)
        for i in range(n):
            r = i
            while parent[r] != r:
                r = parent[r]
            roots[i] = r
        _, first = np.unique(roots, return_index=True)
        order = {roots[i]: k for k, i in enumerate(np.sort(first))}
        return np.array([order[r] for r in roots], dtype=np.int64)


@njit(cache=True)
def _ward_merges(D):
    """Generic agglomeration with nearest-neighbour caching.

    ``D`` holds Euclidean distances and is overwritten.  The merged cluster
    takes the lower slot; ties go to the lowest (slot_i, slot_j) pair.
    Returns ``(slot_a, slot_b, height)`` per step.
    """
    n = D.shape[0]
    size = np.ones(n)
    active = np.ones(n, dtype=np.bool_)
    nn = np.full(n, -1)
    nn_d = np.full(n, np.inf)
    out_a = np.empty(max(n - 1, 0), dtype=np.int64)
    out_b = np.empty(max(n - 1, 0), dtype=np.int64)
    out_h = np.empty(max(n - 1, 0))
    for i in range(n):
        for j in range(i + 1, n):
            if D[i, j] < nn_d[i]:
                nn_d[i] = D[i, j]
                nn[i] = j
    for step in range(n - 1):
        best = np.inf
        i = -1
        for k in range(n):
            if active[k] and nn[k] >= 0 and nn_d[k] < best:
                best = nn_d[k]
                i = k
        j = nn[i]
        out_a[step] = i
        out_b[step] = j
        out_h[step] = best
        ni = size[i]
        nj = size[j]
        dij2 = D[i, j] * D[i, j]
        for k in range(n):
            if not active[k] or k == i or k == j:
                continue
            nk = size[k]
            dik = D[i, k] if i < k else D[k, i]
            djk = D[j, k] if j < k else D[k, j]
            v = ((ni + nk) * dik * dik + (nj + nk) * djk * djk - nk * dij2) / (ni + nj + nk)
            v = np.sqrt(max(v, 0.0))
            if i < k:
                D[i, k] = v
            else:
                D[k, i] = v
        active[j] = False
        size[i] = ni + nj
        nn[j] = -1
        nn_d[j] = np.inf
        for k in range(n):
            if not active[k]:
                continue
            if k == i or nn[k] == i or nn[k] == j:
                nn_d[k] = np.inf
                nn[k] = -1
                for m in range(k + 1, n):
                    if active[m] and D[k, m] < nn_d[k]:
                        nn_d[k] = D[k, m]
                        nn[k] = m
            elif k < i:
                v = D[k, i]
                if v < nn_d[k] or (v == nn_d[k] and i < nn[k]):
                    nn_d[k] = v
                    nn[k] = i
    return out_a, out_b, out_h


def ward_linkage(X) -> LinkageTree:
    """Ward minimum-variance linkage on the rows of ``X``.

    Heights follow the usual convention: the Euclidean distance for two
    singletons, and the Lance–Williams ward update thereafter.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("ward linkage needs at least one sample")
    if not np.isfinite(X).all():
        raise ValueError("ward linkage features must be finite")
    n = X.shape[0]
    if n == 1:
        return LinkageTree((), 1)
    D = squareform(pdist(X))
    slot_a, slot_b, heights = _ward_merges(D)
    ident = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    merges = []
    for step, (a, b, h) in enumerate(zip(slot_a, slot_b, heights)):
        ca, cb = sorted((int(ident[a]), int(ident[b])))
        sizes[a] += sizes[b]
        merges.append((ca, cb, float(h), int(sizes[a])))
        ident[a] = n + step
    return LinkageTree(tuple(merges), n)


@dataclass(frozen=True)
class SubconceptPartition:
    """Per-sample (class, subconcept) assignment from one global cutoff.

    Global subconcept ids are class-major: all subconcepts of class 0 first.
    """
    classes: np.ndarray
    local_ids: np.ndarray
    means: np.ndarray
    cutoff: float
    target: int
    counts_per_class: tuple = field(default=())

    @property
    def n_subconcepts(self) -> int:
        return int(sum(self.counts_per_class))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts_per_class)]).astype(np.int64)

    @property
    def global_ids(self) -> np.ndarray:
        return self.offsets[self.classes] + self.local_ids

    @property
    def subconcept_class(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts_per_class)), self.counts_per_class)

    def members(self, subconcept: int) -> np.ndarray:
        return np.flatnonzero(self.global_ids == subconcept)


def candidate_heights(trees) -> np.ndarray:
    """Every height at which some tree's cluster count changes, plus one below all."""
    hs = np.unique(np.concatenate([t.heights for t in trees] + [np.zeros(0)]))
    return np.concatenate([[-1.0], hs])


def total_clusters_at(trees, height: float) -> int:
    return sum(t.n_clusters_at(height) for t in trees)


def choose_cutoff(trees, target_total: int) -> float:
    """Largest candidate height whose total cluster count is still >= target."""
    n_classes = len(trees)
    n_total = sum(t.n_leaves for t in trees)
    if not n_classes <= target_total <= n_total:
        raise ValueError(f"target of {target_total} subconcepts is outside the achievable range "
                         f"[{n_classes}, {n_total}]")
    best = -1.0
    for h in candidate_heights(trees):
        if total_clusters_at(trees, h) >= target_total:
            best = float(h)
        else:
            break
    return best


def cut_for_total(trees, target_total: int, samples=None) -> SubconceptPartition:
    """Cut every class tree at one height so the summed cluster count is the
    smallest attainable count that is at least ``target_total``.

    ``samples`` is an optional per-class list of sample matrices used to fill
    in the subconcept means.
    """
    trees = list(trees)
    h = choose_cutoff(trees, target_total)
    classes, local, counts, means = [], [], [], []
    for c, tree in enumerate(trees):
        labels = tree.labels_at(h)
        k = int(labels.max()) + 1
        classes.append(np.full(tree.n_leaves, c, dtype=np.int64))
        local.append(labels)
        counts.append(k)
        if samples is not None:
            Xc = np.atleast_2d(np.asarray(samples[c], dtype=np.float64))
            means.extend(Xc[labels == s].mean(axis=0) for s in range(k))
    means_arr = np.array(means) if means else np.zeros((0, 0))
    return SubconceptPartition(np.concatenate(classes), np.concatenate(local), means_arr,
                               h, int(target_total), tuple(counts))


def partition_classes(X, labels, n_classes: int, target_total: int) -> SubconceptPartition:
    """Ward trees per class plus the global cut.  The returned partition
    lists samples class by class in their original order within each class;
    use :func:`sample_order` to map back."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    per_class = [X[labels == c] for c in range(n_classes)]
    if any(len(p) == 0 for p in per_class):
        raise ValueError("every class needs at least one training sample")
    trees = [ward_linkage(p) for p in per_class]
    return cut_for_total(trees, target_total, per_class)


def sample_order(labels, n_classes: int) -> np.ndarray:
    """Indices that list samples class by class (stable within a class)."""
    labels = np.asarray(labels)
    return np.concatenate([np.flatnonzero(labels == c) for c in range(n_classes)])


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    history: tuple
    iterations: int


def _kmeanspp(X, k, rng) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(X, k: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding.

    An empty cluster is re-seeded at the point farthest from its centroid.
    Ties in assignment go to the lowest centroid index.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not np.isfinite(X).all():
        raise ValueError("k-means features must be finite")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(X, k, rng)
    assignment = np.full(n, -1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = cdist(X, centroids, "sqeuclidean")
        new = d2.argmin(axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            far = int(d2[np.arange(n), new].argmax())
            new[far] = c
            d2[far] = np.inf
            d2[far, c] = 0.0
            counts = np.bincount(new, minlength=k)
        changed = not np.array_equal(new, assignment)
        assignment = new
        for c in range(k):
            centroids[c] = X[assignment == c].mean(axis=0)
        history.append(float(((X - centroids[assignment]) ** 2).sum()))
        if not changed:
            break
    return KMeansResult(centroids, assignment, history[-1], tuple(history), it)
