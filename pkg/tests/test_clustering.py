import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import linkage

from enn.clustering import (candidate_heights, cut_for_total, kmeans, partition_classes,
                            total_clusters_at, ward_linkage)
from oracles import kmeans_exhaustive, ward_brute_force


def test_single_sample_has_no_merges():
    tree = ward_linkage([[1.0, 2.0]])
    assert tree.merges == () and tree.n_leaves == 1


def test_two_far_pairs_split_last():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.0, 10.1]])
    tree = ward_linkage(X)
    h = tree.heights
    assert h[-1] > h[:-1].max()
    labels = tree.labels_at(h[-1] - 1e-9)
    assert labels.tolist() == [0, 0, 1, 1]


def test_ward_rejects_bad_input():
    with pytest.raises(ValueError):
        ward_linkage(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        ward_linkage([[np.nan, 0.0], [1.0, 1.0]])


def test_eight_points_match_brute_force():
    X = np.random.default_rng(0).normal(size=(8, 3))
    tree = ward_linkage(X)
    ref = ward_brute_force(X)
    assert [m[:2] for m in tree.merges] == [m[:2] for m in ref]
    assert [m[3] for m in tree.merges] == [m[3] for m in ref]
    np.testing.assert_allclose(tree.heights, [m[2] for m in ref], rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12))
def test_ward_matches_brute_force_and_scipy(seed, n):
    X = np.random.default_rng(seed).normal(size=(n, 2))
    tree = ward_linkage(X)
    ref = ward_brute_force(X)
    assert [m[:2] for m in tree.merges] == [m[:2] for m in ref]
    np.testing.assert_allclose(tree.heights, [m[2] for m in ref], rtol=1e-10)
    np.testing.assert_allclose(tree.to_scipy(), linkage(X, "ward"), rtol=1e-10)
    assert np.all(np.diff(tree.heights) >= 0)


def test_tied_distances_use_lowest_pair():
    # unit square: four equal nearest-neighbour distances
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    tree = ward_linkage(X)
    assert tree.merges[0][:2] == (0, 1)
    assert [m[:2] for m in tree.merges] == [m[:2] for m in ward_brute_force(X)]


def two_class_trees():
    a = np.array([[0.0], [1.0], [5.0], [5.5]])
    b = np.array([[0.0], [0.2], [3.0], [9.0]])
    return [ward_linkage(a), ward_linkage(b)], [a, b]


def test_cut_degenerate_targets():
    trees, samples = two_class_trees()
    p = cut_for_total(trees, 2, samples)
    assert p.counts_per_class == (1, 1)
    assert p.cutoff >= max(t.heights.max() for t in trees)
    p = cut_for_total(trees, 8, samples)
    assert p.counts_per_class == (4, 4)
    assert p.n_subconcepts == 8


def test_cut_matches_exhaustive_height_scan():
    trees, samples = two_class_trees()
    for target in range(2, 9):
        p = cut_for_total(trees, target, samples)
        # scan every distinct height; keep counts >= target and take the least
        counts = [(total_clusters_at(trees, h), h) for h in candidate_heights(trees)]
        admissible = [c for c, _ in counts if c >= target]
        assert p.n_subconcepts == min(admissible)
        for c, t in zip(p.counts_per_class, trees):
            assert c == t.n_clusters_at(p.cutoff)


def test_cut_rejects_impossible_targets():
    trees, _ = two_class_trees()
    with pytest.raises(ValueError, match=r"\[2, 8\]"):
        cut_for_total(trees, 1)
    with pytest.raises(ValueError, match=r"\[2, 8\]"):
        cut_for_total(trees, 9)


def test_partition_means_and_dense_ids():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(size=(10, 2)), rng.normal(size=(10, 2)) + 5])
    y = np.r_[np.zeros(10, int), np.ones(10, int)]
    p = partition_classes(X, y, 2, 5)
    assert p.n_subconcepts >= 5
    for c in range(2):
        ids = p.local_ids[p.classes == c]
        assert sorted(set(ids.tolist())) == list(range(p.counts_per_class[c]))
    Xo = np.vstack([X[y == 0], X[y == 1]])
    for g in range(p.n_subconcepts):
        np.testing.assert_allclose(p.means[g], Xo[p.members(g)].mean(0))
    assert (p.subconcept_class[p.global_ids] == p.classes).all()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 14))
def test_cut_count_is_least_admissible(seed, target):
    rng = np.random.default_rng(seed)
    trees = [ward_linkage(rng.normal(size=(rng.integers(1, 8), 2))) for _ in range(2)]
    total = sum(t.n_leaves for t in trees)
    if not 2 <= target <= total:
        return
    p = cut_for_total(trees, target)
    achievable = {total_clusters_at(trees, h) for h in candidate_heights(trees)}
    assert p.n_subconcepts == min(c for c in achievable if c >= target)


def test_kmeans_k_equals_n():
    X = np.random.default_rng(0).normal(size=(6, 2))
    r = kmeans(X, 6, seed=1)
    assert r.inertia == pytest.approx(0.0, abs=1e-20)
    assert sorted(r.assignment.tolist()) == list(range(6))


def test_kmeans_single_cluster_is_mean():
    X = np.random.default_rng(0).normal(size=(9, 3))
    r = kmeans(X, 1)
    np.testing.assert_allclose(r.centroids[0], X.mean(0))


def test_kmeans_two_blobs_match_exhaustive_partition():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(size=(4, 2)) * 0.3, rng.normal(size=(4, 2)) * 0.3 + 6])
    r = kmeans(X, 2, seed=0)
    assert len(set(r.assignment[:4])) == 1 and len(set(r.assignment[4:])) == 1
    assert r.assignment[0] != r.assignment[4]
    assert r.inertia == pytest.approx(kmeans_exhaustive(X, 2), rel=1e-12)


def test_kmeans_rejects_bad_k():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_kmeans_inertia_nonincreasing(seed, k):
    X = np.random.default_rng(seed).normal(size=(30, 2))
    r = kmeans(X, k, seed=seed)
    assert all(b <= a + 1e-12 for a, b in zip(r.history, r.history[1:]))
    assert r.iterations <= 300


def test_kmeans_reseeds_empty_cluster():
    # duplicated points make k-means++ pick the same location twice
    X = np.array([[0.0, 0.0]] * 5 + [[1.0, 0.0]])
    r = kmeans(X, 2, seed=0)
    assert set(r.assignment.tolist()) == {0, 1}
