import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kurtosis

from enn.analysis import (excess_kurtosis, firing_matrix, layer_weight_stats, lesion, lesion_study,
                          population_sparseness, ward_order, weight_stats, write_matrix_csv, write_pgm)
from enn.gdn import network_of, random_params
from enn.model import SIGMOID, SOFTMAX, Layer, Network


@pytest.fixture(scope="module")
def small_net():
    rng = np.random.default_rng(0)
    params = [p * 2 for p in random_params([6, 8, 5, 3], rng)]
    net = network_of(params, SOFTMAX, ("a", "b", "c"), {0: "layer1", 1: "layer2", 2: "layer3"})
    X = rng.random((90, 6))
    return net, X, np.arange(90) % 3


def test_excess_kurtosis_matches_scipy_and_normal_sample():
    rng = np.random.default_rng(1)
    v = rng.standard_t(5, size=2000)
    assert excess_kurtosis(v) == pytest.approx(kurtosis(v, fisher=True, bias=True))
    assert abs(excess_kurtosis(rng.normal(size=100_000))) < 0.1


def test_degenerate_and_sparsity():
    s = layer_weight_stats(np.full((3, 4), 0.7))
    assert s.degenerate and np.isnan(s.excess_kurtosis)
    s = layer_weight_stats(np.array([[1.0, -0.005, 0.0, 0.5]]))
    assert s.sparsity == 0.5 and not s.degenerate
    assert s.counts.sum() == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_weight_stats_invariant_under_permutation(seed):
    rng = np.random.default_rng(seed)
    W = rng.laplace(size=(7, 5))
    perm = rng.permutation(W.size)
    a, b = layer_weight_stats(W), layer_weight_stats(W.ravel()[perm].reshape(5, 7))
    assert a.excess_kurtosis == pytest.approx(b.excess_kurtosis, rel=1e-12, abs=1e-12)
    assert a.sparsity == b.sparsity
    np.testing.assert_array_equal(a.counts, b.counts)


def test_lesion_curve_endpoints(small_net):
    net, X, y = small_net
    curve = lesion_study(net, X, y, "layer2")
    assert curve.accuracy.shape == (6, 3) and len(curve.overall) == 6
    assert sorted(curve.order.tolist()) == list(range(5))
    # no deletions: the baseline, bit for bit
    assert curve.overall[0] == np.mean(net.predict(X) == y)
    # everything deleted: the output no longer depends on the input
    dead = lesion(net, 1, range(5))
    assert len(np.unique(dead.predict(X))) == 1
    c = dead.predict(X)[0]
    expected = np.zeros(3)
    expected[c] = 1.0
    np.testing.assert_array_equal(curve.accuracy[-1], expected)


def test_lesion_zeroes_only_outgoing_weights(small_net):
    net, _, _ = small_net
    cut = lesion(net, 0, [2, 5])
    assert (cut.layers[1].weights[:, [2, 5]] == 0).all()
    np.testing.assert_array_equal(cut.layers[1].weights[:, [0, 1, 3, 4, 6, 7]],
                                  net.layers[1].weights[:, [0, 1, 3, 4, 6, 7]])
    np.testing.assert_array_equal(cut.layers[0].weights, net.layers[0].weights)
    with pytest.raises(ValueError):
        lesion(net, 2, [0])


def test_collapse_indices():
    from enn.analysis import LesionCurve

    acc = np.array([[1.0, 1.0], [0.4, 1.0], [0.2, 0.9], [0.0, 0.3]])
    curve = LesionCurve(np.arange(3), acc, acc.mean(axis=1))
    assert curve.collapse_indices().tolist() == [1, 3]
    assert curve.collapse_variance() == pytest.approx(1.0)
    never = LesionCurve(np.arange(3), np.ones((4, 2)), np.ones(4))
    assert never.collapse_indices().tolist() == [4, 4]


def test_ward_order_groups_similar_rows():
    rng = np.random.default_rng(3)
    rows = np.vstack([rng.normal(0, 0.01, (3, 4)), rng.normal(5, 0.01, (3, 4))])[[0, 3, 1, 4, 2, 5]]
    order = ward_order(rows)
    groups = (rows[order, 0] > 2.5).astype(int)
    assert (np.diff(groups) != 0).sum() == 1
    assert ward_order(rows[:1]).tolist() == [0]


def test_firing_matrix(small_net):
    net, X, _ = small_net
    const = Layer(np.zeros((2, 6)), np.array([0.0, 3.0]), SIGMOID)
    net2 = Network((const, Layer(np.eye(2), np.zeros(2), SOFTMAX)), ("a", "b"))
    big = np.random.default_rng(4).random((500, 6))
    fm = firing_matrix(net2, big, 350, seed=0)
    assert fm.matrix.shape == (4, 350)
    assert (fm.matrix >= 0).all() and (fm.matrix <= 1).all()
    np.testing.assert_allclose(fm.matrix[:2].std(axis=1), 0.0, atol=1e-15)
    assert fm.sparseness[0] == pytest.approx(0.5)
    fm = firing_matrix(net, X, 40, seed=1)
    assert fm.matrix.shape == (8 + 5 + 3, 40)
    assert fm.layer_of_row.tolist() == [0] * 8 + [1] * 5 + [2] * 3
    acts = net.forward(X[fm.stimuli]).activations
    np.testing.assert_allclose(fm.matrix[:8], acts[0].T[fm.order[:8]])
    assert fm.sparseness[1] == population_sparseness(acts[1])
    np.testing.assert_array_equal(fm.stimuli, firing_matrix(net, X, 40, seed=1).stimuli)


def test_writers(tmp_path):
    m = np.array([[0.0, 0.5], [1.0, 0.25]])
    path = write_pgm(tmp_path / "m.pgm", m, scale=2)
    data = path.read_bytes()
    assert data.startswith(b"P5\n4 4\n255\n") and len(data) == len(b"P5\n4 4\n255\n") + 16
    text = write_matrix_csv(tmp_path / "m.csv", m, ["x", "y"]).read_text().splitlines()
    assert text == ["x,y", "0.0,0.5", "1.0,0.25"]


def test_weight_stats_per_layer(small_net):
    net, _, _ = small_net
    stats = weight_stats(net)
    assert len(stats) == 3
    assert stats[1].excess_kurtosis == pytest.approx(kurtosis(net.layers[1].weights.ravel()))
