import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enn.datasets import (TABLE_SIZE, TspInstance, decode_tsp, gen_bdt_tables, gen_orientation, gen_tsp_maps,
                          orientation_train, truth_table_inputs, tree_labels)
from enn.tasks import (Route, cart_build, calibrate_orientation_threshold, gini_gains, nearest_neighbor_route,
                       oracle_bdt_policy, oracle_bdt_step, oracle_orientation, oracle_tsp_step, rollout_bdt,
                       rollout_tsp, route_length, threshold_search)


def brute_force_tour(coords) -> float:
    n = len(coords)
    return min(route_length(coords, (0,) + p) for p in itertools.permutations(range(1, n)))


def test_two_cities_have_one_route():
    inst = TspInstance(np.array([[0.1, 0.1], [0.9, 0.4]]), np.zeros(2, bool), 0)
    r = nearest_neighbor_route(inst)
    assert r.order == (0, 1)
    assert r.length == pytest.approx(2 * np.hypot(0.8, 0.3))


def test_collinear_cities_visited_in_coordinate_order():
    xs = np.array([0.5, 0.0, 0.9, 0.2, 0.7])
    inst = TspInstance(np.c_[xs, np.zeros(5)], np.zeros(5, bool), 1)
    assert nearest_neighbor_route(inst).order == (1, 3, 0, 4, 2)


def test_route_rejects_repeats():
    with pytest.raises(ValueError):
        Route((0, 1, 1), 1.0)


def test_nearest_neighbour_ties_go_to_lowest_index():
    coords = np.array([[0.5, 0.5], [0.5, 0.7], [0.5, 0.3], [0.9, 0.9]])
    assert nearest_neighbor_route(TspInstance(coords, np.zeros(4, bool), 0)).order[1] == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_greedy_tour_never_beats_optimum(seed):
    coords = np.random.default_rng(seed).random((7, 2))
    nn = nearest_neighbor_route(TspInstance(coords, np.zeros(7, bool), 0))
    assert nn.length >= brute_force_tour(coords) - 1e-12


def test_gated_oracle_rollout_is_nearest_neighbour():
    def policy(x, mask):
        M, c = decode_tsp(x)
        return oracle_tsp_step(M, c)

    for inst in gen_tsp_maps(40, seed=3):
        assert rollout_tsp(policy, inst).order == nearest_neighbor_route(inst).order


def test_literal_oracle_returns_a_city():
    M, c = gen_tsp_maps(1, seed=0)[0].distances, 0
    assert 0 <= oracle_tsp_step(M, c, literal=True) < 10


def test_threshold_search():
    S = np.array([[1.0, 5.0], [3.0, 5.0]])
    assert threshold_search(S, 0) == (0, 1)  # stops when raising leaves two, lowering then keeps both
    assert threshold_search(S, 4.5, np.array([[True, False], [True, True]])) == (1, 1)
    assert threshold_search(np.array([2.0, 7.0, 3.0]), 0) == (1,)
    assert threshold_search(np.array([2.0, 7.0, 3.0]), 20) == (1,)
    with pytest.raises(ValueError):
        threshold_search(np.ones(3), 0, np.zeros(3, bool))


def independent_depths(tree) -> np.ndarray:
    T = truth_table_inputs()
    out = []
    for row in T:
        node, d = tree, 0
        while isinstance(node, tuple):
            node = node[1 + row[node[0]]]
            d += 1
        out.append(d)
    return np.array(out)


def test_constant_table_is_a_single_leaf():
    for v in (0, 1):
        tree = cart_build(np.full(TABLE_SIZE, v))
        assert tree.root == v and tree.avg_depth == 0.0
        assert rollout_bdt(oracle_bdt_policy, np.full(TABLE_SIZE, v)).root == v


def test_single_feature_table():
    labels = truth_table_inputs()[:, 3]
    assert gini_gains(labels, {})[3] == pytest.approx(0.5)
    assert cart_build(labels).root == (3, 0, 1)
    assert rollout_bdt(oracle_bdt_policy, labels).root == (3, 0, 1)


def test_xor_table_ties_pick_feature_zero():
    T = truth_table_inputs()
    labels = T[:, 4] ^ T[:, 7]
    np.testing.assert_allclose(gini_gains(labels, {}), 0.0, atol=1e-15)
    tree = cart_build(labels)
    assert tree.root[0] == 0
    np.testing.assert_array_equal(tree.predict(), labels)


def test_depths_and_reproduction_on_random_tables():
    tables = gen_bdt_tables(100, seed=5)
    for t in tables:
        tree = cart_build(t.labels)
        np.testing.assert_array_equal(tree.depths(), independent_depths(tree.root))
        np.testing.assert_array_equal(tree.predict(), t.labels)
        np.testing.assert_array_equal(tree_labels(t.tree), t.labels)


def test_win_count_oracle_matches_gini_root():
    T = truth_table_inputs()
    disagreements = 0
    for t in gen_bdt_tables(300, seed=11):
        if (t.labels == t.labels[0]).all():
            continue
        disagreements += oracle_bdt_step(T, t.labels) != cart_build(t.labels).root[0]
    assert disagreements == 0


def test_oracle_policy_reproduces_tables():
    for t in gen_bdt_tables(30, seed=2):
        np.testing.assert_array_equal(rollout_bdt(oracle_bdt_policy, t).predict(), t.labels)


def test_orientation_oracle():
    train = orientation_train()
    tau = calibrate_orientation_threshold(train.X, train.y)
    assert tau == 27.0
    pred = [oracle_orientation(x, tau) for x in train.X]
    np.testing.assert_array_equal(pred, train.y)
    stripe = np.zeros((28, 28))
    stripe[9] = 1
    assert oracle_orientation(stripe, tau) == 0
    assert oracle_orientation(stripe.T, tau) == 1
    sets = gen_orientation(seed=0, per_shape=10)
    for ds in (sets.lines, sets.diagonals, sets.boxes):
        assert np.mean([oracle_orientation(x, tau) != y for x, y in zip(ds.X, ds.y)]) == 0.0
