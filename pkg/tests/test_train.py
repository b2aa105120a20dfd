import math

import numpy as np
import pytest

from enn.datasets import gen_logic
from enn.model import SYMBOLIC
from enn.train import (EnnHyperparams, EnnModel, SgdConfig, TrainingError, concept_loss_and_grad,
                       count_support_vectors, direct_wiring, prune_subconcept, task_seed, train_enn)


def blobs(seed=0, per=15):
    """Three classes, each made of two well-separated clumps in the plane."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [6, 6], [0, 6], [6, 12], [12, 0], [12, 6.0]])
    X = np.vstack([c + 0.3 * rng.normal(size=(per, 2)) for c in centers])
    y = np.repeat([0, 0, 1, 1, 2, 2], per)
    return X, y


SYMBOLIC_HP = EnnHyperparams(6, svm_cost=1e3, differentia_multiplier=math.inf, prune=False)


def test_logic_symbolic_network():
    ds = gen_logic()
    hp = EnnHyperparams(8, svm_cost=1e3, differentia_multiplier=math.inf, margin_fraction=0.5,
                        symbolic_tolerance=1e-6)
    model = train_enn(ds.X, ds.y, hp, seed=7)
    assert model.error_rate(ds.X, ds.y) == 0.0
    trace = model.network.forward(ds.X)
    for a in trace.activations:
        assert np.isin(a, (0.0, 0.5, 1.0)).all()
    assert all(layer.activation == SYMBOLIC for layer in model.network.layers)


def test_differentiae_separate_their_pairs():
    X, y = blobs()
    model = train_enn(X, y, SYMBOLIC_HP)
    assert model.report["differentiae_before_pruning"] == 12  # 6 subconcepts, pairs across classes
    H = model.network.forward(X).activations[0]
    p = model.partition
    # members are rows of the class-major order; map back through the sorted labels
    order = np.argsort(y, kind="stable")
    for k, (a, b) in enumerate(model.catalog.pairs):
        assert (H[order[p.members(a)], k] == 1.0).all()
        assert (H[order[p.members(b)], k] == 0.0).all()
    assert model.error_rate(X, y) == 0.0
    assert model.network.widths == [12, 6, 3]


def test_round_trip_and_determinism():
    X, y = blobs(1)
    hp = EnnHyperparams(6, svm_cost=10.0, differentia_multiplier=2.0, subconcept_multiplier_max=5.0,
                        final_sgd=SgdConfig(epochs=5))
    a = train_enn(X, y, hp, seed=3)
    b = train_enn(X, y, hp, seed=3, jobs=2)
    assert a.to_bytes() == b.to_bytes()
    back = EnnModel.from_bytes(a.to_bytes())
    np.testing.assert_array_equal(back.network.predict_proba(X), a.network.predict_proba(X))
    assert back.to_bytes() == a.to_bytes()
    assert count_support_vectors(a) == len(a.support_vector_ids) > 0
    assert a.support_vector_ids <= set(range(len(y)))


def test_task_seeds():
    assert task_seed(0, 1, 2) == task_seed(0, 1, 2)
    assert len({task_seed(0, 1, 2), task_seed(0, 2, 1), task_seed(1, 1, 2)}) == 3


def test_concept_gradients_match_central_differences():
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(9, 5))
    y = rng.integers(0, 3, 9)
    W, b, m = rng.normal(size=(3, 5)), rng.normal(size=3), 1.7
    _, dW, db, dm = concept_loss_and_grad(W, b, m, Z, y)
    h = 1e-6

    def loss(W_, b_, m_):
        return concept_loss_and_grad(W_, b_, m_, Z, y)[0]

    fdW = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        fdW[idx] = (loss(W + E, b, m) - loss(W - E, b, m)) / (2 * h)
    fdb = np.array([(loss(W, b + h * e, m) - loss(W, b - h * e, m)) / (2 * h) for e in np.eye(3)])
    fdm = (loss(W, b, m + h) - loss(W, b, m - h)) / (2 * h)
    assert np.linalg.norm(dW - fdW) < 1e-5 * np.linalg.norm(fdW)
    assert np.linalg.norm(db - fdb) < 1e-5 * np.linalg.norm(fdb)
    assert abs(dm - fdm) < 1e-5 * abs(fdm)


def test_direct_wiring():
    W, b = direct_wiring(np.array([0, 0, 1, 2]), 3)
    assert W.tolist() == [[10, 10, 0, 0], [0, 0, 10, 0], [0, 0, 0, 10]]
    assert b.tolist() == [-5, -5, -5]


def test_pruning_drops_noise_features_and_stops_on_margin():
    rng = np.random.default_rng(5)
    n = 40
    signal = np.r_[np.ones(n), -np.ones(n)]
    H = np.c_[signal, 0.01 * rng.normal(size=(2 * n, 3))]
    pos, neg = np.arange(n), np.arange(n, 2 * n)
    rec = prune_subconcept(H, pos, neg, [0, 1, 2, 3], EnnHyperparams(2, svm_cost=100.0), seed=0)
    assert rec.kept_features == (0,) and rec.halted_by == "single"
    assert rec.final_error == 0.0
    # two equally informative features: dropping one shrinks the margin from sqrt(2) to 1
    H2 = np.c_[signal, signal]
    rec = prune_subconcept(H2, pos, neg, [0, 1], EnnHyperparams(2, svm_cost=100.0, margin_fraction=0.9), 0)
    assert rec.halted_by == "margin" and rec.kept_features == (0, 1)
    assert rec.initial_margin == pytest.approx(math.sqrt(2), rel=1e-3)
    rec = prune_subconcept(H2, pos, neg, [0, 1], EnnHyperparams(2, svm_cost=100.0, margin_fraction=0.5), 0)
    assert rec.halted_by == "single" and rec.final_margin == pytest.approx(1.0, rel=1e-3)
    rec = prune_subconcept(H2, pos, neg, [0, 1], EnnHyperparams(2, svm_cost=100.0, prune=False), 0)
    assert rec.halted_by == "disabled" and rec.kept_features == (0, 1)


def test_input_validation():
    X, y = blobs()
    with pytest.raises(TrainingError, match="two classes"):
        train_enn(X, np.zeros(len(y), int), SYMBOLIC_HP)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(TrainingError, match="finite"):
        train_enn(bad, y, SYMBOLIC_HP)
    with pytest.raises(ValueError):
        EnnHyperparams(0)
    with pytest.raises(ValueError):
        EnnHyperparams(3, concept_init="random")
    assert EnnHyperparams.from_dict(SYMBOLIC_HP.to_dict()) == SYMBOLIC_HP
