import numpy as np
import pytest
from scipy.signal import correlate2d

from enn.conv import (CennModel, ConvLayer, ConvSpec, as_maps, conv_forward, conv_layer, convolve,
                      learn_conv_filters, max_pool, pad_to, receptive_field, sample_windows, train_cenn,
                      visualize_filter, weighted_side_means)
from enn.datasets import gen_rectangles
from enn.model import sigmoid
from enn.train import EnnHyperparams, SgdConfig


def test_sample_windows_come_from_their_images():
    rng = np.random.default_rng(0)
    imgs = rng.random((12, 9, 9))
    labels = np.repeat([0, 1, 2], 4)
    win, pos = sample_windows(imgs, labels, 5, (3, 4), seed=1, return_positions=True)
    assert win.shape == (15, 12)
    for w, (i, t, l), c in zip(win, pos, np.repeat([0, 1, 2], 5)):
        assert labels[i] == c
        assert 0 <= t <= 6 and 0 <= l <= 5
        np.testing.assert_array_equal(w, imgs[i, t:t + 3, l:l + 4].ravel())
    with pytest.raises(ValueError, match="larger"):
        sample_windows(imgs, labels, 1, (10, 3))


def test_convolve_matches_scipy_valid_correlation():
    rng = np.random.default_rng(1)
    maps = rng.normal(size=(3, 2, 8, 7))
    layer = ConvLayer(rng.normal(size=(4, 2, 3, 3)), rng.normal(size=4))
    out = convolve(maps, layer)
    assert out.shape == (3, 4, 6, 5)
    for n in range(3):
        for f in range(4):
            ref = sum(correlate2d(maps[n, c], layer.weights[f, c], mode="valid") for c in range(2)) + layer.biases[f]
            np.testing.assert_allclose(out[n, f], ref, atol=1e-12)


def test_max_pool_and_odd_sizes():
    m = np.arange(16.0).reshape(1, 1, 4, 4)
    np.testing.assert_array_equal(max_pool(m)[0, 0], [[5, 7], [13, 15]])
    with pytest.raises(ValueError, match="cannot be pooled"):
        max_pool(np.zeros((1, 1, 5, 4)))


def test_two_layer_shapes_and_receptive_field():
    rng = np.random.default_rng(2)
    l1 = ConvLayer(rng.normal(size=(6, 1, 5, 5)), np.zeros(6))
    l2 = ConvLayer(rng.normal(size=(16, 6, 5, 5)), np.zeros(16))
    x = pad_to(rng.random((3, 784)))
    assert x.shape == (3, 1, 32, 32)
    assert conv_forward(x, [l1, l2]).shape == (3, 16 * 5 * 5)
    # 5x5 kernel, 2x2 pool, 5x5 kernel: 5 + 1 + 4 * 2 = 14 pixels at stride 2
    assert receptive_field([l1, l2]) == ((14, 14), 2)
    assert receptive_field([l1]) == ((5, 5), 1)


def test_weighted_side_means_example():
    windows = np.array([[1.0, 2.0], [3.0, 5.0]])
    pos, neg = weighted_side_means(windows, np.array([0.5, 1.0]))
    np.testing.assert_array_equal(pos, windows[1])
    assert neg is None
    pos, neg = weighted_side_means(windows, np.array([0.9, 0.2]))
    np.testing.assert_array_equal(pos, windows[0])
    np.testing.assert_array_equal(neg, windows[1])


def test_filters_separate_their_own_cluster():
    rng = np.random.default_rng(3)
    centers = np.eye(4) * 4
    windows = np.vstack([c + 0.1 * rng.normal(size=(30, 4)) for c in centers])
    hyper = learn_conv_filters(windows, 4, cost=10.0, multiplier=2.0, seed=0)
    unscaled = learn_conv_filters(windows, 4, cost=10.0, multiplier=1.0, seed=0)
    for h, u in zip(hyper, unscaled):
        np.testing.assert_allclose(h.w, 2 * u.w)
        assert h.b == pytest.approx(2 * u.b)
    # every cluster average fires exactly one filter
    fires = np.array([[h.value(c) > 0 for h in hyper] for c in centers])
    assert (fires.sum(axis=1) == 1).all() and (fires.sum(axis=0) == 1).all()
    with pytest.raises(ValueError):
        learn_conv_filters(windows, 1)


def test_visualize_first_layer_center_pixel_filter():
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 10.0
    layer = ConvLayer(w, np.array([-5.0]))
    rng = np.random.default_rng(4)
    imgs = (rng.random((20, 6, 6)) > 0.5).astype(float)
    vis = visualize_filter([layer], 0, 0, imgs)
    assert vis.positive[0, 1, 1] == pytest.approx(1.0) and vis.negative[0, 1, 1] == pytest.approx(0.0)
    assert not vis.positive_empty and not vis.negative_empty


def test_visualize_second_layer_uses_full_receptive_field():
    rng = np.random.default_rng(5)
    l1 = conv_layer([type("H", (), {"w": rng.normal(size=9), "b": 0.0})()], 1, (3, 3))
    l2 = ConvLayer(rng.normal(size=(2, 1, 3, 3)), np.zeros(2))
    imgs = rng.random((4, 16, 16))
    vis = visualize_filter([l1, l2], 1, 1, imgs)
    # brute-force weighted means of every 8x8 patch at stride 2
    pooled = max_pool(sigmoid(convolve(as_maps(imgs), l1)))
    out = sigmoid(convolve(pooled, l2))[:, 1]
    sides = {True: ([], []), False: ([], [])}
    for n in range(4):
        for i in range(out.shape[1]):
            for j in range(out.shape[2]):
                patches, weights = sides[bool(out[n, i, j] >= 0.5)]
                patches.append(imgs[n, 2 * i:2 * i + 8, 2 * j:2 * j + 8])
                weights.append(abs(out[n, i, j] - 0.5))
    for got, (patches, weights) in ((vis.positive, sides[True]), (vis.negative, sides[False])):
        if not patches:
            assert got is None
            continue
        ref = np.tensordot(np.array(weights), np.array(patches), axes=1) / np.sum(weights)
        assert got.shape == (1, 8, 8)
        np.testing.assert_allclose(got[0], ref)


def test_cenn_on_rectangles_and_round_trip():
    train, test = gen_rectangles(200, 200, seed=0)
    hp = EnnHyperparams(6, svm_cost=1.0, svm_tol=1e-2, differentia_multiplier=2.0, subconcept_multiplier_max=5.0,
                        prune=False, final_sgd=SgdConfig(epochs=20))
    specs = [ConvSpec(4, (5, 5), windows_per_class=50), ConvSpec(6, (5, 5), windows_per_class=50)]
    model = train_cenn(train.X, train.y, specs, hp, seed=0, pad=32)
    assert model.features(test.X[:2]).shape == (2, 6 * 5 * 5)
    assert model.error_rate(test.X, test.y) < 0.35
    back = CennModel.from_bytes(model.to_bytes())
    np.testing.assert_array_equal(back.predict(test.X), model.predict(test.X))
    assert back.to_bytes() == model.to_bytes()
