import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enn.datasets import (IdxFormatError, LabeledDataset, balanced_subsample, bdt_train, decode_tsp,
                          encode_tsp, gen_bdt_tables, gen_logic, gen_orientation, gen_rectangles,
                          gen_tsp_maps, load_dataset, load_mnist, load_mnist_idx, mnist_available,
                          mnist_dir, save_dataset, stratified_folds, tree_labels, truth_table_inputs,
                          tsp_train)


@pytest.fixture(scope="module")
def orientation():
    return gen_orientation(seed=0)


def white_boxes(img):
    """Bounding box of the white pixels and whether they fill it."""
    rows, cols = np.nonzero(img)
    r0, r1, c0, c1 = rows.min(), rows.max(), cols.min(), cols.max()
    return (r1 - r0 + 1, c1 - c0 + 1), img[r0:r1 + 1, c0:c1 + 1].all()


def test_rectangles_are_filled_non_square_and_balanced():
    train, test = gen_rectangles(400, 101, seed=3)
    assert len(train) == 400 and len(test) == 101
    assert np.bincount(train.y).tolist() == [200, 200]
    assert abs(np.bincount(test.y)[0] - np.bincount(test.y)[1]) <= 1
    for x, label in zip(train.X, train.y):
        img = x.reshape(28, 28)
        assert set(np.unique(img).tolist()) == {0.0, 1.0}
        (h, w), filled = white_boxes(img)
        assert filled and h != w and 3 <= min(h, w) and max(h, w) <= 26
        assert label == (0 if w > h else 1)


def test_generators_are_deterministic():
    a, _ = gen_rectangles(50, 10, seed=7)
    b, _ = gen_rectangles(50, 10, seed=7)
    c, _ = gen_rectangles(50, 10, seed=8)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert a.X.tobytes() != c.X.tobytes()
    t1 = gen_bdt_tables(20, seed=1)
    t2 = gen_bdt_tables(20, seed=1)
    assert all((p.labels == q.labels).all() for p, q in zip(t1, t2))


def test_orientation_train_set(orientation):
    tr = orientation.train
    assert tr.X.shape == (56, 784)
    assert np.bincount(tr.y).tolist() == [28, 28]
    imgs = tr.X.reshape(-1, 28, 28)
    assert all(img.sum() == 28 for img in imgs)
    assert all((img.sum(axis=1) == 28).any() for img in imgs[:28])
    assert all((img.sum(axis=0) == 28).any() for img in imgs[28:])


def test_orientation_test_sets(orientation):
    shapes = orientation.shapes
    assert (shapes[:, 2] != shapes[:, 3]).all()
    keys = [tuple(r) for r in shapes]
    assert len(set(keys)) == len(keys)
    _, counts = np.unique(shapes[:, 2:], axis=0, return_counts=True)
    assert counts.max() == 50 and len(counts) == 28 * 28 - 28
    for x, (top, left, h, w), label in zip(orientation.boxes.X[::97], shapes[::97], orientation.boxes.y[::97]):
        img = x.reshape(28, 28)
        (bh, bw), _ = white_boxes(img)
        assert (bh, bw) == (h, w) and bh != bw
        assert label == (0 if w > h else 1)
        assert img[top, left] == 1 and img[top + h - 1, left + w - 1] == 1
    for x, (top, left, h, w) in zip(orientation.diagonals.X[::89], shapes[::89]):
        img = x.reshape(28, 28)
        assert white_boxes(img)[0] == (h, w)
        assert img.sum() == max(h, w)  # one pixel per step along the long side
    thin = orientation.lines.X.reshape(-1, 28, 28)
    assert len(thin) == int(((shapes[:, 2] == 1) | (shapes[:, 3] == 1)).sum())
    for img in thin:
        (h, w), filled = white_boxes(img)
        assert min(h, w) == 1 and filled


def test_logic_encoding():
    ds = gen_logic()
    assert ds.X.shape == (64, 18)
    assert (ds.X[:, 2:].sum(axis=1) == 1).all()
    assert set(ds.X[:, :2].ravel().tolist()) == {-2.0, 2.0}
    # enumerate the 16 functions independently from their output columns
    tables = {}
    for x, label in zip(ds.X, ds.y):
        k = int(np.argmax(x[2:]))
        tables.setdefault(k, {})[(x[0] > 0, x[1] > 0)] = int(label)
    outputs = {tuple(t[(a, b)] for a in (False, True) for b in (False, True)) for t in tables.values()}
    assert len(outputs) == 16
    AND, XOR = 8, 6
    assert tables[AND] == {(False, False): 0, (False, True): 0, (True, False): 0, (True, True): 1}
    assert tables[XOR] == {(False, False): 0, (False, True): 1, (True, False): 1, (True, True): 0}


def test_tsp_training_set():
    ds = tsp_train()
    assert ds.X.shape == (90, 55)
    for x, label in zip(ds.X, ds.y):
        M, c = decode_tsp(x)
        zero = [j for j in range(10) if j != c and M[c, j] == 0]
        assert zero == [label]
        assert x[45:].tolist() == [10.0 if j == c else 0.0 for j in range(10)]
    pairs = {(int(np.argmax(x[45:])), int(label)) for x, label in zip(ds.X, ds.y)}
    assert len(pairs) == 90


@settings(max_examples=30)
@given(st.integers(0, 1000), st.integers(0, 9), st.lists(st.booleans(), min_size=10, max_size=10))
def test_tsp_encoding_round_trip(seed, current, gone):
    gone = np.array(gone)
    gone[current] = False
    m = gen_tsp_maps(1, seed)[0]
    x = encode_tsp(m.distances, current, gone)
    M, c = decode_tsp(x)
    assert c == current
    keep = ~gone
    np.testing.assert_array_equal(M[np.ix_(keep, keep)], m.distances[np.ix_(keep, keep)])
    off = ~np.eye(10, dtype=bool)
    assert (M[gone[:, None] & off] == 10).all() and (M[gone[None, :] & off] == 10).all()


def test_bdt_training_tables():
    ds = bdt_train()
    assert ds.X.shape == (20, 1024)
    T = truth_table_inputs()
    for x, f in zip(ds.X, ds.y):
        assert (x == T[:, f]).all() or (x == 1 - T[:, f]).all()


def test_bdt_test_tables_unique_and_reproduce_their_trees():
    tables = gen_bdt_tables(200, seed=5)
    keys = {t.labels.tobytes() for t in tables}
    assert len(keys) == 200
    for t in tables[:20]:
        assert (tree_labels(t.tree) == t.labels).all()


def test_balanced_subsample():
    rng = np.random.default_rng(0)
    ds = LabeledDataset(rng.normal(size=(60, 3)), np.repeat([0, 1, 2], 20), ("a", "b", "c"))
    one = balanced_subsample(ds, 1, seed=2)
    assert len(one) == 3 and sorted(one.y.tolist()) == [0, 1, 2]
    full = balanced_subsample(ds, 20, seed=2)
    assert sorted(map(tuple, full.X.tolist())) == sorted(map(tuple, ds.X.tolist()))
    a, b = balanced_subsample(ds, 5, seed=9), balanced_subsample(ds, 5, seed=9)
    assert a.X.tobytes() == b.X.tobytes()
    with pytest.raises(ValueError):
        balanced_subsample(ds, 21)


def test_stratified_folds():
    y = np.repeat([0, 1], [13, 7])
    fold = stratified_folds(y, 5, seed=1)
    for f in range(5):
        counts = np.bincount(y[fold == f], minlength=2)
        assert 2 <= counts[0] <= 3 and 1 <= counts[1] <= 2


def test_persistence_round_trip_and_checksum(tmp_path):
    ds, _ = gen_rectangles(20, 2, seed=1)
    save_dataset(ds, tmp_path, "rect")
    back = load_dataset(tmp_path, "rect")
    assert back.X.tobytes() == ds.X.tobytes() and back.class_names == ds.class_names
    np.save(tmp_path / "rect.y.npy", np.zeros(20, dtype=np.int64))
    with pytest.raises(ValueError, match="checksum"):
        load_dataset(tmp_path, "rect")


def write_idx(path, magic, dims, payload):
    path.write_bytes(struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims) + payload)


def test_idx_reader_and_errors(tmp_path):
    img, lab = tmp_path / "img", tmp_path / "lab"
    write_idx(img, 2051, (2, 28, 28), bytes(range(256)) * 6 + bytes(2 * 784 - 1536))
    write_idx(lab, 2049, (2,), bytes([7, 2]))
    ds = load_mnist_idx(img, lab)
    assert ds.X.shape == (2, 784) and ds.y.tolist() == [7, 2]
    assert ds.X.max() == 1.0 and ds.X[0, 1] == pytest.approx(1 / 255)
    write_idx(lab, 2051, (2,), bytes([7, 2]))
    with pytest.raises(IdxFormatError, match="magic number at offset 0 is 2051, expected 2049"):
        load_mnist_idx(img, lab)
    write_idx(lab, 2049, (3,), bytes([7, 2]))
    with pytest.raises(IdxFormatError, match="expected 11 bytes .* found 10"):
        load_mnist_idx(img, lab)


@pytest.mark.skipif(not mnist_available(), reason="MNIST files not present")
def test_canonical_mnist_files():
    raw = (mnist_dir() / "t10k-labels-idx1-ubyte").read_bytes()
    # independent inspection of the header and first label byte
    assert raw[:8].hex() == "0000080100002710" and raw[8] == 7
    train, test = load_mnist()
    assert train.X.shape == (60000, 784) and test.X.shape == (10000, 784)
    assert test.y[0] == 7
    assert 0.0 <= test.X.min() and test.X.max() == 1.0
