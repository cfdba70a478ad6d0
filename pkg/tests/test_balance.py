import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cxrseverity.balance import SmoteConfig, balance_dataset, knn_indices, smote_oversample, smote_sample
from cxrseverity.dataset import LabeledDataset
from oracles import brute_knn


def test_knn_one_dimensional():
    X = np.array([[0.0], [1.0], [10.0]])
    assert knn_indices(X, 0, 1).tolist() == [1]
    assert knn_indices(X, 2, 2).tolist() == [1, 0]


def test_knn_duplicate_is_nearest():
    X = np.array([[5.0, 5.0], [0.0, 0.0], [5.0, 5.0]])
    assert knn_indices(X, 0, 1).tolist() == [2]


def test_knn_ties_to_lower_index():
    X = np.array([[0.0], [1.0], [-1.0], [1.0]])
    assert knn_indices(X, 0, 3).tolist() == [1, 2, 3]


def test_knn_k_too_large():
    with pytest.raises(ValueError):
        knn_indices(np.zeros((3, 2)), 0, 3)


@given(st.integers(2, 200).flatmap(lambda n: st.tuples(
    arrays(np.float64, (n, 2), elements=st.integers(-5, 5).map(float)),
    st.integers(0, n - 1), st.integers(1, n - 1))))
def test_knn_matches_exhaustive_sort(args):
    X, i, k = args
    assert knn_indices(X, i, k).tolist() == brute_knn(X.tolist(), i, k)


def test_knn_random_real_points(rng):
    X = rng.normal(size=(200, 3))
    for i in range(0, 200, 17):
        assert knn_indices(X, i, 10).tolist() == brute_knn(X.tolist(), i, 10)


def test_smote_sample_examples():
    x, xr = np.array([0.0, 0.0]), np.array([2.0, 4.0])
    assert smote_sample(x, xr, 0.0).tolist() == [0, 0]
    assert smote_sample(x, xr, 1.0).tolist() == [2, 4]
    assert smote_sample(x, xr, 0.25).tolist() == [0.5, 1.0]
    with pytest.raises(ValueError):
        smote_sample(x, np.zeros(3), 0.5)


@given(arrays(np.float64, 4, elements=st.floats(-1e6, 1e6)),
       arrays(np.float64, 4, elements=st.floats(-1e6, 1e6)), st.floats(0, 1))
def test_smote_sample_inside_segment(x, xr, u):
    s = smote_sample(x, xr, u)
    assert np.all(s >= np.minimum(x, xr) - 1e-9 * (1 + np.abs(x) + np.abs(xr)))
    assert np.all(s <= np.maximum(x, xr) + 1e-9 * (1 + np.abs(x) + np.abs(xr)))


def test_oversample_empty_and_deterministic(rng):
    X = rng.normal(size=(12, 3))
    assert smote_oversample(X, 0, SmoteConfig(k=3)).shape == (0, 3)
    a = smote_oversample(X, 40, SmoteConfig(k=3, seed=9))
    b = smote_oversample(X, 40, SmoteConfig(k=3, seed=9))
    c = smote_oversample(X, 40, SmoteConfig(k=3, seed=10))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_oversample_points_lie_between_neighbours(rng):
    X = rng.normal(size=(15, 2))
    k = 4
    syn, pairs = smote_oversample(X, 200, SmoteConfig(k=k, seed=1), return_pairs=True)
    for s, (i, j) in zip(syn, pairs):
        assert j in brute_knn(X.tolist(), i, k)
        d = X[j] - X[i]
        u = np.dot(s - X[i], d) / np.dot(d, d)
        assert -1e-12 <= u <= 1 + 1e-12
        assert np.allclose(X[i] + u * d, s, atol=1e-12)


def test_oversample_needs_more_rows_than_k():
    with pytest.raises(ValueError):
        smote_oversample(np.zeros((5, 2)), 3, SmoteConfig(k=5))


def test_balance_already_balanced():
    ds = LabeledDataset(np.arange(36.0).reshape(18, 2), np.repeat([0, 1, 2], 6))
    out = balance_dataset(ds, SmoteConfig(k=5))
    assert np.array_equal(out.X, ds.X) and not out.synthetic.any()


def test_balance_to_largest_class(rng):
    y = np.repeat([0, 1, 2], [100, 40, 60])
    ds = LabeledDataset(rng.normal(size=(200, 3)), y)
    out = balance_dataset(ds, SmoteConfig(k=5, seed=2))
    assert out.class_counts() == {0: 100, 1: 100, 2: 100}
    assert np.array_equal(out.X[:200], ds.X) and np.array_equal(out.y[:200], y)
    assert int(out.synthetic.sum()) == 100
    assert np.sum(out.synthetic & (out.y == 1)) == 60
    assert np.sum(out.synthetic & (out.y == 2)) == 40


def test_balance_rejects_tiny_class():
    ds = LabeledDataset(np.zeros((13, 2)), [0] * 10 + [1] * 3)
    with pytest.raises(ValueError, match="class 1"):
        balance_dataset(ds, SmoteConfig(k=5))
