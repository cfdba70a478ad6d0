import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cxrseverity.classify import dumps_model, model_from_dict
from cxrseverity.classify.svm import (
    MultiClassSvm, SvmBinaryModel, dual_objective, rbf_gram, rbf_kernel, scale_gamma,
    smo_solve, svm_predict, svm_train, svm_train_binary, vote,
)
from oracles import brute_force_dual

vec3 = arrays(np.float64, 3, elements=st.floats(-50, 50))


def test_kernel_examples():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 7.0) == 1.0
    assert rbf_kernel([0.0, 0.0], [30.0, -4.0], 0.0) == 1.0
    assert rbf_kernel([0.0, 0.0], [1.0, 1.0], 0.5) == pytest.approx(0.3678794, abs=1e-7)
    assert rbf_kernel([0.0, 0.0], [1.0, 1.0], 0.5) == math.exp(-1)


def test_kernel_errors():
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [0.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [1.0], -1.0)


@given(vec3, vec3, st.floats(0, 10))
def test_kernel_symmetric_and_bounded(a, b, g):
    k = rbf_kernel(a, b, g)
    assert k == rbf_kernel(b, a, g)
    assert 0.0 <= k <= 1.0


@given(st.integers(1, 20).flatmap(lambda n: arrays(np.float64, (n, 3), elements=st.floats(-5, 5))),
       st.floats(0.01, 5))
def test_gram_positive_semidefinite(X, g):
    K = rbf_gram(X, X, g)
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_gram_matches_pointwise(rng):
    A, B = rng.normal(size=(5, 4)), rng.normal(size=(3, 4))
    K = rbf_gram(A, B, 0.3)
    for i in range(5):
        for j in range(3):
            assert K[i, j] == pytest.approx(rbf_kernel(A[i], B[j], 0.3), rel=1e-12)


def test_scale_gamma():
    X = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert scale_gamma(X) == 1.0 / (2 * 1.0)
    assert scale_gamma(np.ones((4, 3))) == 1.0


def _tiny_problem(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(2, 7))
    X = r.normal(size=(n, 2))
    y = np.where(r.random(n) < 0.5, -1.0, 1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y, float(r.choice([0.1, 1.0, 10.0]))


@pytest.mark.parametrize("seed", range(10))
def test_smo_matches_exhaustive_dual(seed):
    X, y, C = _tiny_problem(seed)
    K = rbf_gram(X, X, 0.7)
    best, _ = brute_force_dual(K, y, C)
    res = smo_solve(K, y, C, tol=1e-10, max_iter=100_000)
    assert res.converged
    assert abs(dual_objective(res.alpha, K, y) - best) <= 1e-4


def _kkt_gap(alpha, K, y, C):
    # m(a) - M(a) recomputed from scratch.
    G = (np.outer(y, y) * K) @ alpha - 1.0
    s = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return s[up].max() - s[low].min()


@pytest.mark.parametrize("seed", range(5))
def test_smo_kkt_and_dual_constraints(seed):
    r = np.random.default_rng(100 + seed)
    X = r.normal(size=(40, 3))
    y = np.where(X[:, 0] + 0.5 * r.normal(size=40) > 0, 1.0, -1.0)
    K = rbf_gram(X, X, 0.5)
    res = smo_solve(K, y, 1.0, tol=1e-10)
    assert res.converged
    a = res.alpha
    assert a.min() >= -1e-8 and a.max() <= 1.0 + 1e-8
    assert abs(a @ y) <= 1e-8
    assert _kkt_gap(a, K, y, 1.0) <= 1e-8


def test_one_dimensional_separable():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([-1, -1, 1, 1])
    m = svm_train_binary(X, y, C=10, gamma=1.0)
    assert np.array_equal(np.sign(m.decision_function(X)), y)


def test_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1, 1, -1, -1])
    m = svm_train_binary(X, y, C=10, gamma=1.0)
    f = m.decision_function(X)
    assert np.all(f * y > 0)


def test_train_errors():
    X = np.zeros((3, 2))
    with pytest.raises(ValueError, match="single class"):
        svm_train_binary(X, [1, 1, 1])
    with pytest.raises(ValueError, match="C must be positive"):
        svm_train_binary(X, [1, -1, 1], C=0)
    with pytest.raises(ValueError):
        svm_train_binary(X, [0, 1, 1])
    with pytest.raises(ValueError, match="single class"):
        svm_train(X, [2, 2, 2])


def test_unconverged_run_is_reported(rng):
    X = rng.normal(size=(60, 2))
    y = np.where(rng.random(60) < 0.5, 1, -1)
    m = svm_train_binary(X, y, C=100.0, gamma=5.0, tol=1e-12, max_passes=1)
    assert not m.converged and m.iterations == 60


def test_vote_unanimous_and_ties():
    d = {(0, 1): np.array([1.0]), (0, 2): np.array([2.0]), (1, 2): np.array([0.5])}
    assert vote([0, 1, 2], d).tolist() == [0]
    # Circular: 0 beats 1, 1 beats 2, 2 beats 0. Class 1 has the largest margin.
    circ = {(0, 1): np.array([0.2]), (1, 2): np.array([0.9]), (0, 2): np.array([-0.4])}
    assert vote([0, 1, 2], circ).tolist() == [1]
    # Equal magnitudes fall through to the lowest index.
    flat = {(0, 1): np.array([0.5]), (1, 2): np.array([0.5]), (0, 2): np.array([-0.5])}
    assert vote([0, 1, 2], flat).tolist() == [0]
    # A zero decision counts for the first class of the pair.
    assert vote([3, 7], {(3, 7): np.array([0.0, -1e-9])}).tolist() == [3, 7]


def test_circular_tie_is_deterministic():
    # Three equidistant points, one per class: every pair is symmetric, so the
    # centroid receives a circular or fully tied vote.
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    m = svm_train(X, [0, 1, 2], C=1.0, gamma=1.0)
    probe = np.array([[0.5, math.sqrt(3) / 6]] * 4)
    first = m.predict(probe)
    for _ in range(5):
        assert np.array_equal(m.predict(probe), first)
    assert len(set(first.tolist())) == 1


def _blobs(seed, n=200):
    r = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    centres = np.array([[-2.0, -2.0], [2.0, 2.0]])
    return centres[y] + r.normal(size=(n, 2)), y


def test_blobs_training_points_classified(rng):
    X, y = _blobs(3)
    m = svm_train(X, y)
    deep = [int(np.argmin(np.linalg.norm(X - c, axis=1))) for c in ([-2, -2], [2, 2])]
    for i in deep:
        assert svm_predict(m, X[i]) == y[i]
    with pytest.raises(ValueError, match="features"):
        m.predict(np.zeros((1, 3)))


def test_json_round_trip_is_bit_exact():
    X, y = _blobs(4, 90)
    y = y.copy()
    y[::3] = 2
    m = svm_train(X, y, C=2.0)
    back = model_from_dict(json.loads(dumps_model(m)))
    assert isinstance(back, MultiClassSvm)
    probe = np.random.default_rng(1).normal(size=(50, 2)) * 3
    a, b = m.pairwise_decisions(probe), back.pairwise_decisions(probe)
    for k in a:
        assert np.array_equal(a[k], b[k])
    assert dumps_model(back) == dumps_model(m)


def test_empty_support_set_round_trip():
    m = SvmBinaryModel(np.zeros((0, 2)), np.zeros(0), 0.25, 1.0, 1.0)
    back = SvmBinaryModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert back.decision_function(np.ones((2, 2))).tolist() == [0.25, 0.25]


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_training_order_does_not_matter(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(30, 2))
    y = r.integers(0, 3, 30)
    y[:3] = [0, 1, 2]
    perm = r.permutation(30)
    a, b = svm_train(X, y), svm_train(X[perm], y[perm])
    probe = r.normal(size=(20, 2))
    assert np.array_equal(a.predict(probe), b.predict(probe))
    assert dumps_model(a) == dumps_model(b)
