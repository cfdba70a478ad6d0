"""RBF-kernel SVM trained by sequential minimal optimization, one-vs-one multiclass."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12


def rbf_kernel(x1, x2, gamma: float) -> float:
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x1.shape} vs {x2.shape}")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return float(np.exp(-gamma * np.sum((x1 - x2) ** 2)))


def rbf_gram(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def scale_gamma(X) -> float:
    """``1 / (n_features * var(X))``, falling back to 1 for constant data."""
    X = np.asarray(X, dtype=np.float64)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def canonical_order(X, y) -> np.ndarray:
    """Row order that depends only on the multiset of (row, label) pairs."""
    X = np.asarray(X)
    keys = [np.asarray(y)] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


@dataclass
class SvmBinaryModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    converged: bool = True
    iterations: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(f"expected {self.support_vectors.shape[1]} features, got {X.shape[1]}")
        if len(self.dual_coef) == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_gram(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def to_dict(self) -> dict:
        return {
            "n_features": int(self.support_vectors.shape[1]),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "C": self.C,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d) -> "SvmBinaryModel":
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        sv = sv.reshape(len(d["dual_coef"]), int(d.get("n_features", sv.shape[-1])))
        return cls(sv,
                   np.asarray(d["dual_coef"], dtype=np.float64), float(d["bias"]),
                   float(d["gamma"]), float(d["C"]), bool(d.get("converged", True)),
                   int(d.get("iterations", 0)))


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    gradient: np.ndarray
    converged: bool
    iterations: int


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int = 100_000) -> SmoResult:
    """Minimise 0.5 a'Qa - sum(a) s.t. 0 <= a <= C, y'a = 0, with Q = yy' * K.

    Pairs are chosen as the maximal violating ``i`` plus the second-order
    best ``j``; iteration stops once the KKT gap m(a) - M(a) drops below ``tol``.
    """
    n = len(y)
    y = y.astype(np.float64)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    converged = False
    it = 0
    while it < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            converged = True
            break
        up_idx = np.flatnonzero(up)
        i = int(up_idx[np.argmax(score[up_idx])])
        m_up = score[i]
        low_idx = np.flatnonzero(low)
        M_low = score[low_idx].min()
        if m_up - M_low <= tol:
            converged = True
            break
        cand = low_idx[score[low_idx] < m_up]
        b = m_up - score[cand]
        a = diag[i] + diag[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, TAU)
        j = int(cand[np.argmin(-(b * b) / a)])

        # Two-variable update in the LIBSVM formulation.
        Qi, Qj = Q[i], Q[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * Qi[j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Qi[j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        G += Qi * (alpha[i] - ai_old) + Qj * (alpha[j] - aj_old)
        it += 1

    score = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(score[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = score[up].max() if up.any() else score[low].min()
        lo = score[low].min() if low.any() else hi
        bias = float((hi + lo) / 2.0)
    return SmoResult(alpha, bias, G, converged, it)


def dual_objective(alpha, K, y) -> float:
    """Dual objective in maximisation form: sum(a) - 0.5 a'Qa."""
    ay = np.asarray(alpha) * np.asarray(y, dtype=np.float64)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def svm_train_binary(X, y, C: float = 1.0, gamma: float | str = "scale", tol: float = 1e-3,
                     max_passes: int = 100) -> SvmBinaryModel:
    """Fit a soft-margin RBF SVM; ``y`` holds -1/+1.

    ``max_passes`` bounds the work at ``max_passes * n`` pair updates.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths differ")
    if not set(np.unique(y).tolist()) <= {-1, 1}:
        raise ValueError("binary labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("training data contains a single class")
    if gamma == "scale":
        gamma = scale_gamma(X)
    gamma = float(gamma)
    order = canonical_order(X, y)
    X, y = X[order], y[order].astype(np.float64)
    res = smo_solve(rbf_gram(X, X, gamma), y, C, tol, max_iter=max_passes * max(len(y), 1))
    if not res.converged:
        log.warning("SMO stopped after %d updates without reaching tol=%g", res.iterations, tol)
    sv = res.alpha > 0
    return SvmBinaryModel(X[sv], res.alpha[sv] * y[sv], res.bias, gamma, float(C),
                          res.converged, res.iterations)


@dataclass
class MultiClassSvm:
    """One-vs-one ensemble; ``models[(a, b)]`` scores class ``a`` positive against ``b``."""

    classes: list[int]
    models: dict[tuple[int, int], SvmBinaryModel]

    @property
    def n_features(self) -> int:
        return next(iter(self.models.values())).support_vectors.shape[1]

    def pairwise_decisions(self, X) -> dict[tuple[int, int], np.ndarray]:
        return {pair: m.decision_function(X) for pair, m in self.models.items()}

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return vote(self.classes, self.pairwise_decisions(X))

    def to_dict(self) -> dict:
        return {
            "type": "svm",
            "classes": list(self.classes),
            "pairs": [{"positive": a, "negative": b, **m.to_dict()}
                      for (a, b), m in sorted(self.models.items())],
        }

    @classmethod
    def from_dict(cls, d) -> "MultiClassSvm":
        models = {(int(p["positive"]), int(p["negative"])): SvmBinaryModel.from_dict(p)
                  for p in d["pairs"]}
        return cls([int(c) for c in d["classes"]], models)


def vote(classes, decisions: dict[tuple[int, int], np.ndarray]) -> np.ndarray:
    """One-vs-one majority vote.

    A decision value >= 0 is a win for the pair's first class. Ties in the vote
    go to the class with the larger summed |decision| over its wins, then to
    the lower class index.
    """
    pos = {c: k for k, c in enumerate(classes)}
    n = len(next(iter(decisions.values())))
    votes = np.zeros((n, len(classes)))
    strength = np.zeros((n, len(classes)))
    for (a, b), f in decisions.items():
        a_wins = f >= 0
        votes[:, pos[a]] += a_wins
        votes[:, pos[b]] += ~a_wins
        strength[:, pos[a]] += np.where(a_wins, np.abs(f), 0.0)
        strength[:, pos[b]] += np.where(a_wins, 0.0, np.abs(f))
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        top = np.flatnonzero(votes[r] == votes[r].max())
        if len(top) > 1:
            best = strength[r, top].max()
            top = top[strength[r, top] == best]
        out[r] = classes[int(top.min())]
    return out


def svm_train(X, y, C: float = 1.0, gamma: float | str = "scale", tol: float = 1e-3,
              max_passes: int = 100) -> MultiClassSvm:
    """Train one binary SVM per unordered class pair.

    ``gamma="scale"`` is resolved once on the full training matrix so every
    pairwise model shares the same kernel.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    order = canonical_order(X, y)
    X, y = X[order], y[order]
    classes = sorted(np.unique(y).tolist())
    if len(classes) < 2:
        raise ValueError("training data contains a single class")
    if gamma == "scale":
        gamma = scale_gamma(X)
    models = {}
    for a, b in itertools.combinations(classes, 2):
        mask = (y == a) | (y == b)
        yb = np.where(y[mask] == a, 1, -1)
        models[(a, b)] = svm_train_binary(X[mask], yb, C, gamma, tol, max_passes)
    return MultiClassSvm(classes, models)


def svm_predict(m: MultiClassSvm, x) -> int:
    return int(m.predict(np.asarray(x, dtype=np.float64)[None, :])[0])
