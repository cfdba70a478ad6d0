"""Random forest of CART trees with Gini splits and bootstrap resampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .svm import canonical_order


@dataclass
class Node:
    # Leaves carry ``label``; internal nodes carry feature/threshold/children.
    label: int | None = None
    counts: list[int] | None = None
    feature: int | None = None
    threshold: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.label, "counts": self.counts}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "Node":
        if "leaf" in d:
            return cls(label=int(d["leaf"]), counts=[int(c) for c in d["counts"]])
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def best_split(X, y, features, n_classes):
    """Lowest weighted-Gini threshold split over ``features``.

    Thresholds are midpoints of consecutive distinct values; samples with
    ``x <= threshold`` go left. Returns (feature, threshold, score) or None.
    """
    n = len(y)
    onehot = np.eye(n_classes, dtype=np.float64)[y]
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = np.flatnonzero(xs[1:] > xs[:-1])
        if valid.size == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[valid]
        nl = (valid + 1).astype(np.float64)
        right = onehot.sum(axis=0) - left
        nr = n - nl
        gl = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
        gr = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
        score = (nl * gl + nr * gr) / n
        k = int(np.argmin(score))
        if best is None or score[k] < best[2]:
            thr = (xs[valid[k]] + xs[valid[k] + 1]) / 2.0
            # Guard against midpoint rounding onto the upper value.
            if not thr < xs[valid[k] + 1]:
                thr = xs[valid[k]]
            best = (int(f), float(thr), float(score[k]))
    return best


def _majority(counts) -> int:
    return int(np.argmax(counts))  # argmax picks the lowest index on ties


def build_tree(X, y, n_classes: int, m_try: int, max_depth: int | None,
               rng: np.random.Generator, depth: int = 0) -> Node:
    counts = np.bincount(y, minlength=n_classes)
    if np.count_nonzero(counts) <= 1 or len(y) < 2 or (max_depth is not None and depth >= max_depth):
        return Node(label=_majority(counts), counts=counts.tolist())
    perm = rng.permutation(X.shape[1])
    split = best_split(X, y, perm[:m_try], n_classes)
    # If every drawn feature is constant here, keep drawing from the rest.
    start = m_try
    while split is None and start < len(perm):
        split = best_split(X, y, perm[start:start + m_try], n_classes)
        start += m_try
    if split is None:
        return Node(label=_majority(counts), counts=counts.tolist())
    f, thr, _ = split
    go_left = X[:, f] <= thr
    return Node(feature=f, threshold=thr,
                left=build_tree(X[go_left], y[go_left], n_classes, m_try, max_depth, rng, depth + 1),
                right=build_tree(X[~go_left], y[~go_left], n_classes, m_try, max_depth, rng, depth + 1))


def tree_predict(node: Node, X) -> np.ndarray:
    out = np.empty(len(X), dtype=np.int64)
    for r, x in enumerate(X):
        n = node
        while not n.is_leaf:
            n = n.left if x[n.feature] <= n.threshold else n.right
        out[r] = n.label
    return out


@dataclass
class ForestModel:
    trees: list[Node]
    n_classes: int
    n_features: int
    m_try: int
    max_depth: int | None = None
    seed: int = 0
    bootstrap: bool = True

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        votes = np.zeros((len(X), self.n_classes), dtype=np.int64)
        for t in self.trees:
            votes[np.arange(len(X)), tree_predict(t, X)] += 1
        return np.argmax(votes, axis=1).astype(np.int64)

    def to_dict(self) -> dict:
        return {"type": "forest", "n_classes": self.n_classes, "n_features": self.n_features,
                "m_try": self.m_try, "max_depth": self.max_depth, "seed": self.seed,
                "bootstrap": self.bootstrap, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        return cls([Node.from_dict(t) for t in d["trees"]], int(d["n_classes"]),
                   int(d["n_features"]), int(d["m_try"]), d["max_depth"], int(d["seed"]),
                   bool(d.get("bootstrap", True)))


def rf_train(X, y, n_trees: int = 100, max_depth: int | None = None, m_try: int | None = None,
             seed: int = 0, bootstrap: bool = True) -> ForestModel:
    """Train ``n_trees`` CART trees on bootstrap resamples.

    Tree ``t`` draws from its own generator seeded with ``(seed, t)``. Rows are
    put into a canonical order first, so the fitted forest does not depend on
    the order in which training samples are supplied.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot train a forest on empty data")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    dim = X.shape[1]
    if m_try is None:
        m_try = max(1, int(math.floor(math.sqrt(dim))))
    if not 1 <= m_try <= dim:
        raise ValueError(f"m_try must be in [1, {dim}], got {m_try}")
    order = canonical_order(X, y)
    X, y = X[order], y[order]
    n_classes = int(y.max()) + 1
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        idx = rng.integers(0, len(y), len(y)) if bootstrap else np.arange(len(y))
        trees.append(build_tree(X[idx], y[idx], n_classes, m_try, max_depth, rng))
    return ForestModel(trees, n_classes, dim, m_try, max_depth, seed, bootstrap)


def rf_predict(m: ForestModel, x) -> int:
    return int(m.predict(np.asarray(x, dtype=np.float64)[None, :])[0])
