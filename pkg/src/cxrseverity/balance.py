"""SMOTE oversampling with brute-force Euclidean neighbour search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    seed: int = 0
    # None brings every class up to the largest class count.
    target: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


def knn_indices(X, i: int, k: int) -> np.ndarray:
    """Indices of the ``k`` rows nearest to row ``i`` (excluding ``i``); ties go to the lower index."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k={k} needs 1 <= k < {n} rows")
    d2 = np.sum((X - X[i]) ** 2, axis=1)
    others = np.delete(np.arange(n), i)
    order = np.argsort(d2[others], kind="stable")
    return others[order[:k]]


def smote_sample(x, x_r, u: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    x_r = np.asarray(x_r, dtype=np.float64)
    if x.shape != x_r.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_r.shape}")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    return x + u * (x_r - x)


def smote_oversample(X_min, n_new: int, cfg: SmoteConfig = SmoteConfig(), *,
                     rng: np.random.Generator | None = None, return_pairs: bool = False):
    """Generate ``n_new`` synthetic minority rows.

    Each row interpolates a uniformly drawn minority sample towards one of its
    ``cfg.k`` nearest minority neighbours. With ``return_pairs`` the generating
    (sample, neighbour) row indices are returned as an (n_new, 2) array too.
    """
    X_min = np.asarray(X_min, dtype=np.float64)
    n = X_min.shape[0]
    if n <= cfg.k:
        raise ValueError(f"minority class has {n} rows; SMOTE with k={cfg.k} needs more than k")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    out = np.empty((n_new, X_min.shape[1]))
    pairs = np.empty((n_new, 2), dtype=np.intp)
    if n_new > 0:
        neighbours = np.stack([knn_indices(X_min, i, cfg.k) for i in range(n)])
        for t in range(n_new):
            i = int(rng.integers(n))
            j = int(neighbours[i, rng.integers(cfg.k)])
            u = float(rng.random())
            out[t] = smote_sample(X_min[i], X_min[j], u)
            pairs[t] = (i, j)
    return (out, pairs) if return_pairs else out


def balance_dataset(train: LabeledDataset, cfg: SmoteConfig = SmoteConfig()) -> LabeledDataset:
    """Oversample every class up to the largest class count; originals are kept in place."""
    counts = train.class_counts()
    if len(counts) < 2:
        raise ValueError("balancing needs at least two classes")
    for cls, c in counts.items():
        if c <= cfg.k:
            raise ValueError(f"class {cls} has {c} rows; SMOTE with k={cfg.k} needs more than k")
    target = max(counts.values()) if cfg.target is None else cfg.target
    X_parts, y_parts = [train.X], [train.y]
    for cls in sorted(counts):
        n_new = target - counts[cls]
        if n_new <= 0:
            continue
        rng = np.random.default_rng([cfg.seed, cls])
        X_parts.append(smote_oversample(train.X[train.y == cls], n_new, cfg, rng=rng))
        y_parts.append(np.full(n_new, cls, dtype=np.int64))
    n_syn = sum(len(p) for p in y_parts[1:])
    synthetic = np.concatenate([train.synthetic, np.ones(n_syn, dtype=bool)])
    return LabeledDataset(np.vstack(X_parts), np.concatenate(y_parts), synthetic)
