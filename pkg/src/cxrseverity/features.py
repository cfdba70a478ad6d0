"""Feature vectors: handcrafted baseline, CNN embedding ingestion, pooling, scaling."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import NETWORK_INPUT_SIZE, GrayImage, resize_bilinear, to_unit_reals

GRID = 14
INTENSITY_BINS = 32
ORIENTATION_BINS = 16
BASELINE_DIM = GRID * GRID + INTENSITY_BINS + ORIENTATION_BINS

CONV5_SPATIAL = (7, 7)
CONV5_CHANNELS = 2048
CONV5_FLAT_DIM = CONV5_SPATIAL[0] * CONV5_SPATIAL[1] * CONV5_CHANNELS

EMBEDDING_MAGIC = b"FEM1"


class EmbeddingFormatError(ValueError):
    pass


def baseline_features(img: GrayImage) -> np.ndarray:
    """244-dim descriptor of a radiograph resized to 224x224.

    Layout: 14x14 block means of unit intensities (196), 32-bin intensity
    histogram (sums to 1), 16-bin magnitude-weighted gradient orientation
    histogram (sums to 1, or all zeros for a flat image).
    """
    img = resize_bilinear(img, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE)
    u = to_unit_reals(img)
    block = NETWORK_INPUT_SIZE // GRID
    grid = u.reshape(GRID, block, GRID, block).mean(axis=(1, 3)).ravel()

    hist = np.bincount(img.pixels.ravel() // (256 // INTENSITY_BINS), minlength=INTENSITY_BINS)
    hist = hist / hist.sum()

    p = np.pad(u, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    bins = np.minimum((angle / (2 * np.pi / ORIENTATION_BINS)).astype(np.intp), ORIENTATION_BINS - 1)
    orient = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=ORIENTATION_BINS)
    total = orient.sum()
    orient = orient / total if total > 0 else np.zeros(ORIENTATION_BINS)
    return np.concatenate([grid, hist, orient])


def global_average_pool(t) -> np.ndarray:
    """Average a 7x7xC activation block over its 49 spatial positions."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 or t.shape[:2] != CONV5_SPATIAL or t.shape[2] < 1:
        raise ValueError(f"expected a 7x7xC tensor, got shape {t.shape}")
    # Row-wise accumulation sums every channel in the same order.
    flat = np.ascontiguousarray(t).reshape(-1, t.shape[2])
    return flat.sum(axis=0) / flat.shape[0]


def pool_flat_rows(X: np.ndarray) -> np.ndarray:
    """Pool rows of flattened (row-major 7x7xC, channels last) activations to C dims."""
    n, cols = X.shape
    if cols % (CONV5_SPATIAL[0] * CONV5_SPATIAL[1]):
        raise ValueError(f"row length {cols} is not a multiple of 49")
    return X.reshape(n, CONV5_SPATIAL[0] * CONV5_SPATIAL[1], -1).mean(axis=1)


def read_embeddings(path) -> np.ndarray:
    """Read an embedding file (CSV with ``dim=`` header, or binary FEM1) as float32."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == EMBEDDING_MAGIC:
        if len(raw) < 12:
            raise EmbeddingFormatError(f"{path}: truncated FEM1 header")
        rows, cols = struct.unpack("<II", raw[4:12])
        expected = rows * cols * 4
        if len(raw) - 12 != expected:
            raise EmbeddingFormatError(
                f"{path}: header declares {rows}x{cols} values but payload has {len(raw) - 12} bytes")
        X = np.frombuffer(raw[12:], dtype="<f4").reshape(rows, cols).astype(np.float32)
    else:
        text = raw.decode("utf-8")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].strip().startswith("dim="):
            raise EmbeddingFormatError(f"{path}: missing 'dim=<cols>' header or FEM1 magic")
        try:
            cols = int(lines[0].strip()[4:])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: bad header {lines[0]!r}") from None
        X = np.empty((len(lines) - 1, cols), dtype=np.float32)
        for i, ln in enumerate(lines[1:]):
            vals = ln.split(",")
            if len(vals) != cols:
                raise EmbeddingFormatError(f"{path}: row {i + 1} has {len(vals)} values, expected {cols}")
            try:
                X[i] = [float(v) for v in vals]
            except ValueError:
                raise EmbeddingFormatError(f"{path}: row {i + 1} holds a non-numeric value") from None
    if not np.all(np.isfinite(X)):
        bad = int(np.argwhere(~np.isfinite(X))[0][0])
        raise EmbeddingFormatError(f"{path}: non-finite value in row {bad + 1}")
    return X


def load_embeddings(path, manifest, pool: bool = True) -> np.ndarray:
    """Read embeddings aligned to ``manifest`` (anything with ``len``).

    Flattened Conv5 rows (7*7*2048 values) are pooled to 2048 dims when ``pool``.
    """
    X = read_embeddings(path)
    if X.shape[0] != len(manifest):
        raise EmbeddingFormatError(f"{path}: {X.shape[0]} rows but manifest has {len(manifest)} entries")
    if pool and X.shape[1] == CONV5_FLAT_DIM:
        X = pool_flat_rows(X.astype(np.float64)).astype(np.float32)
    return X


def save_embeddings(X, path, fmt: str = "bin") -> None:
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 2:
        raise ValueError("embedding matrix must be 2-D")
    path = Path(path)
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(EMBEDDING_MAGIC)
            fh.write(struct.pack("<II", *X.shape))
            fh.write(X.astype("<f4").tobytes())
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"dim={X.shape[1]}\n")
            for row in X:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    else:
        raise ValueError(f"unknown embedding format {fmt!r}")


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    MIN_STD = 1e-12

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("cannot fit a standardizer on an empty matrix")
        return cls(X.mean(axis=0), X.std(axis=0))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        live = self.scale >= self.MIN_STD
        out = np.zeros_like(X)
        out[:, live] = (X[:, live] - self.mean[live]) / self.scale[live]
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))


def fit_standardizer(X) -> Standardizer:
    return Standardizer.fit(X)


def apply_standardizer(s: Standardizer, X) -> np.ndarray:
    return s.transform(X)
