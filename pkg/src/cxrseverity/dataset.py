"""Severity labels, radiologist region scoring, manifests and stratified splits."""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

N_REGIONS = 6
MAX_REGION_SCORE = 2
NON_SEVERE_MAX_TOTAL = 8
MAX_TOTAL = N_REGIONS * MAX_REGION_SCORE


class ClassLabel(enum.IntEnum):
    NORMAL = 0
    NON_SEVERE = 1
    SEVERE = 2

    @property
    def slug(self) -> str:
        return self.name.lower()

    @property
    def display(self) -> str:
        return {0: "Normal", 1: "Non-Severe", 2: "Severe"}[int(self)]

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        key = text.strip().lower().replace("-", "_").replace(" ", "_")
        for member in cls:
            if member.slug == key:
                return member
        raise ValueError(f"unknown label {text!r}; expected one of {[m.slug for m in cls]}")


N_CLASSES = len(ClassLabel)
CLASS_NAMES = tuple(c.display for c in ClassLabel)


def validate_region_scores(scores: Sequence[int]) -> tuple[int, ...]:
    scores = tuple(scores)
    if len(scores) != N_REGIONS:
        raise ValueError(f"expected {N_REGIONS} region scores, got {len(scores)}")
    for i, s in enumerate(scores):
        if isinstance(s, bool) or int(s) != s or not 0 <= s <= MAX_REGION_SCORE:
            raise ValueError(f"region {i + 1} score {s!r} outside 0..{MAX_REGION_SCORE}")
    return tuple(int(s) for s in scores)


def severity_class(scores: Sequence[int]) -> ClassLabel:
    """Total 0 is Normal, 1-8 Non-Severe, 9-12 Severe."""
    total = sum(validate_region_scores(scores))
    if total == 0:
        return ClassLabel.NORMAL
    if total <= NON_SEVERE_MAX_TOTAL:
        return ClassLabel.NON_SEVERE
    return ClassLabel.SEVERE


def one_hot(label: int, n_classes: int = N_CLASSES) -> np.ndarray:
    idx = int(label)
    if not 0 <= idx < n_classes:
        raise IndexError(f"label index {idx} out of range for {n_classes} classes")
    vec = np.zeros(n_classes)
    vec[idx] = 1.0
    return vec


class ManifestError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}, line {line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class MalformedRowError(ManifestError):
    pass


class DuplicatePathError(ManifestError):
    pass


@dataclass
class Manifest:
    """Image paths with their class labels (and region scores when given)."""

    paths: list[str]
    labels: np.ndarray
    scores: list[tuple[int, ...] | None] = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.scores:
            self.scores = [None] * len(self.paths)

    def __len__(self):
        return len(self.paths)

    def resolve(self, i: int) -> Path:
        p = Path(self.paths[i])
        return p if p.is_absolute() else self.root / p

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=N_CLASSES)
        return {ClassLabel(i).slug: int(c) for i, c in enumerate(counts)}

    def subset(self, idx) -> "Manifest":
        idx = [int(i) for i in idx]
        return Manifest([self.paths[i] for i in idx], self.labels[idx],
                        [self.scores[i] for i in idx], self.root)


def load_manifest(path) -> Manifest:
    """Read a CSV manifest with header ``path,label`` or ``path,r1,...,r6``.

    Relative image paths are resolved against the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedRowError(path, 1, "empty manifest (header required)")
    header = [h.strip().lower() for h in rows[0]]
    if header == ["path", "label"]:
        scored = False
    elif header == ["path"] + [f"r{i}" for i in range(1, N_REGIONS + 1)]:
        scored = True
    else:
        raise MalformedRowError(path, 1, f"unrecognised header {rows[0]!r}")

    paths, labels, scores, seen = [], [], [], {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedRowError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        img = row[0].strip()
        if not img:
            raise MalformedRowError(path, lineno, "empty image path")
        if img in seen:
            raise DuplicatePathError(path, lineno, f"duplicate path {img!r} (first on line {seen[img]})")
        try:
            if scored:
                s = validate_region_scores([int(c) for c in row[1:]])
                label = severity_class(s)
            else:
                s = None
                label = ClassLabel.parse(row[1])
        except ValueError as exc:
            raise MalformedRowError(path, lineno, str(exc)) from None
        seen[img] = lineno
        paths.append(img)
        labels.append(int(label))
        scores.append(s)
    return Manifest(paths, np.array(labels, dtype=np.int64), scores, path.parent)


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    scored = all(s is not None for s in manifest.scores) and len(manifest) > 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if scored:
            w.writerow(["path"] + [f"r{i}" for i in range(1, N_REGIONS + 1)])
            for p, s in zip(manifest.paths, manifest.scores):
                w.writerow([p, *s])
        else:
            w.writerow(["path", "label"])
            for p, y in zip(manifest.paths, manifest.labels):
                w.writerow([p, ClassLabel(int(y)).slug])


@dataclass
class LabeledDataset:
    """Feature rows with labels; ``synthetic`` flags rows produced by oversampling."""

    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"X shape {self.X.shape} does not match {self.y.shape[0]} labels")
        if self.synthetic is None:
            self.synthetic = np.zeros(len(self.y), dtype=bool)
        self.synthetic = np.asarray(self.synthetic, dtype=bool)

    def __len__(self):
        return len(self.y)

    @property
    def labels(self) -> np.ndarray:
        return self.y

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return LabeledDataset(self.X[idx], self.y[idx], self.synthetic[idx])

    def class_counts(self) -> dict[int, int]:
        classes, counts = np.unique(self.y, return_counts=True)
        return {int(c): int(n) for c, n in zip(classes, counts)}


def _floor_share(count: int, fraction: float) -> int:
    return int(math.floor(count * fraction + 1e-9))


def stratified_split_indices(labels, test_fraction: float, seed: int):
    """Per class, ``floor(count * test_fraction)`` seeded-shuffled indices go to test."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < 2:
            raise ValueError(f"class {cls} has {members.size} sample(s); at least 2 required")
        n_test = _floor_share(members.size, test_fraction)
        if n_test == 0:
            warnings.warn(f"class {cls}: test_fraction {test_fraction} yields no test samples")
        members = members[rng.permutation(members.size)]
        test.extend(members[:n_test])
        train.extend(members[n_test:])
    return np.sort(np.array(train, dtype=np.intp)), np.sort(np.array(test, dtype=np.intp))


def stratified_split(ds, test_fraction: float = 0.2, seed: int = 0):
    """Split a Manifest or LabeledDataset into (train, test)."""
    train_idx, test_idx = stratified_split_indices(ds.labels, test_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def stratified_folds(labels, n_folds: int, seed: int) -> list[np.ndarray]:
    """Deal each class's shuffled members round-robin into ``n_folds`` folds."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(n_folds)]
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < n_folds:
            raise ValueError(f"class {cls} has {members.size} samples, fewer than {n_folds} folds")
        members = members[rng.permutation(members.size)]
        for j, m in enumerate(members):
            folds[j % n_folds].append(m)
    return [np.sort(np.array(f, dtype=np.intp)) for f in folds]
