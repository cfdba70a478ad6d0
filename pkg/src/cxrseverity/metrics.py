"""Confusion matrix, accuracy / precision / recall / F1 and the per-class report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = self.counts.shape[0]
        if self.counts.ndim != 2 or self.counts.shape[1] != k:
            raise ValueError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("confusion counts must be non-negative")
        if not self.class_names:
            self.class_names = [str(i) for i in range(k)]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *self.class_names])
        for name, row in zip(self.class_names, self.counts):
            w.writerow([name, *row.tolist()])
        return buf.getvalue()


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], K: int,
                     class_names: Sequence[str] | None = None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= K):
            raise ValueError(f"{name} label out of range 0..{K - 1}")
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts, list(class_names) if class_names else [])


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts) / cm.total)


def _check_class(cm: ConfusionMatrix, c: int):
    if not 0 <= c < cm.n_classes:
        raise IndexError(f"class index {c} out of range for {cm.n_classes} classes")


def one_vs_rest(cm: ConfusionMatrix, c: int) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) for class ``c`` against all others."""
    _check_class(cm, c)
    m = cm.counts
    tp = int(m[c, c])
    fp = int(m[:, c].sum()) - tp
    fn = int(m[c, :].sum()) - tp
    tn = cm.total - tp - fp - fn
    return tp, fp, fn, tn


def _ratio(num: float, den: float) -> tuple[float, bool]:
    return (0.0, True) if den == 0 else (num / den, False)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    # Names of metrics whose denominator was zero (reported as 0.0).
    degenerate: tuple[str, ...] = ()


def class_metrics(cm: ConfusionMatrix, c: int) -> ClassMetrics:
    tp, fp, fn, _ = one_vs_rest(cm, c)
    p, p_bad = _ratio(tp, tp + fp)
    r, r_bad = _ratio(tp, tp + fn)
    f, f_bad = _ratio(2 * p * r, p + r)
    flags = tuple(n for n, bad in (("precision", p_bad), ("recall", r_bad), ("f1", f_bad)) if bad)
    return ClassMetrics(p, r, f, tp + fn, flags)


def precision_class(cm: ConfusionMatrix, c: int) -> float:
    return class_metrics(cm, c).precision


def recall_class(cm: ConfusionMatrix, c: int) -> float:
    return class_metrics(cm, c).recall


def f1_class(cm: ConfusionMatrix, c: int) -> float:
    return class_metrics(cm, c).f1


@dataclass
class Report:
    class_names: list[str]
    per_class: list[ClassMetrics]
    average: ClassMetrics
    accuracy: float | None

    def to_dict(self) -> dict:
        def row(m: ClassMetrics):
            return {"precision": m.precision, "recall": m.recall, "f1": m.f1,
                    "support": m.support, "degenerate": list(m.degenerate)}
        return {
            "classes": {name: row(m) for name, m in zip(self.class_names, self.per_class)},
            "average": row(self.average),
            "overall_accuracy": self.accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        width = max(16, *(len(n) + 2 for n in self.class_names))
        lines = [f"{'CLASS':<{width}}{'PRECISION':>11}{'RECALL':>9}{'F1-SCORE':>10}{'SUPPORT':>10}"]
        for name, m in zip(self.class_names, self.per_class):
            mark = " *" if m.degenerate else ""
            lines.append(f"{name.upper():<{width}}{m.precision:>11.2f}{m.recall:>9.2f}"
                         f"{m.f1:>10.2f}{m.support:>10d}{mark}")
        a = self.average
        lines.append(f"{'AVERAGE':<{width}}{a.precision:>11.2f}{a.recall:>9.2f}{a.f1:>10.2f}"
                     f"{a.support:>10g}")
        acc = "n/a" if self.accuracy is None else f"{100 * self.accuracy:.0f}%"
        lines.append(f"{'OVERALL ACCURACY':<{width}}{acc:>11}")
        if any(m.degenerate for m in self.per_class):
            lines.append("* zero denominator in at least one metric (reported as 0.00)")
        return "\n".join(lines) + "\n"


def macro_report(cm: ConfusionMatrix) -> Report:
    """Per-class rows plus an unweighted mean row (metrics and support) and overall accuracy."""
    per = [class_metrics(cm, c) for c in range(cm.n_classes)]
    avg = ClassMetrics(
        float(np.mean([m.precision for m in per])),
        float(np.mean([m.recall for m in per])),
        float(np.mean([m.f1 for m in per])),
        float(np.mean([m.support for m in per])),
    )
    acc = accuracy(cm) if cm.total > 0 else None
    return Report(list(cm.class_names), per, avg, acc)


def macro_f1(cm: ConfusionMatrix) -> float:
    return macro_report(cm).average.f1
