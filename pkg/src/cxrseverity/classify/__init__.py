"""Classifiers: one-vs-one RBF SVM and random forest, plus JSON model I/O."""

import json
from pathlib import Path

from .forest import ForestModel, rf_predict, rf_train
from .svm import (
    MultiClassSvm,
    SvmBinaryModel,
    rbf_gram,
    rbf_kernel,
    svm_predict,
    svm_train,
    svm_train_binary,
)


def model_from_dict(d):
    kind = d.get("type")
    if kind == "svm":
        return MultiClassSvm.from_dict(d)
    if kind == "forest":
        return ForestModel.from_dict(d)
    raise ValueError(f"unknown model type {kind!r}")


def dumps_model(model) -> str:
    # json emits floats via repr(), which round-trips float64 exactly.
    return json.dumps(model.to_dict(), indent=1, sort_keys=True)


def save_model(model, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n", encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "ForestModel", "MultiClassSvm", "SvmBinaryModel", "dumps_model", "load_model",
    "model_from_dict", "rbf_gram", "rbf_kernel", "rf_predict", "rf_train", "save_model",
    "svm_predict", "svm_train", "svm_train_binary",
]
