"""End-to-end orchestration: preprocess, featurize, split, scale, balance, train, evaluate."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .balance import SmoteConfig, balance_dataset
from .classify import model_from_dict, rf_train, svm_train
from .dataset import (CLASS_NAMES, N_CLASSES, LabeledDataset, Manifest, load_manifest,
                      stratified_folds, stratified_split_indices)
from .features import Standardizer, baseline_features, load_embeddings
from .imagecore import GrayImage, load_image, resize_bilinear
from .metrics import Report, accuracy, confusion_matrix, macro_report
from .preprocess import DEFAULT_STEPS, apply_steps

log = logging.getLogger(__name__)

MODEL_FORMAT = "cxrseverity-model/1"
CLASSIFIERS = ("svm", "rf")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass
class SvmParams:
    C: float = 1.0
    gamma: float | str = "scale"
    tol: float = 1e-3
    max_passes: int = 100


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    m_try: int | None = None
    seed: int = 0


@dataclass
class SmoteParams:
    enabled: bool = True
    k: int = 5
    seed: int = 0


@dataclass
class FeatureSource:
    name: str = "baseline"
    kind: str = "baseline"  # "baseline" or "embedding"
    path: str | None = None
    pool: bool = True


def _default_steps():
    return [{"name": n, **p} for n, p in DEFAULT_STEPS]


@dataclass
class PipelineConfig:
    manifest: str
    out_dir: str = "results"
    steps: list[dict] = field(default_factory=_default_steps)
    image_size: int = 224
    features: list[FeatureSource] = field(default_factory=lambda: [FeatureSource()])
    test_fraction: float = 0.2
    split_seed: int = 0
    standardize: bool = True
    smote: SmoteParams = field(default_factory=SmoteParams)
    classifiers: list[str] = field(default_factory=lambda: ["svm", "rf"])
    svm: SvmParams = field(default_factory=SvmParams)
    rf: ForestParams = field(default_factory=ForestParams)
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "PipelineConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "manifest" not in d:
            raise ValueError("config requires 'manifest'")
        base = Path(base_dir) if base_dir is not None else None

        def rel(p):
            if p is None or base is None or Path(p).is_absolute():
                return p
            return str(base / p)

        d["manifest"] = rel(d["manifest"])
        if "out_dir" in d:
            d["out_dir"] = rel(d["out_dir"])
        if "features" in d:
            d["features"] = [FeatureSource(**{**f, "path": rel(f.get("path"))}) for f in d["features"]]
        for key, typ in (("smote", SmoteParams), ("svm", SvmParams), ("rf", ForestParams)):
            if key in d:
                d[key] = typ(**d[key])
        cfg = cls(**d)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if not self.classifiers or any(c not in CLASSIFIERS for c in self.classifiers):
            raise ValueError(f"classifiers must be a non-empty subset of {CLASSIFIERS}")
        if not self.features:
            raise ValueError("at least one feature source is required")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature source names must be unique")
        for f in self.features:
            if f.kind not in ("baseline", "embedding"):
                raise ValueError(f"feature source {f.name!r}: unknown kind {f.kind!r}")
            if f.kind == "embedding" and not f.path:
                raise ValueError(f"feature source {f.name!r}: embedding kind needs a path")

    def validate_paths(self):
        if not Path(self.manifest).is_file():
            raise PipelineError("config", f"manifest not found: {self.manifest}")
        for f in self.features:
            if f.kind == "embedding" and not Path(f.path).is_file():
                raise PipelineError("config", f"embedding file not found: {f.path}")


def steps_from_config(steps: list[dict]):
    out = []
    for s in steps:
        s = dict(s)
        out.append((s.pop("name"), s))
    return out


def preprocess_image(img: GrayImage, steps, size: int = 224) -> GrayImage:
    return apply_steps(resize_bilinear(img, size, size), steps)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def baseline_matrix(manifest: Manifest, steps, size: int = 224, workers: int = 1) -> np.ndarray:
    def one(i):
        return baseline_features(preprocess_image(load_image(manifest.resolve(i)), steps, size))
    return np.vstack(_map(one, range(len(manifest)), workers))


def train_classifier(kind: str, X, y, cfg: PipelineConfig):
    if kind == "svm":
        p = cfg.svm
        return svm_train(X, y, C=p.C, gamma=p.gamma, tol=p.tol, max_passes=p.max_passes)
    p = cfg.rf
    return rf_train(X, y, n_trees=p.n_trees, max_depth=p.max_depth, m_try=p.m_try, seed=p.seed)


def fit_model(kind: str, X_train, y_train, cfg: PipelineConfig):
    """Scale, oversample and train on one training partition. Returns (standardizer, model)."""
    scaler = Standardizer.fit(X_train) if cfg.standardize else None
    X = scaler.transform(X_train) if scaler else np.asarray(X_train, dtype=np.float64)
    ds = LabeledDataset(X, y_train)
    if cfg.smote.enabled:
        ds = balance_dataset(ds, SmoteConfig(k=cfg.smote.k, seed=cfg.smote.seed))
    return scaler, train_classifier(kind, ds.X, ds.y, cfg)


@dataclass
class ModelBundle:
    classifier: object
    standardizer: Standardizer | None = None
    feature_source: dict | None = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return self.classifier.predict(X)

    def to_json(self) -> str:
        d = {
            "format": MODEL_FORMAT,
            "feature_source": self.feature_source,
            "standardizer": self.standardizer.to_dict() if self.standardizer else None,
            "classifier": self.classifier.to_dict(),
        }
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelBundle":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
        scaler = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
        return cls(model_from_dict(d["classifier"]), scaler, d.get("feature_source"))


def evaluate(y_true, y_pred) -> tuple:
    cm = confusion_matrix(y_true, y_pred, N_CLASSES, CLASS_NAMES)
    return cm, macro_report(cm)


@dataclass
class RunResult:
    reports: dict[tuple[str, str], Report]
    comparison: dict[str, dict[str, float]]
    files: list[Path]


def comparison_text(comparison: dict[str, dict[str, float]], classifiers) -> str:
    label = {"svm": "SVM", "rf": "Random Forest"}
    cols = [label[c] for c in classifiers]
    width = max(8, *(len(n) + 2 for n in comparison))
    lines = [f"{'MODEL':<{width}}" + "".join(f"{c:>16}" for c in cols)]
    for name, row in comparison.items():
        lines.append(f"{name:<{width}}" + "".join(f"{100 * row[c]:>15.0f}%" for c in classifiers))
    return "\n".join(lines) + "\n"


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    """Run every (feature source, classifier) combination and write artifacts to ``cfg.out_dir``."""
    cfg.validate_paths()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        manifest = load_manifest(cfg.manifest)
    except (ValueError, OSError) as exc:
        raise PipelineError("manifest", str(exc)) from exc
    log.info("manifest %s: %s", cfg.manifest, manifest.class_counts())
    try:
        train_idx, test_idx = stratified_split_indices(manifest.labels, cfg.test_fraction, cfg.split_seed)
    except ValueError as exc:
        raise PipelineError("split", str(exc)) from exc
    y = manifest.labels
    steps = steps_from_config(cfg.steps)

    reports, comparison, files = {}, {}, []
    baseline_cache = None
    for src in cfg.features:
        try:
            if src.kind == "baseline":
                if baseline_cache is None:
                    baseline_cache = baseline_matrix(manifest, steps, cfg.image_size, cfg.workers)
                X = baseline_cache
            else:
                X = load_embeddings(src.path, manifest, pool=src.pool).astype(np.float64)
        except (ValueError, OSError) as exc:
            raise PipelineError("features", f"{src.name}: {exc}") from exc
        comparison[src.name] = {}
        for kind in cfg.classifiers:
            try:
                scaler, model = fit_model(kind, X[train_idx], y[train_idx], cfg)
            except ValueError as exc:
                raise PipelineError("train", f"{src.name}/{kind}: {exc}") from exc
            bundle = ModelBundle(model, scaler, asdict(src))
            cm, report = evaluate(y[test_idx], bundle.predict(X[test_idx]))
            reports[(src.name, kind)] = report
            comparison[src.name][kind] = report.accuracy
            stem = f"{src.name}_{kind}"
            for name, text in ((f"model_{stem}.json", bundle.to_json()),
                               (f"report_{stem}.txt", report.to_text()),
                               (f"report_{stem}.json", report.to_json() + "\n"),
                               (f"confusion_{stem}.csv", cm.to_csv())):
                (out / name).write_text(text, encoding="utf-8")
                files.append(out / name)
            log.info("%s/%s accuracy %.4f macro-F1 %.4f", src.name, kind,
                     report.accuracy, report.average.f1)

    (out / "comparison.txt").write_text(comparison_text(comparison, cfg.classifiers), encoding="utf-8")
    (out / "comparison.json").write_text(json.dumps(comparison, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    files += [out / "comparison.txt", out / "comparison.json"]
    return RunResult(reports, comparison, files)


def grid_search(X, y, Cs, gammas, cfg: PipelineConfig, n_folds: int = 5, seed: int = 0):
    """Stratified k-fold CV accuracy of the SVM for each (C, gamma).

    Returns ``(best_C, best_gamma, scores)``; ties favour the smaller C, then
    the smaller gamma ("scale" counts as larger than any number).
    """
    Cs, gammas = list(Cs), list(gammas)
    if not Cs or not gammas:
        raise ValueError("grid must contain at least one C and one gamma")
    folds = stratified_folds(y, n_folds, seed)
    scores = {}
    for C in Cs:
        for g in gammas:
            sub = replace(cfg, svm=SvmParams(C, g, cfg.svm.tol, cfg.svm.max_passes))
            accs = []
            for k in range(n_folds):
                val = folds[k]
                trn = np.sort(np.concatenate([folds[j] for j in range(n_folds) if j != k]))
                scaler, model = fit_model("svm", X[trn], y[trn], sub)
                Xv = scaler.transform(X[val]) if scaler else X[val]
                cm = confusion_matrix(y[val], model.predict(Xv), N_CLASSES)
                accs.append(accuracy(cm))
            scores[(C, g)] = float(np.mean(accs))

    def key(item):
        (C, g), acc = item
        return (-acc, C, (1, 0.0) if g == "scale" else (0, g))

    (best_C, best_g), _ = min(scores.items(), key=key)
    return best_C, best_g, scores
