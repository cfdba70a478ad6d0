"""Command-line entry point: ``cxrseverity <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .balance import SmoteConfig, balance_dataset
from .dataset import (ClassLabel, LabeledDataset, load_manifest, severity_class,
                      stratified_split_indices)
from .features import load_embeddings, save_embeddings
from .imagecore import ImageError, load_image, save_pgm
from .pipeline import (ForestParams, ModelBundle, PipelineConfig, PipelineError, SmoteParams,
                       SvmParams, baseline_matrix, evaluate, fit_model, grid_search, preprocess_image,
                       run_pipeline, steps_from_config)
from .preprocess import DEFAULT_STEPS, STEPS
from .synthetic import generate_dataset

log = logging.getLogger("cxrseverity")

IMAGE_SUFFIXES = {".pgm", ".png"}


def parse_step(text: str):
    """``median:radius=2`` -> ("median", {"radius": 2})."""
    name, _, rest = text.partition(":")
    if name not in STEPS:
        raise argparse.ArgumentTypeError(f"unknown step {name!r}; choose from {sorted(STEPS)}")
    params = {}
    for kv in filter(None, rest.split(",")):
        key, eq, val = kv.partition("=")
        if not eq:
            raise argparse.ArgumentTypeError(f"bad step parameter {kv!r} (expected key=value)")
        num = float(val)
        params[key] = int(num) if num.is_integer() and key in ("radius", "tiles_x", "tiles_y") else num
    return name, params


def _steps(args):
    return list(DEFAULT_STEPS) if args.steps is None else args.steps


def _add_steps(p):
    p.add_argument("--steps", nargs="*", type=parse_step, default=None, metavar="STEP[:k=v,...]",
                   help="preprocessing steps in order (default: median hist_equalize); "
                        "pass --steps with no values for resize only")
    p.add_argument("--size", type=int, default=224, help="square resize target (default 224)")


def cmd_preprocess(args) -> int:
    in_dir, out_dir = Path(args.in_dir), Path(args.out)
    files = sorted(p for p in in_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES) if in_dir.is_dir() else []
    if not files:
        log.error("no .pgm/.png images in %s", in_dir)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = _steps(args)
    ok = 0
    for src in files:
        try:
            img = preprocess_image(load_image(src), steps, args.size)
        except ImageError as exc:
            log.warning("skipping %s", exc)
            continue
        dst = out_dir / (src.stem + ".pgm")
        save_pgm(img, dst)
        ok += 1
        print(f"{src.name} -> {dst.name} [{', '.join(n for n, _ in steps) or 'resize only'}]")
    if ok == 0:
        log.error("every image failed to load")
        return 1
    return 0 if ok == len(files) else 1


def cmd_features(args) -> int:
    manifest = load_manifest(args.manifest)
    X = baseline_matrix(manifest, _steps(args), args.size, args.workers)
    save_embeddings(X, args.out, args.format)
    print(f"wrote {X.shape[0]}x{X.shape[1]} features to {args.out}")
    return 0


def cmd_balance(args) -> int:
    manifest = load_manifest(args.manifest)
    X = load_embeddings(args.embeddings, manifest, pool=not args.no_pool)
    ds = balance_dataset(LabeledDataset(X, manifest.labels), SmoteConfig(k=args.k, seed=args.seed))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "synthetic", *(f"x{j}" for j in range(ds.X.shape[1]))])
        for row, lab, syn in zip(ds.X, ds.y, ds.synthetic):
            w.writerow([ClassLabel(int(lab)).slug, int(syn), *(repr(float(v)) for v in row)])
    counts = {ClassLabel(c).slug: n for c, n in ds.class_counts().items()}
    print(f"balanced counts {counts}; {int(ds.synthetic.sum())} synthetic rows -> {args.out}")
    return 0


def _config_from_train_args(args) -> PipelineConfig:
    gamma = args.gamma if args.gamma == "scale" else float(args.gamma)
    return PipelineConfig(
        manifest=args.manifest,
        standardize=not args.no_standardize,
        smote=SmoteParams(enabled=args.smote, k=args.k, seed=args.smote_seed),
        svm=SvmParams(C=args.C, gamma=gamma, tol=args.tol, max_passes=args.max_passes),
        rf=ForestParams(n_trees=args.n_trees, max_depth=args.max_depth, m_try=args.m_try, seed=args.seed),
    )


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    X = load_embeddings(args.embeddings, manifest, pool=not args.no_pool).astype(np.float64)
    cfg = _config_from_train_args(args)
    scaler, model = fit_model(args.classifier, X, manifest.labels, cfg)
    source = {"name": Path(args.embeddings).stem, "kind": "embedding",
              "path": str(args.embeddings), "pool": not args.no_pool}
    ModelBundle(model, scaler, source).save(args.out)
    print(f"trained {args.classifier} on {len(manifest)} samples -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    bundle = ModelBundle.load(args.model)
    manifest = load_manifest(args.manifest)
    X = load_embeddings(args.embeddings, manifest, pool=not args.no_pool)
    cm, report = evaluate(manifest.labels, bundle.predict(X))
    sys.stdout.write(report.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out / "confusion.csv").write_text(cm.to_csv(), encoding="utf-8")
    return 0


def cmd_score(args) -> int:
    label = severity_class(args.scores)
    print(f"total {sum(args.scores)}: {label.display}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.out:
        cfg.out_dir = args.out
    result = run_pipeline(cfg)
    for (src, kind), report in result.reports.items():
        print(f"== {src} / {kind} ==")
        sys.stdout.write(report.to_text())
    print((Path(cfg.out_dir) / "comparison.txt").read_text(encoding="utf-8"), end="")
    return 0


def cmd_grid(args) -> int:
    cfg = PipelineConfig.load(args.config)
    cfg.validate_paths()
    manifest = load_manifest(cfg.manifest)
    train_idx, _ = stratified_split_indices(manifest.labels, cfg.test_fraction, cfg.split_seed)
    src = cfg.features[0]
    if src.kind == "baseline":
        X = baseline_matrix(manifest, steps_from_config(cfg.steps), cfg.image_size, cfg.workers)
    else:
        X = load_embeddings(src.path, manifest, pool=src.pool).astype(np.float64)
    gammas = [g if g == "scale" else float(g) for g in args.gamma]
    best_C, best_g, scores = grid_search(X[train_idx], manifest.labels[train_idx], args.C, gammas,
                                         cfg, n_folds=args.folds, seed=args.seed)
    for (C, g), acc in scores.items():
        print(f"C={C:<8g} gamma={g!s:<8} cv_accuracy={acc:.4f}")
    print(json.dumps({"C": best_C, "gamma": best_g, "cv_accuracy": scores[(best_C, best_g)]}))
    return 0


def cmd_gen_synthetic(args) -> int:
    manifest = generate_dataset(args.out, per_class=args.per_class, seed=args.seed)
    config = {
        "manifest": "manifest.csv",
        "out_dir": "results",
        "split_seed": args.seed,
        "smote": {"enabled": True, "k": 5, "seed": args.seed},
        "rf": {"n_trees": 100, "seed": args.seed},
    }
    cfg_path = Path(args.out) / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {3 * args.per_class} images, {manifest} and {cfg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cxrseverity",
                                 description="Chest X-ray severity classification pipeline.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="resize, denoise and enhance a directory of images")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    _add_steps(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="extract baseline features for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    p.add_argument("--workers", type=int, default=1)
    _add_steps(p)
    p.set_defaults(func=cmd_features)

    def embedding_args(p):
        p.add_argument("--manifest", required=True)
        p.add_argument("--embeddings", required=True)
        p.add_argument("--no-pool", action="store_true",
                       help="keep flattened 7x7x2048 rows instead of average pooling")

    p = sub.add_parser("balance", help="SMOTE-balance an embedding matrix")
    embedding_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("train", help="train a classifier on an embedding matrix")
    embedding_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--classifier", choices=("svm", "rf"), default="svm")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", default="scale")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=100)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--m-try", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--smote", action="store_true", help="SMOTE-balance the training rows first")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--smote-seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model against labelled embeddings")
    embedding_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="directory for report.txt/report.json/confusion.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", help="severity class from six region scores (0-2 each)")
    p.add_argument("scores", nargs="+", type=int)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pipeline", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config's out_dir")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("grid", help="cross-validated SVM grid search on the training split")
    p.add_argument("--config", required=True)
    p.add_argument("--C", type=float, nargs="+", required=True)
    p.add_argument("--gamma", nargs="+", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("gen-synthetic", help="write the synthetic mini-dataset and a config")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, IndexError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
