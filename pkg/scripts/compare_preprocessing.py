"""Compare preprocessing chains on the synthetic dataset by SVM/RF test accuracy.

    python scripts/compare_preprocessing.py --out runs/preproc
"""

import argparse
from pathlib import Path

from cxrseverity.pipeline import PipelineConfig, run_pipeline
from cxrseverity.synthetic import generate_dataset

CHAINS = {
    "none": [],
    "median": [{"name": "median", "radius": 1}],
    "median+he": [{"name": "median", "radius": 1}, {"name": "hist_equalize"}],
    "median+clahe": [{"name": "median", "radius": 1},
                     {"name": "clahe", "tiles_x": 8, "tiles_y": 8, "clip_limit": 2.0}],
    "bilateral+he": [{"name": "bilateral", "radius": 2}, {"name": "hist_equalize"}],
    "mean+he": [{"name": "mean", "radius": 1}, {"name": "hist_equalize"}],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/preproc")
    ap.add_argument("--per-class", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    manifest = generate_dataset(out / "data", per_class=args.per_class, seed=args.seed)
    print(f"{'chain':<14}{'SVM acc':>10}{'SVM F1':>10}{'RF acc':>10}")
    for name, steps in CHAINS.items():
        cfg = PipelineConfig(manifest=str(manifest), out_dir=str(out / name), steps=steps,
                             split_seed=args.seed)
        res = run_pipeline(cfg)
        svm = res.reports[("baseline", "svm")]
        print(f"{name:<14}{svm.accuracy:>10.3f}{svm.average.f1:>10.3f}"
              f"{res.comparison['baseline']['rf']:>10.3f}")


if __name__ == "__main__":
    main()
