"""Minority recall of the SVM with and without SMOTE on imbalanced 2-D Gaussians.

    python scripts/imbalance_experiment.py --ratios 5 10 20 --seeds 10
"""

import argparse

import numpy as np

from cxrseverity.pipeline import PipelineConfig, SmoteParams, fit_model


def minority_recall(seed, ratio, smote, n_min=20, shift=1.5):
    r = np.random.default_rng([seed, ratio])
    centres = np.array([[0.0, 0.0], [shift, shift]])
    y = np.repeat([0, 1], [ratio * n_min, n_min])
    X = centres[y] + r.normal(size=(len(y), 2))
    Xt = centres[1] + r.normal(size=(1000, 2))
    cfg = PipelineConfig(manifest="unused", smote=SmoteParams(enabled=smote, k=5, seed=seed))
    scaler, model = fit_model("svm", X, y, cfg)
    return float(np.mean(model.predict(scaler.transform(Xt)) == 1))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ratios", type=int, nargs="+", default=[5, 10, 20])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    print(f"{'ratio':>6} {'plain':>8} {'smote':>8}")
    for ratio in args.ratios:
        plain = [minority_recall(s, ratio, False) for s in range(args.seeds)]
        smote = [minority_recall(s, ratio, True) for s in range(args.seeds)]
        print(f"{ratio:>5}:1 {np.mean(plain):>8.3f} {np.mean(smote):>8.3f}")


if __name__ == "__main__":
    main()
