"""Procedural chest-radiograph-like images for running the pipeline without real data.

Each image has two dark elliptical lung fields, each cut into upper/middle/lower
bands (six regions in total). A region with score 1 gets a small bright
opacity patch, score 2 a large one. Normal images score 0 everywhere,
non-severe images total 3-6 and severe images total 10-12, so the three
classes differ in how much lung area is opacified. Opacities are placed
preferentially in the lower zones.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import N_REGIONS, ClassLabel, Manifest, severity_class, write_manifest
from .imagecore import GrayImage, resize_bilinear, save_pgm

IMAGE_SIZE = 128
COVERAGE = {1: 0.45, 2: 0.75}
OPACITY_GAIN = {1: 85.0, 2: 100.0}
# Upper / middle / lower zone preference; opacities favour the lower zones.
ZONE_WEIGHTS = np.array([0.1, 0.3, 0.6])
TOTAL_RANGES = {
    ClassLabel.NORMAL: (0, 0),
    ClassLabel.NON_SEVERE: (3, 6),
    ClassLabel.SEVERE: (10, 12),
}


def draw_region_scores(label: ClassLabel, rng: np.random.Generator) -> tuple[int, ...]:
    lo, hi = TOTAL_RANGES[label]
    total = int(rng.integers(lo, hi + 1))
    scores = np.zeros(N_REGIONS, dtype=int)
    for _ in range(total):
        open_ = np.flatnonzero(scores < 2)
        w = ZONE_WEIGHTS[open_ % 3]
        scores[rng.choice(open_, p=w / w.sum())] += 1
    out = tuple(int(s) for s in scores)
    assert severity_class(out) == label
    return out


def _smooth_field(rng, size: int, coarse: int = 8) -> np.ndarray:
    low = rng.integers(0, 256, (coarse, coarse)).astype(np.uint8)
    return resize_bilinear(GrayImage(low), size, size).pixels.astype(np.float64)


def render_radiograph(scores, rng: np.random.Generator, size: int = IMAGE_SIZE) -> GrayImage:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = 150.0 + 40.0 * (yy / size) + rng.normal(0, 4)
    jitter = rng.uniform(-0.02, 0.02, 4) * size
    half_w, half_h = 0.17 * size, 0.33 * size
    cy = 0.5 * size + jitter[0]
    lungs = []
    for side, cx in enumerate((0.3 * size + jitter[1], 0.7 * size + jitter[2])):
        mask = ((xx - cx) / half_w) ** 2 + ((yy - cy) / half_h) ** 2 <= 1.0
        img[mask] = 55.0 + 10.0 * rng.random()
        lungs.append(mask)

    band_edges = cy - half_h + np.array([0, 1, 2, 3]) * (2 * half_h / 3)
    for r, s in enumerate(scores):
        if s == 0:
            continue
        lung, band = divmod(r, 3)
        region = lungs[lung] & (yy >= band_edges[band]) & (yy < band_edges[band + 1])
        if not region.any():
            continue
        field = _smooth_field(rng, size)
        cut = np.quantile(field[region], 1.0 - COVERAGE[s])
        patch = region & (field >= cut)
        img[patch] += OPACITY_GAIN[s]

    img += rng.normal(0, 8.0, img.shape)
    # Sparse impulse noise, the kind a median filter removes.
    impulses = rng.random(img.shape) < 0.01
    img[impulses] = rng.choice([0.0, 255.0], impulses.sum())
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def generate_dataset(out_dir, per_class: int = 60, seed: int = 0, size: int = IMAGE_SIZE) -> Path:
    """Write ``per_class`` PGM images per class plus a region-score manifest.

    Returns the manifest path (``manifest.csv`` inside ``out_dir``).
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    paths, labels, all_scores = [], [], []
    for label in ClassLabel:
        for i in range(per_class):
            rng = np.random.default_rng([seed, int(label), i])
            scores = draw_region_scores(label, rng)
            img = render_radiograph(scores, rng, size)
            rel = f"images/{label.slug}_{i:03d}.pgm"
            save_pgm(img, out_dir / rel)
            paths.append(rel)
            labels.append(int(label))
            all_scores.append(scores)
    manifest_path = out_dir / "manifest.csv"
    write_manifest(Manifest(paths, np.array(labels), all_scores, out_dir), manifest_path)
    return manifest_path
