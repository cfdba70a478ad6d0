"""Denoising filters and histogram-based contrast enhancement.

All filters use replicate padding at the borders and round to the nearest
integer (halves round up). Output always has the input's shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imagecore import GrayImage, round_half_up

N_LEVELS = 256


@dataclass(frozen=True)
class FilterWindow:
    radius: int = 1

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError(f"window radius must be an integer >= 1, got {self.radius}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1


DEFAULT_WINDOW = FilterWindow(1)


def _windows(img: GrayImage, w: FilterWindow) -> np.ndarray:
    padded = np.pad(img.pixels, w.radius, mode="edge")
    return sliding_window_view(padded, (w.side, w.side))


def mean_filter(img: GrayImage, w: FilterWindow = DEFAULT_WINDOW) -> GrayImage:
    n = w.side * w.side
    sums = _windows(img, w).sum(axis=(-2, -1), dtype=np.int64)
    # Integer round-half-up of sums / n.
    out = (2 * sums + n) // (2 * n)
    return GrayImage(out.astype(np.uint8))


def median_filter(img: GrayImage, w: FilterWindow = DEFAULT_WINDOW) -> GrayImage:
    win = _windows(img, w).reshape(img.height, img.width, -1)
    mid = win.shape[-1] // 2
    out = np.partition(win, mid, axis=-1)[..., mid]
    return GrayImage(out.astype(np.uint8))


def gaussian_spatial_kernel(w: FilterWindow, sigma_spatial: float) -> np.ndarray:
    offs = np.arange(-w.radius, w.radius + 1, dtype=np.float64)
    d2 = offs[:, None] ** 2 + offs[None, :] ** 2
    return np.exp(-d2 / (2.0 * sigma_spatial ** 2))


def bilateral_filter(img: GrayImage, w: FilterWindow = DEFAULT_WINDOW,
                     sigma_spatial: float = 1.0, sigma_range: float = 25.0) -> GrayImage:
    if not (sigma_spatial > 0 and sigma_range > 0):
        raise ValueError("sigma_spatial and sigma_range must be positive")
    spatial = gaussian_spatial_kernel(w, sigma_spatial)
    win = _windows(img, w).astype(np.float64)
    centre = img.pixels.astype(np.float64)[..., None, None]
    weights = spatial * np.exp(-((win - centre) ** 2) / (2.0 * sigma_range ** 2))
    out = (weights * win).sum(axis=(-2, -1)) / weights.sum(axis=(-2, -1))
    return GrayImage(np.clip(round_half_up(out), 0, 255).astype(np.uint8))


def equalization_lut(hist: np.ndarray) -> np.ndarray:
    """Map each level v to round((cdf(v) - cdf_min) / (N - cdf_min) * 255).

    ``hist`` holds non-negative integer counts. When every count sits in a
    single level the identity mapping is returned.
    """
    hist = np.asarray(hist, dtype=np.int64)
    cdf = np.cumsum(hist)
    total = int(cdf[-1])
    nonzero = cdf[cdf > 0]
    if nonzero.size == 0:
        return np.arange(N_LEVELS, dtype=np.uint8)
    cdf_min = int(nonzero[0])
    denom = total - cdf_min
    if denom == 0:
        return np.arange(N_LEVELS, dtype=np.uint8)
    num = np.maximum(cdf - cdf_min, 0) * 255
    lut = (2 * num + denom) // (2 * denom)
    return np.clip(lut, 0, 255).astype(np.uint8)


def hist_equalize(img: GrayImage) -> GrayImage:
    hist = np.bincount(img.pixels.ravel(), minlength=N_LEVELS)
    if np.count_nonzero(hist) <= 1:
        return img
    return GrayImage(equalization_lut(hist)[img.pixels])


def tile_bounds(n: int, tiles: int) -> list[tuple[int, int]]:
    """Split ``n`` pixels into ``tiles`` runs; the remainder goes to the last run."""
    size = n // tiles
    bounds = [(i * size, (i + 1) * size) for i in range(tiles)]
    bounds[-1] = (bounds[-1][0], n)
    return bounds


def clip_histogram(hist: np.ndarray, clip_limit: float, tile_pixels: int) -> np.ndarray:
    """Clip bins at ``clip_limit * tile_pixels / 256`` and spread the excess evenly.

    The ceiling is floored to an integer (minimum 1). Excess is redistributed in
    a single pass of ``excess // 256`` per bin; the remainder is dropped.
    """
    if math.isinf(clip_limit):
        return hist.astype(np.int64)
    ceiling = max(1, int(math.floor(clip_limit * tile_pixels / N_LEVELS)))
    hist = hist.astype(np.int64)
    excess = int(np.maximum(hist - ceiling, 0).sum())
    clipped = np.minimum(hist, ceiling)
    return clipped + excess // N_LEVELS


def _tile_lut(tile: np.ndarray, clip_limit: float) -> np.ndarray:
    hist = np.bincount(tile.ravel(), minlength=N_LEVELS)
    if np.count_nonzero(hist) <= 1:
        return np.arange(N_LEVELS, dtype=np.uint8)
    return equalization_lut(clip_histogram(hist, clip_limit, tile.size))


def _interp_axis(n: int, bounds: list[tuple[int, int]]):
    # For each pixel: indices of the two bracketing tile centres and the weight on the second.
    centres = np.array([(a + b - 1) / 2.0 for a, b in bounds])
    pos = np.arange(n, dtype=np.float64)
    hi = np.searchsorted(centres, pos, side="right")
    lo = np.clip(hi - 1, 0, len(centres) - 1)
    hi = np.clip(hi, 0, len(centres) - 1)
    span = centres[hi] - centres[lo]
    frac = np.where(span > 0, (pos - centres[lo]) / np.where(span > 0, span, 1.0), 0.0)
    return lo, hi, np.clip(frac, 0.0, 1.0)


def clahe(img: GrayImage, tiles_x: int = 8, tiles_y: int = 8, clip_limit: float = 2.0) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    Parameters
    ----------
    tiles_x, tiles_y : int
        Tile grid. Remainder pixels join the last tile column / row.
    clip_limit : float
        Bin ceiling as a multiple of the uniform bin height; ``math.inf`` disables clipping.
    """
    if tiles_x < 1 or tiles_y < 1:
        raise ValueError(f"tile counts must be >= 1, got {tiles_x}x{tiles_y}")
    if tiles_x > img.width or tiles_y > img.height:
        raise ValueError(f"{tiles_x}x{tiles_y} tiles do not fit a {img.width}x{img.height} image")
    if not clip_limit >= 1:
        raise ValueError(f"clip_limit must be >= 1, got {clip_limit}")
    px = img.pixels
    xb = tile_bounds(img.width, tiles_x)
    yb = tile_bounds(img.height, tiles_y)
    luts = np.empty((tiles_y, tiles_x, N_LEVELS), dtype=np.float64)
    for ty, (y0, y1) in enumerate(yb):
        for tx, (x0, x1) in enumerate(xb):
            luts[ty, tx] = _tile_lut(px[y0:y1, x0:x1], clip_limit)

    xl, xh, fx = _interp_axis(img.width, xb)
    yl, yh, fy = _interp_axis(img.height, yb)
    v = px.astype(np.intp)
    fx = fx[None, :]
    fy = fy[:, None]
    top = luts[yl[:, None], xl[None, :], v] * (1 - fx) + luts[yl[:, None], xh[None, :], v] * fx
    bot = luts[yh[:, None], xl[None, :], v] * (1 - fx) + luts[yh[:, None], xh[None, :], v] * fx
    out = top * (1 - fy) + bot * fy
    return GrayImage(np.clip(round_half_up(out), 0, 255).astype(np.uint8))


STEPS = {
    "mean": mean_filter,
    "median": median_filter,
    "bilateral": bilateral_filter,
    "hist_equalize": hist_equalize,
    "clahe": clahe,
}

DEFAULT_STEPS = (("median", {"radius": 1}), ("hist_equalize", {}))


def apply_step(img: GrayImage, name: str, params: dict | None = None) -> GrayImage:
    params = dict(params or {})
    if name not in STEPS:
        raise ValueError(f"unknown preprocessing step {name!r}; choose from {sorted(STEPS)}")
    if name in ("mean", "median", "bilateral"):
        params["w"] = FilterWindow(int(params.pop("radius", 1)))
    return STEPS[name](img, **params)


def apply_steps(img: GrayImage, steps) -> GrayImage:
    for name, params in steps:
        img = apply_step(img, name, params)
    return img
