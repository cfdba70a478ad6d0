"""Grayscale raster type, PGM/PNG I/O and bilinear resizing."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

NETWORK_INPUT_SIZE = 224


class ImageError(Exception):
    """Base class for image I/O failures. Carries the offending path."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class ImageNotFoundError(ImageError, FileNotFoundError):
    pass


class UnsupportedFormatError(ImageError):
    pass


class CorruptHeaderError(ImageError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit grayscale image stored as a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255) or not np.all(np.equal(np.mod(px, 1), 0)):
                raise ValueError("intensities must be integers in [0, 255]")
            px = px.astype(np.uint8)
        px = np.array(px, dtype=np.uint8, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_values(cls, width: int, height: int, data: Sequence[int]) -> "GrayImage":
        data = np.asarray(data)
        if data.size != width * height:
            raise ValueError(f"data length {data.size} != {width}x{height}")
        return cls(data.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def round_half_up(x) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def _read_pgm(path: Path, raw: bytes) -> GrayImage:
    # Header: magic, width, height, maxval as whitespace-separated tokens, '#' comments allowed.
    tokens = []
    pos = 2
    n = len(raw)
    while len(tokens) < 3:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise CorruptHeaderError(path, "truncated PGM header")
        tok = raw[start:pos]
        if not tok.isdigit():
            raise CorruptHeaderError(path, f"non-numeric header field {tok!r}")
        tokens.append(int(tok))
    if pos >= n or not raw[pos:pos + 1].isspace():
        raise CorruptHeaderError(path, "missing whitespace after maxval")
    pos += 1
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise CorruptHeaderError(path, f"invalid dimensions {width}x{height}")
    if maxval < 1 or maxval > 65535:
        raise CorruptHeaderError(path, f"invalid maxval {maxval}")
    if maxval > 255:
        raise UnsupportedFormatError(path, f"16-bit PGM (maxval {maxval}) is not supported")
    body = raw[pos:pos + width * height]
    if len(body) < width * height:
        raise CorruptHeaderError(path, f"expected {width * height} pixel bytes, found {len(body)}")
    px = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    if np.any(px > maxval):
        raise CorruptHeaderError(path, "pixel value exceeds maxval")
    return GrayImage(px)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luminance, rounded half up."""
    rgb = np.asarray(rgb, dtype=np.float64)
    lum = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(round_half_up(lum), 0, 255).astype(np.uint8)


def _read_png(path: Path) -> GrayImage:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return GrayImage(np.asarray(im, dtype=np.uint8))
            if mode in ("RGB", "RGBA"):
                return GrayImage(rgb_to_gray(np.asarray(im.convert("RGB"))))
            if mode == "P":
                return GrayImage(rgb_to_gray(np.asarray(im.convert("RGB"))))
            if mode == "LA":
                return GrayImage(np.asarray(im.getchannel(0), dtype=np.uint8))
    except OSError as exc:
        raise CorruptHeaderError(path, f"unreadable PNG ({exc})") from exc
    raise UnsupportedFormatError(path, f"PNG mode {mode!r} is not 8-bit gray or RGB")


def load_image(path) -> GrayImage:
    """Read a binary PGM (P5, maxval <= 255) or an 8-bit PNG as a GrayImage."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFoundError(path, "no such file")
    raw = path.read_bytes()
    if raw[:2] == b"P5":
        return _read_pgm(path, raw)
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise UnsupportedFormatError(path, "not a binary PGM or PNG file")


def save_pgm(img: GrayImage, path) -> None:
    path = Path(path)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(img.pixels.tobytes())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}", os.fspath(path)) from exc


def _source_coords(n_in: int, n_out: int):
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bilinear resampling with pixel-centre alignment and clamped edges."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be positive, got {out_w}x{out_h}")
    if (out_w, out_h) == (img.width, img.height):
        return img
    src = img.pixels.astype(np.float64)
    x0, x1, fx = _source_coords(img.width, out_w)
    y0, y1, fy = _source_coords(img.height, out_h)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return GrayImage(np.clip(round_half_up(out), 0, 255).astype(np.uint8))


def to_unit_reals(img: GrayImage) -> np.ndarray:
    return img.pixels.astype(np.float64) / 255.0
