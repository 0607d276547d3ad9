"""Grayscale image I/O, bicubic resampling, and image<->vector conversion.

Canonical on-disk format is binary PGM (P5, maxval 255); 8-bit PNG is
accepted for ingestion and converted to luminance with Rec.601 weights.
Resampling uses the Keys bicubic kernel with a = -0.5, half-pixel center
alignment, and edge clamping; the convention is fixed so independent
implementations can agree bit-for-bit on the same inputs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, InputError


@dataclass(frozen=True)
class GrayImage:
    """2-D grayscale raster with row-major float pixels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise InputError(f"GrayImage: expected 2-D pixels, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise InputError("GrayImage: non-finite pixel values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InputError("GrayImage: pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _read_pgm_token(buf: io.BufferedReader) -> bytes:
    # Skips whitespace and '#' comments between header fields.
    tok = b""
    while True:
        c = buf.read(1)
        if c == b"":
            raise FormatError("PGM header truncated")
        if c == b"#":
            while c not in (b"\n", b""):
                c = buf.read(1)
            continue
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def load_image(path) -> GrayImage:
    """Load an 8-bit grayscale PGM (binary P5) or 8-bit PNG as [0,1] floats."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"load_image: no such file: {path}")
    if path.suffix.lower() == ".png":
        return _load_png(path)
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P5":
            raise FormatError(f"{path}: bad magic {magic!r}, expected P5")
        try:
            width = int(_read_pgm_token(f))
            height = int(_read_pgm_token(f))
            maxval = int(_read_pgm_token(f))
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric header field ({exc})") from exc
        if width < 1 or height < 1:
            raise FormatError(f"{path}: bad dimensions {width}x{height}")
        if maxval != 255:
            raise FormatError(f"{path}: unsupported maxval {maxval}, expected 255")
        data = f.read(width * height)
        if len(data) != width * height:
            raise FormatError(
                f"{path}: pixel data truncated ({len(data)} of {width * height} bytes)"
            )
    arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return GrayImage(arr.astype(np.float64) / 255.0)


def _load_png(path: Path) -> GrayImage:
    with Image.open(path) as img:
        if img.mode in ("I", "I;16", "I;16B", "F"):
            raise FormatError(f"{path}: unsupported bit depth (mode {img.mode})")
        if img.mode != "L":
            # Rec.601 luminance (Pillow's L conversion uses 299/587/114).
            img = img.convert("RGB").convert("L")
        arr = np.asarray(img, dtype=np.float64)
    return GrayImage(arr / 255.0)


def save_image(img: GrayImage, path) -> None:
    """Write as PGM (.pgm) or PNG (.png); values quantized round-half-up."""
    path = Path(path)
    data = np.floor(img.pixels * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    if path.suffix.lower() == ".png":
        Image.fromarray(data, mode="L").save(path)
        return
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
        f.write(data.tobytes())


def _keys_weights(frac: np.ndarray) -> np.ndarray:
    """4-tap Keys (a=-0.5) weights for offsets (-1, 0, 1, 2) - frac."""
    a = -0.5
    t = np.stack([frac + 1.0, frac, 1.0 - frac, 2.0 - frac])
    t = np.abs(t)
    w_near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    w_far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, w_near, np.where(t < 2.0, w_far, 0.0))


def _resample_axis(arr: np.ndarray, out_len: int) -> np.ndarray:
    """Resample along axis 0 with half-pixel-center source coordinates.

    Computed as base + sum_i w_i * (tap_i - base), which makes constant
    rows and the identity resize exact despite rounding in the weights.
    """
    in_len = arr.shape[0]
    scale = in_len / out_len
    src = (np.arange(out_len) + 0.5) * scale - 0.5
    i0 = np.floor(src).astype(np.int64)
    frac = src - i0
    w = _keys_weights(frac)  # (4, out_len)
    taps = np.stack([np.clip(i0 + d, 0, in_len - 1) for d in (-1, 0, 1, 2)])
    base = arr[np.clip(i0, 0, in_len - 1)]
    out = base.copy()
    for k in range(4):
        diff = arr[taps[k]] - base
        out += w[k].reshape((-1,) + (1,) * (arr.ndim - 1)) * diff
    return out


def bicubic_resample(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Raw (unclamped) separable bicubic resample of a 2-D array."""
    arr = np.asarray(arr, dtype=np.float64)
    out = _resample_axis(arr, out_h)
    out = _resample_axis(out.T, out_w).T
    return out


def bicubic_resize(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bicubic resize with output clamped to [0, 1]."""
    if out_w < 1 or out_h < 1:
        raise InputError(f"bicubic_resize: bad output size {out_w}x{out_h}")
    out = bicubic_resample(img.pixels, out_w, out_h)
    return GrayImage(np.clip(out, 0.0, 1.0))


def box_prefilter(arr: np.ndarray, factor: int) -> np.ndarray:
    """Average over factor x factor blocks; requires an integer factor."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    if factor < 1 or h % factor or w % factor:
        raise InputError(
            f"box_prefilter: factor {factor} does not divide {h}x{w}"
        )
    return arr.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def vectorize(img: GrayImage) -> np.ndarray:
    """Row-major flattening of the pixel raster."""
    return img.pixels.ravel().copy()


def devectorize(v, width: int, height: int) -> GrayImage:
    """Reshape a vector into an image, clamping out-of-range values."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != width * height:
        raise InputError(
            f"devectorize: length {v.shape[0]} != {width}x{height}"
        )
    if not np.all(np.isfinite(v)):
        raise InputError("devectorize: non-finite values")
    return GrayImage(np.clip(v.reshape(height, width), 0.0, 1.0))
