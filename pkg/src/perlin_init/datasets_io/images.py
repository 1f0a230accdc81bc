"""Grayscale image-grid export as binary PGM (``P5``, 8-bit, maxval 255).

Planes are ``(W, H)`` arrays indexed ``[x, y]`` with values in [0, 1].
Tiles are laid out row-major on a ``ceil(sqrt(n))``-column grid, with 1-pixel
black separators between tiles and around the border. Values are quantized
as ``floor(255 * v + 0.5)`` after clipping to [0, 1].
"""

from __future__ import annotations

import math
import re

import numpy as np

from ..errors import FormatError, InvalidInputError


def grid_layout(count: int) -> tuple[int, int]:
    """``(rows, cols)`` of the tile grid for ``count`` tiles."""
    cols = math.ceil(math.sqrt(count))
    return math.ceil(count / cols), cols


def quantize(values: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def image_grid(planes) -> np.ndarray:
    """Tile planes into a ``(rows_px, cols_px)`` uint8 raster (row = y)."""
    planes = [np.asarray(p, dtype=np.float64) for p in planes]
    if not planes:
        raise InvalidInputError("image grid needs at least one plane")
    shape = planes[0].shape
    if len(shape) != 2 or any(p.shape != shape for p in planes):
        raise InvalidInputError("all planes must be 2-D and equally sized")
    pw, ph = shape
    rows, cols = grid_layout(len(planes))
    raster = np.zeros((rows * (ph + 1) + 1, cols * (pw + 1) + 1), dtype=np.uint8)
    for t, plane in enumerate(planes):
        r, c = divmod(t, cols)
        y0 = 1 + r * (ph + 1)
        x0 = 1 + c * (pw + 1)
        raster[y0 : y0 + ph, x0 : x0 + pw] = quantize(plane).T
    return raster


def encode_pgm(raster: np.ndarray) -> bytes:
    h, w = raster.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(raster, dtype=np.uint8).tobytes()


def decode_pgm(buf: bytes) -> np.ndarray:
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", buf)
    if m is None:
        raise FormatError("not a binary PGM header", 0)
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM is supported, maxval={maxval}", m.start(3))
    start = m.end()
    if len(buf) - start != w * h:
        raise FormatError(f"PGM payload holds {len(buf) - start} bytes, expected {w * h}", start)
    return np.frombuffer(buf, dtype=np.uint8, offset=start).reshape(h, w).copy()


def write_image_grid(planes, path) -> tuple[int, int]:
    """Write the tiled planes to ``path``; returns ``(width, height)`` in pixels."""
    raster = image_grid(planes)
    with open(path, "wb") as f:
        f.write(encode_pgm(raster))
    return raster.shape[1], raster.shape[0]


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pgm(f.read())
