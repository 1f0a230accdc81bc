"""Reader and writer for the IDX array format used by MNIST-style datasets.

Header: two zero bytes, a dtype code, the rank, then ``rank`` big-endian
u32 dimension sizes; the payload follows in row-major order. Only unsigned
bytes (0x08) and big-endian float32 (0x0D) are accepted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, UnsupportedDtypeError

DTYPES = {0x08: np.dtype("u1"), 0x0D: np.dtype(">f4")}
_KNOWN_CODES = {0x08, 0x09, 0x0B, 0x0C, 0x0D, 0x0E}


@dataclass
class LabeledSet:
    """Images ``(N, W, H, C)`` in float64 with 0-based integer labels."""

    images: np.ndarray
    labels: np.ndarray
    name: str = ""
    class_names: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return len(self.class_names) if self.class_names else int(self.labels.max()) + 1


def decode_idx(buf: bytes) -> np.ndarray:
    if len(buf) < 4:
        raise FormatError("truncated IDX magic", len(buf))
    if buf[0] != 0 or buf[1] != 0:
        raise FormatError("IDX magic must start with two zero bytes", 0)
    code, rank = buf[2], buf[3]
    if code not in DTYPES:
        kind = "unsupported" if code in _KNOWN_CODES else "unknown"
        raise UnsupportedDtypeError(f"{kind} IDX dtype code {code:#04x}", 2)
    if rank == 0:
        raise FormatError("IDX rank must be >= 1", 3)
    if len(buf) < 4 + 4 * rank:
        raise FormatError(f"truncated IDX dimensions (rank {rank})", len(buf))
    dims = struct.unpack_from(f">{rank}I", buf, 4)
    dtype = DTYPES[code]
    start = 4 + 4 * rank
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) - start != expected:
        raise FormatError(
            f"IDX payload holds {len(buf) - start} bytes, dims {dims} need {expected}", start
        )
    return np.frombuffer(buf, dtype=dtype, offset=start).reshape(dims).copy()


def encode_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype == np.uint8:
        code, payload = 0x08, array.astype("u1")
    elif array.dtype.kind == "f":
        code, payload = 0x0D, array.astype(">f4")
    else:
        raise UnsupportedDtypeError(f"cannot encode dtype {array.dtype} as IDX")
    head = bytes([0, 0, code, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    return head + np.ascontiguousarray(payload).tobytes()


def read_idx(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    try:
        return decode_idx(buf)
    except FormatError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def write_idx(path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_idx(array))


def load_idx(images_path, labels_path) -> LabeledSet:
    """Pair an IDX image file ``(N, rows, cols)`` with an IDX label file ``(N,)``.

    Byte images are scaled to [0, 1]. The result uses the package's
    ``(N, W, H, 1)`` layout, i.e. ``images[i, x, y, 0]`` is column x, row y.
    """
    raw = read_idx(images_path)
    labels = read_idx(labels_path)
    if raw.ndim not in (2, 3):
        raise FormatError(f"{images_path}: expected rank-3 images, got rank {raw.ndim}", 3)
    if labels.ndim != 1 or labels.dtype != np.uint8:
        raise FormatError(f"{labels_path}: labels must be a rank-1 byte array", 2)
    if raw.shape[0] != labels.shape[0]:
        raise FormatError(
            f"image/label count mismatch: {raw.shape[0]} images vs {labels.shape[0]} labels", 4
        )
    images = raw.astype(np.float64)
    if raw.dtype == np.uint8:
        images /= 255.0
    if images.ndim == 2:
        images = images[:, :, None]
    images = images.transpose(0, 2, 1)[..., None]
    return LabeledSet(np.ascontiguousarray(images), labels.astype(np.int64), name=Path(images_path).name)
