"""Numeric primitives shared by the noise renderer and the network engine.

Tensors are plain ``numpy.ndarray`` objects holding C-ordered (row-major)
float64 data. Randomness comes from :class:`Rng`, a thin wrapper around the
Philox4x64-10 counter-based generator. A stream is addressed by a 128-bit
key ``(seed, stream)`` and starts at counter zero, so ``substream(seed, i)``
is a pure function of ``(seed, i)`` and produces the same bits on every
platform.
"""

from __future__ import annotations

import struct

import numpy as np

Tensor = np.ndarray

DTYPE = np.float64
_U64 = (1 << 64) - 1


class ShapeError(ValueError):
    """Operand shapes do not conform."""


def _check_seed(value: int, what: str) -> int:
    value = int(value)
    if value < 0 or value > _U64:
        raise ValueError(f"{what} must be an unsigned 64-bit integer, got {value}")
    return value


class Rng:
    """Reproducible random stream keyed by ``(seed, stream)``."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = _check_seed(seed, "seed")
        self.stream = _check_seed(stream, "stream")
        self._bitgen = np.random.Philox(key=[self.seed, self.stream])
        self._gen = np.random.Generator(self._bitgen)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream})"

    def random(self, size=None):
        """Uniform doubles on [0, 1) built from the top 53 bits of each word."""
        return self._gen.random(size)

    def normal(self, size=None, scale: float = 1.0):
        return self._gen.normal(0.0, scale, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self._gen.choice(n, size=k, replace=False)

    def next_u64(self) -> int:
        return int(self._bitgen.random_raw())

    def get_state(self) -> dict:
        return self._bitgen.state

    def set_state(self, state: dict) -> None:
        self._bitgen.state = state


def substream(seed: int, index: int) -> Rng:
    """Independent stream number ``index`` of ``seed``."""
    return Rng(seed, index)


def derive_seed(seed: int, index: int) -> int:
    """A child 64-bit seed: the first raw word of ``substream(seed, index)``."""
    return substream(seed, index).next_u64()


def uniform(rng: Rng, lo: float, hi: float) -> float:
    """One draw from ``[lo, hi)``."""
    if not lo < hi:
        raise ValueError(f"invalid range: lo={lo!r} must be < hi={hi!r}")
    value = lo + (hi - lo) * float(rng.random())
    # lo + (hi - lo) * u can round up to hi for u close to 1
    if value >= hi:
        value = float(np.nextafter(hi, lo))
    return value


def uniform_array(rng: Rng, lo: float, hi: float, size) -> np.ndarray:
    if not lo < hi:
        raise ValueError(f"invalid range: lo={lo!r} must be < hi={hi!r}")
    values = lo + (hi - lo) * rng.random(size)
    return np.minimum(values, np.nextafter(hi, lo))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an ``M x K`` and a ``K x N`` tensor."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def tensor_to_bytes(t: Tensor) -> bytes:
    """Serialize as ``u8 ndim, u32 dims..., float64 payload`` (little-endian)."""
    t = np.asarray(t, dtype="<f8")
    head = struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
    return head + t.tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[Tensor, int]:
    """Inverse of :func:`tensor_to_bytes`; returns the tensor and the end offset."""
    if offset + 1 > len(buf):
        raise ValueError(f"truncated tensor header at byte {offset}")
    (ndim,) = struct.unpack_from("<B", buf, offset)
    offset += 1
    if offset + 4 * ndim > len(buf):
        raise ValueError(f"truncated tensor dims at byte {offset}")
    dims = struct.unpack_from(f"<{ndim}I", buf, offset)
    offset += 4 * ndim
    nbytes = 8 * int(np.prod(dims, dtype=np.int64))
    if offset + nbytes > len(buf):
        raise ValueError(f"truncated tensor payload at byte {offset}")
    data = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=offset)
    return np.reshape(data.astype(DTYPE), dims), offset + nbytes
