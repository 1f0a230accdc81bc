"""Binary archive for noise datasets.

Layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"PRLNOISE"
    8       2     format version (u16, currently 1)
    10      4x6   N, M, K, W, H, C (u32 each)
    34      8     master seed (u64)
    42      1     flags (bit 0: smooth interpolation, bit 1: independent channels)
    43      4     sample count T (u32)
    47      ...   T records, each:
                    label, n, m, k (u32 each), seed (u64),
                    W*H*C float64 values in (W, H, C) row-major order

The file ends exactly after the last record.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import FormatError, VersionError
from ..perlin import DatasetConfig, NoiseDataset, NoiseSample

MAGIC = b"PRLNOISE"
VERSION = 1
_HEADER = struct.Struct("<8sH6IQBI")
_RECORD = struct.Struct("<4IQ")


def encode_noise_dataset(ds: NoiseDataset) -> bytes:
    cfg = ds.config
    flags = (1 if cfg.smooth else 0) | (2 if cfg.independent_channels else 0)
    parts = [
        _HEADER.pack(
            MAGIC, VERSION, cfg.N, cfg.M, cfg.K, cfg.width, cfg.height, cfg.channels,
            cfg.master_seed, flags, len(ds.samples),
        )
    ]
    shape = (cfg.width, cfg.height, cfg.channels)
    for s in ds.samples:
        if s.values.shape != shape:
            raise ValueError(f"sample shape {s.values.shape} differs from config {shape}")
        parts.append(_RECORD.pack(s.label, s.n, s.m, s.k, s.seed))
        parts.append(np.ascontiguousarray(s.values, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_noise_dataset(buf: bytes) -> NoiseDataset:
    if len(buf) < _HEADER.size:
        raise FormatError(f"truncated header: {len(buf)} of {_HEADER.size} bytes", len(buf))
    magic, version, N, M, K, W, H, C, seed, flags, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise VersionError(f"unsupported archive version {version}", 8)
    if flags & ~3:
        raise FormatError(f"unknown flag bits {flags:#x}", 42)
    cfg = DatasetConfig(N, M, K, W, H, C, seed, bool(flags & 1), bool(flags & 2))
    if count != cfg.total:
        raise FormatError(f"sample count {count} does not equal N*M*K = {cfg.total}", 43)
    nvals = W * H * C
    offset = _HEADER.size
    samples = []
    for i in range(count):
        if offset + _RECORD.size + 8 * nvals > len(buf):
            raise FormatError(f"truncated record {i}", offset)
        label, n, m, k, sseed = _RECORD.unpack_from(buf, offset)
        offset += _RECORD.size
        values = np.frombuffer(buf, dtype="<f8", count=nvals, offset=offset).astype(np.float64)
        offset += 8 * nvals
        samples.append(NoiseSample(values.reshape(W, H, C), label, n, m, k, sseed))
    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes after the last record", offset)
    return NoiseDataset(cfg, samples)


def write_noise_dataset(ds: NoiseDataset, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_noise_dataset(ds))


def read_noise_dataset(path) -> NoiseDataset:
    with open(os.fspath(path), "rb") as f:
        return decode_noise_dataset(f.read())
