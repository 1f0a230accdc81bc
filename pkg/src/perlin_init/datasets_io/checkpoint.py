"""Versioned binary checkpoint container.

Layout (integers little-endian)::

    magic            8 bytes  b"PRLNCKPT"
    format version   u16      (currently 1)
    spec digest      32 bytes SHA-256 of the canonical spec JSON
    spec section     u32 length + UTF-8 JSON (NetworkSpec.to_dict())
    tensor count     u32
    tensors          per tensor: u16 name length, UTF-8 name,
                     u8 ndim, u32 dims..., float64 payload
    meta section     u32 length + UTF-8 JSON: per-tensor provenance tags,
                     init provenance, training history, dataset fingerprint
                     and dataset config (null unless pretrained on noise)

Tensors are written in sorted name order and JSON with sorted keys, so equal
checkpoints serialize to equal bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError, InvalidConfigError, VersionError
from ..nn.network import NetworkSpec, ParamSet
from ..tensor_core import tensor_from_bytes, tensor_to_bytes

MAGIC = b"PRLNCKPT"
FORMAT_VERSION = 1
PERLIN_PROVENANCE = "perlin-pretrain"


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: ParamSet
    init_provenance: str
    history: list[dict] = field(default_factory=list)
    fingerprint: str | None = None
    dataset_config: dict | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.params.check(self.spec)
        pretrained = self.init_provenance == PERLIN_PROVENANCE
        if pretrained != (self.fingerprint is not None):
            raise InvalidConfigError("a dataset fingerprint is required exactly for noise-pretrained checkpoints")


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    spec_json = _dumps(ckpt.spec.to_dict())
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION), ckpt.spec.digest()]
    parts.append(struct.pack("<I", len(spec_json)) + spec_json)
    names = sorted(ckpt.params.tensors)
    parts.append(struct.pack("<I", len(names)))
    for name in names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(tensor_to_bytes(ckpt.params.tensors[name]))
    meta = _dumps(
        {
            "provenance": ckpt.params.provenance,
            "init_provenance": ckpt.init_provenance,
            "history": ckpt.history,
            "fingerprint": ckpt.fingerprint,
            "dataset_config": ckpt.dataset_config,
        }
    )
    parts.append(struct.pack("<I", len(meta)) + meta)
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated checkpoint while reading {what}", self.pos)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def json(self, what: str):
        (n,) = self.unpack("<I", f"{what} length")
        start = self.pos
        try:
            return json.loads(self.take(n, what).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt {what}: {exc}", start) from None


def decode_checkpoint(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(8, "magic") != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)", 0)
    (version,) = r.unpack("<H", "format version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported checkpoint format version {version}", 8)
    digest = r.take(32, "spec digest")
    spec_at = r.pos
    try:
        spec = NetworkSpec.from_dict(r.json("spec section"))
    except (KeyError, TypeError, InvalidConfigError) as exc:
        raise FormatError(f"invalid network spec: {exc}", spec_at) from None
    if spec.digest() != digest:
        raise FormatError("spec digest does not match the spec section", 10)
    (count,) = r.unpack("<I", "tensor count")
    tensors = {}
    for _ in range(count):
        (n,) = r.unpack("<H", "tensor name length")
        name = r.take(n, "tensor name").decode("utf-8", errors="strict")
        at = r.pos
        try:
            tensors[name], r.pos = tensor_from_bytes(buf, r.pos)
        except ValueError:
            raise FormatError(f"truncated tensor {name!r}", at) from None
    meta_at = r.pos
    meta = r.json("meta section")
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes", r.pos)
    try:
        params = ParamSet(tensors, dict(meta["provenance"]))
        return Checkpoint(
            spec,
            params,
            meta["init_provenance"],
            list(meta["history"]),
            meta["fingerprint"],
            meta["dataset_config"],
            version,
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"inconsistent checkpoint contents: {exc}", meta_at) from None


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_checkpoint(ckpt))


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        return decode_checkpoint(f.read())


def params_equal(a: ParamSet, b: ParamSet) -> bool:
    return a.tensors.keys() == b.tensors.keys() and all(
        np.array_equal(a.tensors[k], b.tensors[k]) for k in a.tensors
    )
