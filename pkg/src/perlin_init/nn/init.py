"""Weight initialization schemes.

Every weight tensor is drawn from its own substream ``(seed, layer_index)``.
Biases are always zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from ..tensor_core import DTYPE, substream, uniform_array
from .layers import Dense
from .network import NetworkSpec, ParamSet

VARIANTS = ("he", "xavier", "sparse", "normal", "zero")
DEFAULT_SPARSE_K = 15


@dataclass(frozen=True)
class InitScheme:
    variant: str = "he"
    seed: int = 0
    sparse_k: int = DEFAULT_SPARSE_K
    # cap k at fan_in instead of failing (layers with fewer than k inputs)
    clamp_sparse: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown init scheme {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "sparse" and self.sparse_k < 1:
            raise InvalidParameterError(f"sparse k must be >= 1, got {self.sparse_k}")

    def tag(self, fan_in: int | None = None) -> str:
        if self.variant == "sparse":
            k = self.sparse_k if fan_in is None else self._sparse_k(fan_in)
            return f"sparse(k={k},seed={self.seed})"
        return f"{self.variant}(seed={self.seed})"

    def _sparse_k(self, fan_in: int) -> int:
        if self.sparse_k > fan_in:
            if not self.clamp_sparse:
                raise InvalidParameterError(f"sparse k={self.sparse_k} exceeds fan_in={fan_in}")
            return fan_in
        return self.sparse_k


def sample_weights(scheme: InitScheme, units: int, fan_in: int, fan_out: int, stream: int) -> np.ndarray:
    """A ``(units, fan_in)`` weight matrix: one row per output unit."""
    rng = substream(scheme.seed, stream)
    shape = (units, fan_in)
    if scheme.variant == "he":
        return rng.normal(shape, scale=math.sqrt(2.0 / fan_in))
    if scheme.variant == "xavier":
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return uniform_array(rng, -bound, bound, shape)
    if scheme.variant == "normal":
        return rng.normal(shape)
    if scheme.variant == "zero":
        return np.zeros(shape, dtype=DTYPE)
    k = scheme._sparse_k(fan_in)
    rows = np.zeros((units, fan_in), dtype=DTYPE)
    for u in range(units):
        idx = rng.choice_without_replacement(fan_in, k)
        rows[u, idx] = rng.normal(k)
    return rows


def init_params(spec: NetworkSpec, scheme: InitScheme) -> ParamSet:
    tensors = {}
    provenance = {}
    shapes = spec.shapes()
    for i, layer in enumerate(spec.layers):
        if not layer.has_params:
            continue
        in_shape = shapes[i]
        pshapes = layer.param_shapes(in_shape)
        fan_in, fan_out = layer.fans(in_shape)
        wshape = pshapes["weight"]
        units = int(np.prod(wshape)) // fan_in
        w = sample_weights(scheme, units, fan_in, fan_out, stream=i)
        if isinstance(layer, Dense):
            w = w.T  # stored as (in, out)
        tensors[f"{i}.weight"] = np.ascontiguousarray(w, dtype=DTYPE).reshape(wshape)
        provenance[f"{i}.weight"] = scheme.tag(fan_in)
        tensors[f"{i}.bias"] = np.zeros(pshapes["bias"], dtype=DTYPE)
        provenance[f"{i}.bias"] = "zero"
    return ParamSet(tensors, provenance)
