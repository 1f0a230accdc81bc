"""Network topology, parameter sets, and the batched forward/backward passes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, InvalidConfigError, NumericError
from ..tensor_core import DTYPE, ShapeError
from .layers import (
    Conv,
    Dense,
    Flatten,
    MaxPool,
    ReLU,
    SoftmaxCrossEntropy,
    cross_entropy,
    layer_from_dict,
    layer_to_dict,
)


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape ``(W, H, C)`` plus an ordered layer list ending in the loss."""

    input_shape: tuple[int, ...]
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers or not isinstance(self.layers[-1], SoftmaxCrossEntropy):
            raise InvalidConfigError("the last layer must be SoftmaxCrossEntropy")
        if sum(isinstance(l, SoftmaxCrossEntropy) for l in self.layers) != 1:
            raise InvalidConfigError("exactly one loss layer is allowed")
        self.shapes()  # raises on a broken chain

    def shapes(self) -> list[tuple[int, ...]]:
        """Activation shape entering each layer, plus the final output shape."""
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            try:
                shapes.append(layer.out_shape(shapes[-1]))
            except InvalidConfigError as exc:
                raise InvalidConfigError(f"layer {i} ({type(layer).__name__}): {exc}") from None
        return shapes

    @property
    def num_classes(self) -> int:
        return self.layers[-1].num_classes

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        out = {}
        for i, (layer, shape) in enumerate(zip(self.layers, self.shapes())):
            if layer.has_params:
                for name, s in layer.param_shapes(shape).items():
                    out[f"{i}.{name}"] = s
        return out

    def head_index(self) -> int:
        """Index of the last Dense layer (the classifier head)."""
        for i in range(len(self.layers) - 1, -1, -1):
            if isinstance(self.layers[i], Dense):
                return i
        raise InvalidConfigError("network has no Dense head")

    def to_dict(self) -> dict:
        return {"input_shape": list(self.input_shape), "layers": [layer_to_dict(l) for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(d["input_shape"]), tuple(layer_from_dict(l) for l in d["layers"]))

    def digest(self) -> bytes:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).digest()


def minicnn(input_shape=(32, 32, 1), num_classes: int = 9) -> NetworkSpec:
    """Two conv/ReLU/pool stages followed by a dense classifier."""
    return NetworkSpec(
        input_shape,
        (
            Conv(16, 3, 1, 1),
            ReLU(),
            MaxPool(2),
            Conv(32, 3, 1, 1),
            ReLU(),
            MaxPool(2),
            Flatten(),
            Dense(num_classes),
            SoftmaxCrossEntropy(num_classes),
        ),
    )


def mlp(input_shape, hidden: int, num_classes: int) -> NetworkSpec:
    return NetworkSpec(
        input_shape,
        (Flatten(), Dense(hidden), ReLU(), Dense(num_classes), SoftmaxCrossEntropy(num_classes)),
    )


ARCHITECTURES = {"minicnn": minicnn}


@dataclass
class ParamSet:
    """Named parameter tensors (``"<layer>.weight"``, ``"<layer>.bias"``) with provenance tags.

    ``version`` is bumped on every in-place update so that stale forward
    caches can be detected.
    """

    tensors: dict[str, np.ndarray]
    provenance: dict[str, str]
    version: int = 0

    def __post_init__(self):
        missing = set(self.tensors) - set(self.provenance)
        if missing:
            raise InvalidConfigError(f"provenance missing for {sorted(missing)}")

    def layer(self, index: int) -> dict[str, np.ndarray]:
        prefix = f"{index}."
        return {k[len(prefix):]: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def copy(self) -> "ParamSet":
        return ParamSet({k: v.copy() for k, v in self.tensors.items()}, dict(self.provenance))

    def check(self, spec: NetworkSpec) -> None:
        expected = spec.param_shapes()
        got = {k: v.shape for k, v in self.tensors.items()}
        if expected != got:
            raise ShapeError(f"parameters do not match the network: expected {expected}, got {got}")

    def num_params(self) -> int:
        return sum(v.size for v in self.tensors.values())


@dataclass
class ForwardCache:
    spec: NetworkSpec
    params: ParamSet
    version: int
    layer_caches: list = field(default_factory=list)
    dlogits: np.ndarray | None = None


def _run_layers(spec, params, x, keep_cache):
    caches = []
    for i, layer in enumerate(spec.layers[:-1]):
        x, cache = layer.forward(x, params.layer(i))
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite activation after layer {i} ({type(layer).__name__})", i)
        if keep_cache:
            caches.append(cache)
    return x, caches


def _check_batch(spec, batch):
    batch = np.asarray(batch, dtype=DTYPE)
    if batch.ndim != len(spec.input_shape) + 1 or batch.shape[1:] != spec.input_shape:
        raise ShapeError(f"batch shape {batch.shape} does not match input {spec.input_shape}")
    return batch


def forward(spec: NetworkSpec, params: ParamSet, batch, labels):
    """Mean cross-entropy over ``batch``; labels are 0-based class indices.

    Returns ``(loss, logits, cache)``.
    """
    batch = _check_batch(spec, batch)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (batch.shape[0],):
        raise ShapeError(f"expected {batch.shape[0]} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= spec.num_classes):
        raise ShapeError(f"labels must lie in [0, {spec.num_classes})")
    logits, caches = _run_layers(spec, params, batch, keep_cache=True)
    loss, dlogits = cross_entropy(logits, labels)
    cache = ForwardCache(spec, params, params.version, caches, dlogits)
    return loss, logits, cache


def predict(spec: NetworkSpec, params: ParamSet, batch) -> np.ndarray:
    logits, _ = _run_layers(spec, params, _check_batch(spec, batch), keep_cache=False)
    return logits


def backward(spec: NetworkSpec, params: ParamSet, cache: ForwardCache) -> dict[str, np.ndarray]:
    """Gradients of the mean batch loss, keyed like ``params.tensors``."""
    if cache.spec is not spec or cache.params is not params or cache.version != params.version:
        raise ContractError("forward cache does not belong to this network/parameter state")
    grads = {}
    dy = cache.dlogits
    for i in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[i]
        dy, g = layer.backward(dy, cache.layer_caches[i], params.layer(i))
        for name, value in g.items():
            grads[f"{i}.{name}"] = value
    return grads


def evaluate(spec: NetworkSpec, params: ParamSet, images, labels, batch_size: int = 256):
    """Mean loss and accuracy over a labeled set (order-independent)."""
    images = np.asarray(images, dtype=DTYPE)
    labels = np.asarray(labels, dtype=np.int64)
    total_loss = 0.0
    correct = 0
    for start in range(0, len(labels), batch_size):
        xb = images[start : start + batch_size]
        yb = labels[start : start + batch_size]
        loss, logits, _ = forward(spec, params, xb, yb)
        total_loss += loss * len(yb)
        correct += int((logits.argmax(axis=1) == yb).sum())
    return total_loss / len(labels), correct / len(labels)
