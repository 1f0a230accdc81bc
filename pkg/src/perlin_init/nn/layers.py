"""Layer types with hand-derived forward and backward passes.

Activations are channels-last: a batch of images has shape ``(B, W, H, C)``.
Conv weights are ``(out, in, k, k)`` and dense weights are ``(in, out)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidConfigError


def _windows(x, size, stride):
    # (B, W, H, C) -> (B, Wo, Ho, C, size, size)
    return sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride]


@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    pad: int = 0

    has_params = True

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise InvalidConfigError(f"Conv expects a (W, H, C) input, got {in_shape}")
        w, h, _ = in_shape
        wo = (w + 2 * self.pad - self.kernel) // self.stride + 1
        ho = (h + 2 * self.pad - self.kernel) // self.stride + 1
        if wo < 1 or ho < 1:
            raise InvalidConfigError(f"Conv kernel {self.kernel} does not fit input {in_shape}")
        return (wo, ho, self.out_channels)

    def param_shapes(self, in_shape):
        c = in_shape[2]
        return {"weight": (self.out_channels, c, self.kernel, self.kernel), "bias": (self.out_channels,)}

    def fans(self, in_shape):
        area = self.kernel * self.kernel
        return in_shape[2] * area, self.out_channels * area

    def forward(self, x, params):
        w = params["weight"]
        p, k = self.pad, self.kernel
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        win = _windows(xp, k, self.stride)
        b, wo, ho = win.shape[:3]
        cols = win.reshape(b * wo * ho, -1)
        y = cols @ w.reshape(w.shape[0], -1).T + params["bias"]
        return y.reshape(b, wo, ho, w.shape[0]), (x.shape, xp.shape, cols)

    def backward(self, dy, cache, params):
        x_shape, xp_shape, cols = cache
        w = params["weight"]
        out, c, k, _ = w.shape
        b, wo, ho, _ = dy.shape
        s, p = self.stride, self.pad
        dy2 = dy.reshape(-1, out)
        grads = {"weight": (dy2.T @ cols).reshape(w.shape), "bias": dy2.sum(axis=0)}
        dcols = (dy2 @ w.reshape(out, -1)).reshape(b, wo, ho, c, k, k)
        dxp = np.zeros(xp_shape)
        for a in range(k):
            for e in range(k):
                dxp[:, a : a + s * wo : s, e : e + s * ho : s, :] += dcols[..., a, e]
        dx = dxp[:, p : p + x_shape[1], p : p + x_shape[2], :] if p else dxp
        return dx, grads


@dataclass(frozen=True)
class ReLU:
    has_params = False

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x, params):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, cache, params):
        return dy * cache, {}


@dataclass(frozen=True)
class MaxPool:
    """Max pooling; ties route the gradient to the first maximal position."""

    size: int = 2
    stride: int | None = None

    has_params = False

    @property
    def step(self) -> int:
        return self.stride or self.size

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise InvalidConfigError(f"MaxPool expects a (W, H, C) input, got {in_shape}")
        w, h, c = in_shape
        wo = (w - self.size) // self.step + 1
        ho = (h - self.size) // self.step + 1
        if wo < 1 or ho < 1:
            raise InvalidConfigError(f"MaxPool window {self.size} does not fit input {in_shape}")
        return (wo, ho, c)

    def forward(self, x, params):
        win = _windows(x, self.size, self.step)
        flat = win.reshape(*win.shape[:4], self.size * self.size)
        idx = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx)

    def backward(self, dy, cache, params):
        x_shape, idx = cache
        s = self.step
        _, wo, ho, _ = dy.shape
        dx = np.zeros(x_shape)
        for off in range(self.size * self.size):
            a, e = divmod(off, self.size)
            dx[:, a : a + s * wo : s, e : e + s * ho : s, :] += dy * (idx == off)
        return dx, {}


@dataclass(frozen=True)
class Flatten:
    has_params = False

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, params):
        return dy.reshape(cache), {}


@dataclass(frozen=True)
class Dense:
    out_units: int

    has_params = True

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise InvalidConfigError(f"Dense expects a flat input, got {in_shape}; add Flatten")
        return (self.out_units,)

    def param_shapes(self, in_shape):
        return {"weight": (in_shape[0], self.out_units), "bias": (self.out_units,)}

    def fans(self, in_shape):
        return in_shape[0], self.out_units

    def forward(self, x, params):
        return x @ params["weight"] + params["bias"], x

    def backward(self, dy, cache, params):
        x = cache
        grads = {"weight": x.T @ dy, "bias": dy.sum(axis=0)}
        return dy @ params["weight"].T, grads


@dataclass(frozen=True)
class SoftmaxCrossEntropy:
    num_classes: int

    has_params = False

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.num_classes,):
            raise InvalidConfigError(
                f"loss expects {self.num_classes} logits, previous layer produces {in_shape}"
            )
        return (self.num_classes,)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    loss = float(np.mean(log_norm - z[rows, labels]))
    dlogits = softmax(logits)
    dlogits[rows, labels] -= 1.0
    return loss, dlogits / len(labels)


LAYER_TYPES = {cls.__name__: cls for cls in (Conv, ReLU, MaxPool, Flatten, Dense, SoftmaxCrossEntropy)}


def layer_to_dict(layer) -> dict:
    return {"type": type(layer).__name__, **asdict(layer)}


def layer_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type")
    if kind not in LAYER_TYPES:
        raise InvalidConfigError(f"unknown layer type {kind!r}")
    return LAYER_TYPES[kind](**d)
