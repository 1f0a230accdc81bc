"""Built-in downstream task: antialiased geometric shapes with jitter and pixel noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfigError
from ..tensor_core import derive_seed, substream
from .idx import LabeledSet

SHAPES = ("disk", "square", "cross", "ring", "triangle")
SPLITS = {"train": 0, "test": 1}

# outward unit normals of an equilateral triangle with circumradius 1 (inradius 0.5)
_TRI_NORMALS = np.array([[math.cos(a), math.sin(a)] for a in (-math.pi / 2, math.pi / 6, 5 * math.pi / 6)])


def _inside(kind: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Membership in the unit-size shape, in shape-local coordinates."""
    if kind == "disk":
        return x * x + y * y <= 1.0
    if kind == "ring":
        r2 = x * x + y * y
        return (r2 <= 1.0) & (r2 >= 0.36)
    if kind == "square":
        return np.maximum(np.abs(x), np.abs(y)) <= 0.8
    if kind == "cross":
        ax, ay = np.abs(x), np.abs(y)
        return ((ax <= 0.3) & (ay <= 1.0)) | ((ay <= 0.3) & (ax <= 1.0))
    if kind == "triangle":
        proj = x[..., None] * _TRI_NORMALS[:, 0] + y[..., None] * _TRI_NORMALS[:, 1]
        return np.all(proj <= 0.5, axis=-1)
    raise InvalidConfigError(f"unknown shape {kind!r}; choose from {SHAPES}")


@dataclass(frozen=True)
class ShapesTask:
    classes: tuple[str, ...] = SHAPES
    width: int = 32
    height: int = 32
    train_per_class: int = 50
    test_per_class: int = 100
    radius: float = 0.3  # fraction of min(width, height)
    shift: float = 0.1  # max center offset, fraction of the image side
    scale_range: tuple[float, float] = (0.8, 1.1)
    rotate: bool = True
    noise: float = 0.1
    supersample: int = 4
    seed: int = 0

    def validate(self) -> None:
        if not self.classes:
            raise InvalidConfigError("shapes task needs at least one class")
        for c in self.classes:
            if c not in SHAPES:
                raise InvalidConfigError(f"unknown shape {c!r}; choose from {SHAPES}")
        if len(set(self.classes)) != len(self.classes):
            raise InvalidConfigError("shape classes must be distinct")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise InvalidConfigError("samples per class must be >= 1")
        if self.scale_range[0] > self.scale_range[1] or self.scale_range[0] <= 0:
            raise InvalidConfigError(f"bad scale range {self.scale_range}")
        if self.noise < 0 or self.shift < 0:
            raise InvalidConfigError("noise and shift must be non-negative")


def _draw(rng, lo: float, hi: float) -> float:
    # degenerate ranges disable that jitter component
    return lo if hi <= lo else lo + (hi - lo) * float(rng.random())


def render_shape(task: ShapesTask, kind: str, rng) -> np.ndarray:
    """One ``(W, H)`` image of ``kind`` with jitter drawn from ``rng``."""
    w, h, ss = task.width, task.height, task.supersample
    side = min(w, h)
    cx = w / 2 + _draw(rng, -task.shift, task.shift) * w
    cy = h / 2 + _draw(rng, -task.shift, task.shift) * h
    r = task.radius * side * _draw(rng, *task.scale_range)
    theta = _draw(rng, 0.0, 2 * math.pi) if task.rotate else 0.0
    sub = (np.arange(ss) + 0.5) / ss
    xs = (np.arange(w)[:, None] + sub[None, :]).reshape(-1) - cx
    ys = (np.arange(h)[:, None] + sub[None, :]).reshape(-1) - cy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    c, s = math.cos(theta), math.sin(theta)
    lx = (c * X + s * Y) / r
    ly = (-s * X + c * Y) / r
    cover = _inside(kind, lx, ly).astype(np.float64)
    img = cover.reshape(w, ss, h, ss).mean(axis=(1, 3))
    if task.noise > 0:
        img = np.clip(img + rng.normal((w, h), scale=task.noise), 0.0, 1.0)
    return img


def make_split(task: ShapesTask, split: str) -> LabeledSet:
    task.validate()
    per_class = task.train_per_class if split == "train" else task.test_per_class
    split_seed = derive_seed(task.seed, SPLITS[split])
    images, labels = [], []
    for label, kind in enumerate(task.classes):
        for j in range(per_class):
            rng = substream(split_seed, label * per_class + j)
            images.append(render_shape(task, kind, rng))
            labels.append(label)
    return LabeledSet(
        np.stack(images)[..., None], np.array(labels, dtype=np.int64), "shapes", list(task.classes)
    )


def make_shapes_dataset(task: ShapesTask) -> tuple[LabeledSet, LabeledSet]:
    """Deterministic, class-balanced ``(train, test)`` splits."""
    return make_split(task, "train"), make_split(task, "test")
