"""Momentum SGD with step decay, and the mini-batch training loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidConfigError, InvalidInputError
from ..tensor_core import DTYPE, substream
from .network import NetworkSpec, ParamSet, backward, evaluate, forward


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    # epochs (0-based) at which the rate is multiplied by decay_factor;
    # None means 50% and 75% of the run
    decay_epochs: tuple[int, ...] | None = None
    decay_factor: float = 0.1
    shuffle_seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidConfigError(f"learning rate must be > 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise InvalidConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise InvalidConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise InvalidConfigError(f"epochs must be >= 0, got {self.epochs}")

    def milestones(self) -> tuple[int, ...]:
        if self.decay_epochs is not None:
            return tuple(self.decay_epochs)
        return (self.epochs // 2, (3 * self.epochs) // 4)

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for e in self.milestones() if epoch >= e)
        return self.lr * self.decay_factor**drops


def sgd_step(params: ParamSet, grads, velocity, cfg: TrainConfig, epoch: int, frozen=()):
    """In-place update: ``v = momentum * v - lr * g``; ``p = p + v``.

    Returns ``(params, velocity)``. Names in ``frozen`` are left untouched.
    """
    lr = cfg.lr_at(epoch)
    for name, p in params.tensors.items():
        if name in frozen:
            continue
        v = velocity.get(name)
        if v is None:
            v = velocity[name] = np.zeros_like(p)
        g = grads.get(name)
        v *= cfg.momentum
        if g is not None:
            v -= lr * g
        p += v
    params.version += 1
    return params, velocity


def train(
    spec: NetworkSpec,
    params: ParamSet,
    images,
    labels,
    cfg: TrainConfig,
    val: tuple | None = None,
    frozen=(),
    on_epoch: Callable[[dict], None] | None = None,
):
    """Shuffled mini-batch SGD on a copy of ``params``.

    ``labels`` are 0-based. Epoch ``e`` is shuffled with
    ``substream(cfg.shuffle_seed, e)``. Returns ``(params, history)`` where
    history holds one dict per epoch with ``epoch`` (1-based), ``lr``,
    ``train_loss`` and ``train_accuracy`` (running averages over the epoch's
    batches) and, when ``val`` is given, ``val_loss`` and ``val_accuracy``.
    """
    images = np.asarray(images, dtype=DTYPE)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if len(images) != len(labels):
        raise InvalidInputError(f"{len(images)} images but {len(labels)} labels")
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise InvalidInputError(f"labels must lie in [0, {spec.num_classes}) for this network")
    params = params.copy()
    params.check(spec)
    velocity: dict[str, np.ndarray] = {}
    history = []
    for epoch in range(cfg.epochs):
        order = substream(cfg.shuffle_seed, epoch).permutation(len(labels))
        loss_sum = 0.0
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, logits, cache = forward(spec, params, images[idx], labels[idx])
            grads = backward(spec, params, cache)
            sgd_step(params, grads, velocity, cfg, epoch, frozen)
            loss_sum += loss * len(idx)
            correct += int((logits.argmax(axis=1) == labels[idx]).sum())
        record = {
            "epoch": epoch + 1,
            "lr": cfg.lr_at(epoch),
            "train_loss": loss_sum / len(labels),
            "train_accuracy": correct / len(labels),
        }
        if val is not None:
            record["val_loss"], record["val_accuracy"] = evaluate(spec, params, *val)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return params, history
