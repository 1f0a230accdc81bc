"""Noise pretraining, weight transfer, and initialization comparisons.

The workflow is: build a labeled Perlin noise dataset, train a network from
He initialization to classify it, then hand the learned weights (minus the
classifier head) to a downstream task and fine-tune end to end.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .datasets_io.checkpoint import PERLIN_PROVENANCE, Checkpoint
from .datasets_io.csvio import emit_csv, parse_csv
from .datasets_io.idx import LabeledSet
from .datasets_io.images import write_image_grid
from .errors import InvalidConfigError, InvalidRequestError, NumericError, TransferError
from .nn import (
    Conv,
    Dense,
    InitScheme,
    NetworkSpec,
    ParamSet,
    SoftmaxCrossEntropy,
    TrainConfig,
    evaluate,
    init_params,
    minicnn,
    train,
)
from .nn.init import sample_weights
from .perlin import DatasetConfig, NoiseDataset, build_dataset, generate_sample, normalize_plane

PERLIN_SCHEME = "perlin"
BASELINE_SCHEMES = ("he", "xavier", "sparse", "normal", "zero")
CURVE_HEADER = ("scheme", "seed", "epoch", "train_loss", "val_accuracy")
RESULT_HEADER = ("scheme", "seed", "dataset", "initial_val_accuracy", "test_accuracy", "diverged")


def pretrain(
    dataset_cfg: DatasetConfig,
    spec: NetworkSpec,
    train_cfg: TrainConfig,
    seed: int = 0,
    dataset: NoiseDataset | None = None,
    on_epoch=None,
) -> Checkpoint:
    """Train ``spec`` from He initialization to classify noise categories.

    ``dataset`` may be passed to skip regeneration; it must have been built
    from ``dataset_cfg``.
    """
    dataset_cfg.validate()
    if spec.num_classes != dataset_cfg.num_classes:
        raise InvalidConfigError(
            f"network head has {spec.num_classes} classes but N*M = {dataset_cfg.num_classes} noise categories"
        )
    shape = (dataset_cfg.width, dataset_cfg.height, dataset_cfg.channels)
    if spec.input_shape != shape:
        raise InvalidConfigError(f"network input {spec.input_shape} differs from noise shape {shape}")
    if dataset is None:
        dataset = build_dataset(dataset_cfg)
    elif dataset.config != dataset_cfg:
        raise InvalidConfigError("dataset was built from a different config")
    scheme = InitScheme("he", seed)
    params = init_params(spec, scheme)
    params, history = train(spec, params, dataset.images(), dataset.labels() - 1, train_cfg, on_epoch=on_epoch)
    params.provenance = {k: f"{PERLIN_PROVENANCE}<-{v}" for k, v in params.provenance.items()}
    return Checkpoint(
        spec,
        params,
        PERLIN_PROVENANCE,
        history,
        dataset_cfg.fingerprint(),
        asdict(dataset_cfg),
    )


def with_head(spec: NetworkSpec, num_classes: int) -> NetworkSpec:
    """Same network with the final Dense layer and loss resized to ``num_classes``."""
    head = spec.head_index()
    if head != len(spec.layers) - 2:
        raise TransferError("the classifier head must be the Dense layer right before the loss")
    layers = list(spec.layers)
    layers[head] = Dense(num_classes)
    layers[-1] = SoftmaxCrossEntropy(num_classes)
    return NetworkSpec(spec.input_shape, tuple(layers))


def transfer(ckpt: Checkpoint, downstream_classes: int, head_seed: int, input_shape=None):
    """Copy every layer below the head and attach a fresh He-initialized head.

    Returns ``(spec, params)``. The head is always re-sampled, even when the
    class count is unchanged.
    """
    if input_shape is not None and tuple(input_shape) != ckpt.spec.input_shape:
        raise TransferError(
            f"downstream input {tuple(input_shape)} differs from checkpoint input {ckpt.spec.input_shape}"
        )
    if downstream_classes < 1:
        raise TransferError(f"downstream class count must be >= 1, got {downstream_classes}")
    spec = with_head(ckpt.spec, downstream_classes)
    head = spec.head_index()
    tensors, provenance = {}, {}
    for name, value in ckpt.params.tensors.items():
        if not name.startswith(f"{head}."):
            tensors[name] = value.copy()
            provenance[name] = ckpt.params.provenance[name]
    scheme = InitScheme("he", head_seed)
    fan_in = spec.shapes()[head][0]
    w = sample_weights(scheme, downstream_classes, fan_in, downstream_classes, stream=head)
    tensors[f"{head}.weight"] = np.ascontiguousarray(w.T)
    provenance[f"{head}.weight"] = scheme.tag()
    tensors[f"{head}.bias"] = np.zeros(downstream_classes)
    provenance[f"{head}.bias"] = "zero"
    params = ParamSet(tensors, provenance)
    params.check(spec)
    return spec, params


@dataclass
class ExperimentReport:
    scheme: str
    seed: int
    dataset: str
    init_method: str
    history: list[dict] = field(default_factory=list)
    initial_val_accuracy: float = 0.0
    initial_val_loss: float = 0.0
    test_accuracy: float = 0.0
    diverged: bool = False


def _run_one(scheme, seed, train_set, test_set, train_cfg, ckpt, base_spec, freeze_features):
    classes = train_set.num_classes
    cfg = replace(train_cfg, shuffle_seed=seed)
    if scheme == PERLIN_SCHEME:
        spec, params = transfer(ckpt, classes, head_seed=seed, input_shape=train_set.images.shape[1:])
        init_method = f"{PERLIN_PROVENANCE}({ckpt.fingerprint[:12]})+he-head(seed={seed})"
    else:
        spec = with_head(base_spec, classes)
        scheme_obj = InitScheme(scheme, seed, clamp_sparse=True)
        params = init_params(spec, scheme_obj)
        init_method = scheme_obj.tag()
    frozen = ()
    if freeze_features and scheme == PERLIN_SCHEME:
        head = spec.head_index()
        frozen = tuple(k for k in params.tensors if not k.startswith(f"{head}."))
    report = ExperimentReport(scheme, seed, train_set.name, init_method)
    val = (test_set.images, test_set.labels)
    report.initial_val_loss, report.initial_val_accuracy = evaluate(spec, params, *val)
    try:
        _, report.history = train(spec, params, train_set.images, train_set.labels, cfg, val=val, frozen=frozen)
    except NumericError:
        # keep the configured epoch count; a diverged run scores chance level
        report.diverged = True
        report.history = [
            {"epoch": e + 1, "lr": cfg.lr_at(e), "train_loss": float("nan"), "train_accuracy": 0.0,
             "val_loss": float("nan"), "val_accuracy": 0.0}
            for e in range(cfg.epochs)
        ]
    report.test_accuracy = report.history[-1]["val_accuracy"] if report.history else report.initial_val_accuracy
    return report


def run_comparison(
    train_set: LabeledSet,
    test_set: LabeledSet,
    schemes,
    train_cfg: TrainConfig,
    seeds,
    ckpt: Checkpoint | None = None,
    base_spec: NetworkSpec | None = None,
    freeze_features: bool = False,
    workers: int = 1,
) -> list[ExperimentReport]:
    """Fine-tune one network per (scheme, seed) and evaluate it on ``test_set``.

    The test split doubles as the per-epoch validation set. Every scheme
    trained with a given seed sees the same mini-batch order. Baselines use
    the checkpoint's architecture when one is given, else MiniCNN.
    """
    seeds = list(seeds)
    if not seeds:
        raise InvalidConfigError("at least one seed is required")
    schemes = list(schemes)
    for s in schemes:
        if s != PERLIN_SCHEME and s not in BASELINE_SCHEMES:
            raise InvalidConfigError(f"unknown scheme {s!r}")
    if PERLIN_SCHEME in schemes and ckpt is None:
        raise InvalidConfigError("the perlin scheme needs a pretrained checkpoint")
    input_shape = tuple(train_set.images.shape[1:])
    if base_spec is None:
        base_spec = ckpt.spec if ckpt is not None else minicnn(input_shape, train_set.num_classes)
    jobs = [(s, seed) for s in sorted(set(schemes)) for seed in seeds]
    args = (train_set, test_set, train_cfg, ckpt, base_spec, freeze_features)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, s, seed, *args) for s, seed in jobs]
            return [f.result() for f in futures]
    return [_run_one(s, seed, *args) for s, seed in jobs]


def default_workers() -> int:
    """Worker count from ``PERLIN_INIT_WORKERS`` (default 1)."""
    raw = os.environ.get("PERLIN_INIT_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidConfigError(f"PERLIN_INIT_WORKERS must be an integer, got {raw!r}") from None


def conv1_planes(ckpt: Checkpoint) -> list[np.ndarray]:
    """First-layer filters as normalized ``(k, k)`` planes, filter-major then input channel."""
    first = ckpt.spec.layers[0]
    if not isinstance(first, Conv):
        raise InvalidRequestError(f"first layer is {type(first).__name__}, not Conv; no conv1 filters to export")
    w = ckpt.params.tensors["0.weight"]
    return [normalize_plane(w[f, c]) for f in range(w.shape[0]) for c in range(w.shape[1])]


def export_conv1_filters(ckpt: Checkpoint, path) -> tuple[int, int]:
    return write_image_grid(conv1_planes(ckpt), path)


def category_sheet(cfg: DatasetConfig) -> list[np.ndarray]:
    """First sample of every noise category, channel 0."""
    cfg.validate()
    return [generate_sample(cfg, (y - 1) * cfg.K + 1).values[:, :, 0] for y in range(1, cfg.num_classes + 1)]


def curve_rows(reports):
    for r in reports:
        for h in r.history:
            yield (r.scheme, r.seed, h["epoch"], float(h["train_loss"]), float(h["val_accuracy"]))


def export_curves(reports) -> str:
    """Long-format curves CSV with columns ``scheme,seed,epoch,train_loss,val_accuracy``."""
    reports = list(reports)
    if not reports:
        raise InvalidRequestError("no reports to export")
    return emit_csv(CURVE_HEADER, curve_rows(reports))


def parse_curves(text: str) -> list[tuple]:
    return [
        (r["scheme"], int(r["seed"]), int(r["epoch"]), float(r["train_loss"]), float(r["val_accuracy"]))
        for r in parse_csv(text, CURVE_HEADER)
    ]


def export_results(reports) -> str:
    rows = (
        (r.scheme, r.seed, r.dataset, float(r.initial_val_accuracy), float(r.test_accuracy), int(r.diverged))
        for r in reports
    )
    return emit_csv(RESULT_HEADER, rows)
