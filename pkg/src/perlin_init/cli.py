"""Command-line interface: generate -> pretrain -> compare -> export-filters.

Every subcommand accepts ``--config FILE`` holding ``key=value`` lines (keys
are flag names without leading dashes, ``#`` starts a comment). Values from
the file act as defaults; flags given on the command line win.

Progress lines go to stdout as space-separated ``key=value`` pairs; errors go
to stderr and name the offending flag or file. Exit status is 0 on success,
2 for invalid flags or configuration, 1 for failures while running.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .datasets_io import (
    LabeledSet,
    ShapesTask,
    load_idx,
    make_shapes_dataset,
    read_checkpoint,
    read_noise_dataset,
    write_checkpoint,
    write_csv,
    write_image_grid,
    write_noise_dataset,
)
from .datasets_io.shapes import SHAPES
from .errors import FormatError, InvalidConfigError, InvalidRequestError, PerlinInitError
from .nn import ARCHITECTURES, TrainConfig
from .perlin import DatasetConfig, build_dataset
from .pipeline import (
    BASELINE_SCHEMES,
    PERLIN_SCHEME,
    category_sheet,
    default_workers,
    export_conv1_filters,
    export_curves,
    export_results,
    pretrain,
    run_comparison,
)
from .tensor_core import substream

HISTORY_HEADER = ("epoch", "train_loss", "train_accuracy", "lr")


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


def _dataset_flags(p):
    p.add_argument("-N", type=int, default=3, help="max grid exponent along x (categories: N*M)")
    p.add_argument("-M", type=int, default=3, help="max grid exponent along y")
    p.add_argument("-K", type=int, default=100, help="samples per category")
    p.add_argument("-W", type=int, default=32, help="image width in pixels")
    p.add_argument("-H", type=int, default=32, help="image height in pixels")
    p.add_argument("-C", type=int, default=1, help="channels (grayscale plane replicated)")


def _train_flags(p, epochs):
    p.add_argument("--arch", default="minicnn", help="network preset, optionally with head size: minicnn[:CLASSES]")
    p.add_argument("--epochs", type=int, default=epochs, help=f"training epochs (default {epochs})")
    p.add_argument("--lr", type=float, default=0.01, help="initial learning rate, x0.1 at 50%% and 75%% of epochs")
    p.add_argument("--momentum", type=float, default=0.9, help="SGD momentum")
    p.add_argument("--batch", type=int, default=32, help="mini-batch size")


def _common(p, out_help):
    p.add_argument("--seed", type=int, default=0, help="global seed")
    p.add_argument("--out", required=False, help=out_help)
    p.add_argument("--config", help="key=value file of defaults; command-line flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perlin-init",
        description="Initialize image classifiers by pretraining on labeled Perlin noise.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    g = sub.add_parser("generate", help="write a labeled noise-dataset archive")
    _dataset_flags(g)
    _common(g, "archive path")
    g.add_argument("--preview", help="also write a PGM sheet with one sample per category")

    p = sub.add_parser("pretrain", help="train a network on a noise archive and save a checkpoint")
    p.add_argument("--data", help="noise-dataset archive written by 'generate'")
    _train_flags(p, epochs=30)
    _common(p, "checkpoint path (history CSV is written next to it as <stem>.history.csv)")

    c = sub.add_parser("compare", help="fine-tune per (scheme, seed) and report test accuracy")
    c.add_argument("--schemes", default="he,perlin", help=f"comma list from {', '.join(BASELINE_SCHEMES + (PERLIN_SCHEME,))}")
    c.add_argument("--seeds", default="0,1,2,3,4", help="comma list of seeds; each seeds init, head and data order")
    c.add_argument(
        "--shapes",
        nargs="?",
        const="default",
        help="use the built-in shapes task; optional overrides like classes=disk+ring,train=50,test=100,noise=0.1",
    )
    c.add_argument("--idx-images", help="IDX image file(s): TRAIN[,TEST]; a single file is split 80/20 by --seed")
    c.add_argument("--idx-labels", help="IDX label file(s) matching --idx-images")
    c.add_argument("--perlin-ckpt", help="noise-pretrained checkpoint (required for the perlin scheme)")
    c.add_argument("-W", type=int, default=32, help="shapes image width when no checkpoint fixes it")
    c.add_argument("-H", type=int, default=32, help="shapes image height when no checkpoint fixes it")
    _train_flags(c, epochs=20)
    _common(c, "results CSV path (curves go to <stem>.curves.csv)")

    e = sub.add_parser("export-filters", help="write the first conv layer's filters as a PGM grid")
    e.add_argument("--ckpt", help="checkpoint to read")
    _common(e, "image path (.pgm)")

    lines = ["flags by command:"]
    for name, sp in sub.choices.items():
        flags = [s for a in sp._actions for s in a.option_strings if s not in ("-h", "--help")]
        lines.append(f"  {name}: {' '.join(flags)}")
    lines.append("environment: PERLIN_INIT_WORKERS sets parallel workers for 'compare' (default 1)")
    parser.epilog = "\n".join(lines)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError("--config", f"cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("--config", f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        raise SystemExit(2)
    if args.config:
        sp = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sp._actions if a.option_strings}
        defaults = {}
        for key, raw in read_config_file(args.config).items():
            if key not in actions or key in ("config", "help"):
                raise UsageError("--config", f"unknown key {key!r} for '{args.command}'")
            action = actions[key]
            try:
                defaults[key] = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError("--config", f"bad value {raw!r} for {key}") from None
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _require(args, dest, flag):
    if getattr(args, dest) in (None, ""):
        raise UsageError(flag, "is required")
    return getattr(args, dest)


def _progress(**fields):
    print(" ".join(f"{k}={v}" for k, v in fields.items()), flush=True)


def _train_config(args) -> TrainConfig:
    for flag, value, ok in (
        ("--epochs", args.epochs, args.epochs >= 1),
        ("--lr", args.lr, args.lr > 0),
        ("--momentum", args.momentum, 0 <= args.momentum < 1),
        ("--batch", args.batch, args.batch >= 1),
        ("--seed", args.seed, 0 <= args.seed < 2**64),
    ):
        if not ok:
            raise UsageError(flag, f"invalid value {value}")
    return TrainConfig(lr=args.lr, momentum=args.momentum, batch_size=args.batch, epochs=args.epochs, shuffle_seed=args.seed)


def _arch(args, input_shape, num_classes):
    name, _, classes = args.arch.partition(":")
    if name not in ARCHITECTURES:
        raise UsageError("--arch", f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}")
    if classes:
        try:
            declared = int(classes)
        except ValueError:
            raise UsageError("--arch", f"bad head size {classes!r}") from None
        if declared != num_classes:
            raise UsageError("--arch", f"head has {declared} classes but the data has {num_classes} categories")
    try:
        return ARCHITECTURES[name](input_shape, num_classes)
    except InvalidConfigError as exc:
        raise UsageError("--arch", str(exc)) from None


def cmd_generate(args) -> int:
    out = _require(args, "out", "--out")
    cfg = DatasetConfig(args.N, args.M, args.K, args.W, args.H, args.C, args.seed)
    try:
        cfg.validate()
    except InvalidConfigError as exc:
        msg = str(exc)
        flag = "-N/-W" if "2^N" in msg else "-M/-H" if "2^M" in msg else "--seed" if "seed" in msg else "-N/-M/-K/-W/-H/-C"
        raise UsageError(flag, msg) from None
    ds = build_dataset(cfg)
    write_noise_dataset(ds, out)
    _progress(event="generated", samples=len(ds), categories=cfg.num_classes, out=out)
    if args.preview:
        write_image_grid(category_sheet(cfg), args.preview)
        _progress(event="preview", out=args.preview)
    return 0


def cmd_pretrain(args) -> int:
    data = _require(args, "data", "--data")
    out = _require(args, "out", "--out")
    train_cfg = _train_config(args)
    if not Path(data).is_file():
        raise UsageError("--data", f"no such file: {data}")
    ds = read_noise_dataset(data)
    cfg = ds.config
    spec = _arch(args, (cfg.width, cfg.height, cfg.channels), cfg.num_classes)
    ckpt = pretrain(
        cfg,
        spec,
        train_cfg,
        seed=args.seed,
        dataset=ds,
        on_epoch=lambda r: _progress(
            epoch=r["epoch"], train_loss=f"{r['train_loss']:.6f}", train_accuracy=f"{r['train_accuracy']:.4f}"
        ),
    )
    write_checkpoint(ckpt, out)
    history_path = Path(out).with_suffix(".history.csv")
    write_csv(history_path, HISTORY_HEADER, [tuple(h[k] for k in HISTORY_HEADER) for h in ckpt.history])
    _progress(event="checkpoint", out=out, history=history_path)
    return 0


def parse_shapes(text: str, width: int, height: int, seed: int) -> ShapesTask:
    task = ShapesTask(width=width, height=height, seed=seed)
    if text in (None, "", "default"):
        return task
    fields = {"train": "train_per_class", "test": "test_per_class", "noise": "noise", "shift": "shift", "seed": "seed"}
    updates = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        try:
            if key == "classes":
                updates["classes"] = tuple(value.split("+"))
                for c in updates["classes"]:
                    if c not in SHAPES:
                        raise ValueError(c)
            elif key == "rotate":
                updates["rotate"] = value.lower() in ("1", "true", "yes")
            elif key in fields and sep:
                kind = float if key in ("noise", "shift") else int
                updates[fields[key]] = kind(value)
            else:
                raise UsageError("--shapes", f"unknown setting {item!r}")
        except ValueError:
            raise UsageError("--shapes", f"bad value in {item!r}") from None
    return replace(task, **updates)


def _load_idx_sets(args) -> tuple[LabeledSet, LabeledSet]:
    images = args.idx_images.split(",")
    labels = (args.idx_labels or "").split(",")
    if len(images) != len(labels) or not args.idx_labels:
        raise UsageError("--idx-labels", "must list one label file per --idx-images file")
    for flag, paths in (("--idx-images", images), ("--idx-labels", labels)):
        for path in paths:
            if not Path(path).is_file():
                raise UsageError(flag, f"no such file: {path}")
    sets = [load_idx(i, l) for i, l in zip(images, labels)]
    if len(sets) == 2:
        return sets[0], sets[1]
    if len(sets) != 1:
        raise UsageError("--idx-images", "give TRAIN or TRAIN,TEST")
    full = sets[0]
    order = substream(args.seed, 0).permutation(len(full))
    cut = (4 * len(full)) // 5
    tr, te = np.sort(order[:cut]), np.sort(order[cut:])
    return (
        LabeledSet(full.images[tr], full.labels[tr], full.name),
        LabeledSet(full.images[te], full.labels[te], full.name),
    )


def cmd_compare(args) -> int:
    out = _require(args, "out", "--out")
    train_cfg = _train_config(args)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s != PERLIN_SCHEME and s not in BASELINE_SCHEMES:
            raise UsageError("--schemes", f"unknown scheme {s!r}")
    if not schemes:
        raise UsageError("--schemes", "no schemes given")
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise UsageError("--seeds", f"not a comma list of integers: {args.seeds!r}") from None
    if not seeds:
        raise UsageError("--seeds", "no seeds given")
    if (args.shapes is None) == (args.idx_images is None):
        raise UsageError("--shapes", "choose exactly one downstream source: --shapes or --idx-images")
    ckpt = None
    if PERLIN_SCHEME in schemes:
        path = args.perlin_ckpt
        if not path:
            raise UsageError("--perlin-ckpt", "the perlin scheme needs a noise-pretrained checkpoint")
        if not Path(path).is_file():
            raise UsageError("--perlin-ckpt", f"no such file: {path}")
    if args.perlin_ckpt:
        ckpt = read_checkpoint(args.perlin_ckpt)
    workers = default_workers()
    if args.shapes is not None:
        w, h = (ckpt.spec.input_shape[:2] if ckpt else (args.W, args.H))
        train_set, test_set = make_shapes_dataset(parse_shapes(args.shapes, w, h, args.seed))
    else:
        train_set, test_set = _load_idx_sets(args)
    num_classes = max(train_set.num_classes, int(test_set.labels.max()) + 1)
    base_spec = None
    if ckpt is None:
        base_spec = _arch(args, train_set.images.shape[1:], num_classes)
    reports = run_comparison(train_set, test_set, schemes, train_cfg, seeds, ckpt, base_spec, workers=workers)
    for r in reports:
        for hrow in r.history:
            _progress(
                scheme=r.scheme, seed=r.seed, epoch=hrow["epoch"],
                train_loss=f"{hrow['train_loss']:.6f}", val_accuracy=f"{hrow['val_accuracy']:.4f}",
            )
        _progress(scheme=r.scheme, seed=r.seed, initial_val_accuracy=f"{r.initial_val_accuracy:.4f}",
                  test_accuracy=f"{r.test_accuracy:.4f}", diverged=int(r.diverged))
    Path(out).write_text(export_results(reports), encoding="utf-8", newline="")
    curves = Path(out).with_suffix(".curves.csv")
    curves.write_text(export_curves(reports), encoding="utf-8", newline="")
    _progress(event="results", out=out, curves=curves)
    return 0


def cmd_export_filters(args) -> int:
    src = _require(args, "ckpt", "--ckpt")
    out = _require(args, "out", "--out")
    if not Path(src).is_file():
        raise UsageError("--ckpt", f"no such file: {src}")
    ckpt = read_checkpoint(src)
    try:
        w, h = export_conv1_filters(ckpt, out)
    except InvalidRequestError as exc:
        raise UsageError("--ckpt", str(exc)) from None
    _progress(event="filters", out=out, width=w, height=h)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "pretrain": cmd_pretrain,
    "compare": cmd_compare,
    "export-filters": cmd_export_filters,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"perlin-init: error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"perlin-init: error: malformed file: {exc}", file=sys.stderr)
        return 1
    except PerlinInitError as exc:
        print(f"perlin-init: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"perlin-init: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
