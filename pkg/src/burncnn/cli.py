"""Command-line surface: split | augment | train | eval | predict | inspect.

Every command is reproducible (identical inputs and seed give
byte-identical outputs) and writes only under its output directory.
Exit codes: 0 success, 2 input/validation error, 3 training divergence,
4 I/O failure.
"""
from __future__ import annotations

import os

# Thread cap must land in the environment before numpy's BLAS loads.
_threads = os.environ.get("BURNCNN_THREADS", "").strip()
if _threads and _threads != "0":
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .data import (SplitAssignment, augment_split, load_manifest,
                   read_table_csv, split_binary, split_three_class,
                   table_label_counts, write_table_csv)
from .data import enumerate_variants
from .errors import BurnCnnError, ContractViolation, DivergenceError
from .images import prepare_image
from .loader import PreparedDataset, eval_pairs, indexed_pairs
from .metrics import class_order_for, evaluate, write_roc_csv
from .network import build_alexnet, build_reduced_alexnet, forward, transfer_surgery
from .trainer import TrainingConfig, train, write_history_csv

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

MODES = ("binary", "three-class")
PRESETS = {
    "binary": {"mode": "binary", "learning_rate": 1e-4, "epochs": 10,
               "batch_size": 64},
    "three-class": {"mode": "three-class", "learning_rate": 1e-6, "epochs": 5,
                    "batch_size": 10},
}


@dataclass
class RunConfig:
    manifest: str
    mode: str
    out_dir: str
    learning_rate: float = 1e-4
    epochs: int = 10
    batch_size: int = 64
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    freeze_policy: str = "none"
    shuffle: bool = True
    pretrained: str = ""
    split: str = ""
    arch: str = "canonical"      # canonical | reduced (reduced: desk-scale runs)

    def training(self) -> TrainingConfig:
        return TrainingConfig(
            learning_rate=self.learning_rate, epochs=self.epochs,
            batch_size=self.batch_size, momentum=self.momentum,
            weight_decay=self.weight_decay, seed=self.seed,
            freeze_policy=self.freeze_policy, shuffle=self.shuffle)


_CONFIG_PARSERS = {
    "manifest": str, "mode": str, "out_dir": str, "pretrained": str,
    "split": str, "arch": str, "freeze_policy": str,
    "learning_rate": float, "momentum": float, "weight_decay": float,
    "epochs": int, "batch_size": int, "seed": int,
    "shuffle": lambda v: v.lower() in ("1", "true", "yes"),
}


def parse_config_file(path) -> dict:
    """Flat `key = value` file; unknown keys are errors (typo guard)."""
    values: dict = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractViolation(
                    f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_PARSERS:
                raise ContractViolation(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ContractViolation(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = _CONFIG_PARSERS[key](value.strip())
            except ValueError as exc:
                raise ContractViolation(
                    f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def load_run_config(path, preset: str | None, overrides: dict) -> RunConfig:
    values = parse_config_file(path)
    if preset:
        if preset not in PRESETS:
            raise ContractViolation(f"unknown preset {preset!r}")
        for k, v in PRESETS[preset].items():
            values.setdefault(k, v)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for required in ("manifest", "mode", "out_dir"):
        if required not in values:
            raise ContractViolation(f"config is missing required key {required!r}")
    cfg = RunConfig(**values)
    if cfg.mode not in MODES:
        raise ContractViolation(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.arch not in ("canonical", "reduced"):
        raise ContractViolation(f"arch must be canonical or reduced, got {cfg.arch!r}")
    if not Path(cfg.manifest).is_file():
        raise ContractViolation(f"manifest not found: {cfg.manifest}")
    if cfg.pretrained and not Path(cfg.pretrained).is_file():
        raise ContractViolation(f"pretrained checkpoint not found: {cfg.pretrained}")
    if cfg.split and not Path(cfg.split).is_file():
        raise ContractViolation(f"split file not found: {cfg.split}")
    return cfg


def _ensure_out(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _split_for(manifest, mode: str, seed: int) -> SplitAssignment:
    if mode == "binary":
        return split_binary(manifest, seed)
    return split_three_class(manifest, seed)


def _read_split(path) -> SplitAssignment:
    with open(path, encoding="utf-8") as f:
        return SplitAssignment.from_json(f.read())


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    assignment = _split_for(manifest, args.mode, args.seed)
    out = _ensure_out(args.out)
    target = out / f"split_{args.mode}.json"
    target.write_text(assignment.to_json(), encoding="utf-8")
    counts = assignment.split_counts()
    print(f"wrote {target} train={counts['train']} "
          f"validation={counts['validation']} test={counts['test']}")
    return EXIT_OK


def cmd_augment(args) -> int:
    manifest = load_manifest(args.manifest)
    assignment = _read_split(args.split) if args.split \
        else _split_for(manifest, args.mode, args.seed)
    rows = augment_split(manifest, assignment)
    out = _ensure_out(args.out)
    target = out / "augmented.csv"
    write_table_csv(rows, target)
    counts = table_label_counts(rows)
    summary = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"wrote {target} rows={len(rows)} {summary}")
    return EXIT_OK


def _build_model(cfg: RunConfig, from_scratch: bool):
    n_classes = len(class_order_for(cfg.mode))
    if from_scratch:
        builder = build_reduced_alexnet if cfg.arch == "reduced" else build_alexnet
        spec, params = builder(n_classes, seed=cfg.seed)
        return spec, params
    pretrained = ckpt.load_checkpoint(cfg.pretrained)
    return transfer_surgery(pretrained, n_classes,
                            freeze_policy=cfg.freeze_policy, seed=cfg.seed)


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, args.preset,
                          {"seed": args.seed, "out_dir": args.out})
    if not args.from_scratch and not cfg.pretrained:
        raise ContractViolation(
            "config has no pretrained checkpoint; pass --from-scratch to "
            "train from random initialization")
    if not args.from_scratch and cfg.arch == "reduced":
        raise ContractViolation("pretrained fine-tuning requires arch = canonical")

    manifest = load_manifest(cfg.manifest)
    assignment = _read_split(cfg.split) if cfg.split \
        else _split_for(manifest, cfg.mode, cfg.seed)
    if assignment.mode != cfg.mode:
        raise ContractViolation(
            f"split file mode {assignment.mode!r} != config mode {cfg.mode!r}")
    rows = augment_split(manifest, assignment)
    train_data = PreparedDataset(manifest, rows, cfg.mode)
    val_indexed = indexed_pairs(manifest, assignment, "validation")

    spec, params = _build_model(cfg, args.from_scratch)
    out = _ensure_out(cfg.out_dir)
    log_path = out / "train.log"
    log_path.write_text("", encoding="utf-8")

    def log(line: str) -> None:
        print(line)
        with open(log_path, "a", encoding="utf-8") as f:
            f.write(line + "\n")

    def on_epoch(rec) -> None:
        log(f"epoch={rec.epoch} train_loss={rec.train_loss:.6f} "
            f"val_acc={rec.val_acc:.6f}")

    result = train(spec, params, train_data, val_indexed, cfg.training(),
                   on_epoch=on_epoch)
    ckpt.save_checkpoint(result.best, out / "best.bwck")
    ckpt.save_checkpoint(result.final, out / "final.bwck")
    write_history_csv(result.history, out / "history.csv")
    (out / f"split_{cfg.mode}.json").write_text(assignment.to_json(),
                                                encoding="utf-8")
    log(f"wrote {out / 'best.bwck'} (epoch {result.best.meta.epochs_completed}) "
        f"and {out / 'final.bwck'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    chk = ckpt.load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    assignment = _read_split(args.split)
    pairs = eval_pairs(manifest, assignment, args.on)
    report = evaluate(chk, pairs, assignment.mode)
    out = _ensure_out(args.out)
    report_path = Path(args.report) if args.report else out / "report.json"
    report_path.write_text(report.to_json(), encoding="utf-8")
    print(f"mode={report.mode} samples={report.cm.total()} "
          f"accuracy={report.accuracy:.4f}")
    print("confusion rows (true class -> predicted counts):")
    for name, row in zip(report.class_order, report.cm.counts):
        cells = " ".join(f"{int(v):4d}" for v in row)
        print(f"  {name:>20s} | {cells}")
    for name, m in report.per_class.items():
        print(f"  {name}: precision={m.precision:.4f} recall={m.recall:.4f} "
              f"f1={m.f1:.4f} support={m.support}")
    if report.mode == "binary":
        print(f"  positive={report.positive_class} auc={report.auc:.4f}")
        write_roc_csv(report.roc, out / "roc.csv")
        print(f"wrote {out / 'roc.csv'}")
    print(f"wrote {report_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    chk = ckpt.load_checkpoint(args.checkpoint)
    order = tuple(class_order_for("binary") if chk.spec.num_classes == 2
                  else class_order_for("three-class")
                  if chk.spec.num_classes == 3
                  else tuple(f"class_{i}" for i in range(chk.spec.num_classes)))
    identity = enumerate_variants()[0]
    for image in args.images:
        prepared = prepare_image(image, identity)
        batch = prepared.tensor.reshape((1,) + prepared.tensor.shape)
        logits, _ = forward(chk.spec, chk.params, batch, mode="infer")
        row = logits.data[0].astype(np.float64)
        shifted = row - row.max()
        probs = np.exp(shifted) / np.exp(shifted).sum()
        label = order[int(probs.argmax())]
        print(f"label={label} p=" + ",".join(repr(float(p)) for p in probs))
        if args.raw:
            print("logits=" + ",".join(repr(float(v)) for v in row))
    return EXIT_OK


def cmd_inspect(args) -> int:
    chk = ckpt.load_checkpoint(args.checkpoint)
    print(f"format_version={chk.version}")
    print(f"input_size={'x'.join(map(str, chk.spec.input_size))} "
          f"num_classes={chk.spec.num_classes}")
    print(f"parameters={chk.params.count()}")
    print(f"epochs_completed={chk.meta.epochs_completed} seed={chk.meta.seed} "
          f"config_digest={chk.meta.config_digest or '-'}")
    for layer in chk.spec.layers:
        desc = layer.kind
        if layer.kind == "conv":
            p = layer.conv
            desc += (f" {layer.name} {p.output_channels}x{p.kernel_height}x"
                     f"{p.kernel_width} stride={p.stride} pad={p.padding} "
                     f"groups={p.groups} trainable={layer.trainable}")
        elif layer.kind == "linear":
            desc += (f" {layer.name} {layer.in_features}->{layer.out_features} "
                     f"trainable={layer.trainable}")
        elif layer.kind == "maxpool":
            desc += f" window={layer.window} stride={layer.stride}"
        elif layer.kind == "dropout":
            desc += f" rate={layer.rate}"
        print(f"  {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burncnn",
        description="Burn wound image classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="write a deterministic split JSON")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="write the augmented training table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="", help="existing split JSON")
    p.add_argument("--mode", choices=MODES, default="three-class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="fine-tune per a run config file")
    p.add_argument("--config", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--from-scratch", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="override config out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--on", choices=("validation", "test"), default="test")
    p.add_argument("--report", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--raw", action="store_true",
                   help="also print raw logits per image")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect", help="describe a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except BurnCnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
