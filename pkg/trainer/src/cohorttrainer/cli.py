"""Trainer CLI: synth, train, ablate, predict, serve."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import torch

from .ablation import VARIANTS, ablation_grid, variant_spec
from .data import generate_synthetic_city, load_fold_csv, load_fused_csv
from .model import BACKBONES
from .sidecar import _preprocess, load_checkpoint, serve_sidecar
from .train import TrainConfig, train

__all__ = ["main"]


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        label_smoothing=args.label_smoothing,
        batch_size=args.batch_size,
        seed=args.seed,
        unfreeze_last_stage_at_epoch=args.unfreeze_at,
    )


def cmd_synth(args: argparse.Namespace) -> int:
    fused, folds, images = generate_synthetic_city(
        args.output_dir, per_cohort=args.per_cohort, seed=args.seed, folds_k=args.k
    )
    print(f"wrote {fused}, {folds}, {images}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    spec = variant_spec(args.backbone, args.variant, backbone_frozen=not args.unfreeze_backbone)
    summary = train(
        spec,
        _config_from_args(args),
        fused_csv=args.dataset,
        images_dir=args.images,
        fold_file=args.folds,
        out_dir=args.output_dir,
    )
    print(
        f"{summary['backbone']} {summary['variant']}: "
        f"accuracy {100 * summary['accuracy_mean']:.2f} +/- {100 * summary['accuracy_std']:.2f}, "
        f"macro-F1 {100 * summary['macro_f1_mean']:.2f} +/- {100 * summary['macro_f1_std']:.2f}, "
        f"params {summary['params_m']:.2f} M"
    )
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    records = load_fused_csv(args.dataset, args.images)
    folds = load_fold_csv(args.folds, records)
    rows = ablation_grid(args.backbones, list(VARIANTS), records, folds, _config_from_args(args))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(rows, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {len(rows)} grid rows to {out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    records = load_fused_csv(args.dataset, args.images)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["lat", "lon", "p0", "p1", "p2", "p3", "p4"])
        with torch.no_grad():
            for record in records:
                probs = torch.softmax(model(_preprocess(str(record.image_path)))[0], dim=0)
                writer.writerow([repr(record.lat), repr(record.lon)] + [repr(float(p)) for p in probs])
    print(f"wrote {len(records)} prediction rows to {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    return serve_sidecar(load_checkpoint(args.checkpoint))


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--label-smoothing", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unfreeze-at", type=int, default=None,
                   help="epoch at which to unfreeze the last backbone stage")
    p.add_argument("--unfreeze-backbone", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohorttrainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate the synthetic smoke dataset")
    p_synth.add_argument("--output-dir", required=True)
    p_synth.add_argument("--per-cohort", type=int, default=12)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--k", type=int, default=3)

    p_train = sub.add_parser("train", help="spatial-CV training for one spec")
    p_train.add_argument("--dataset", required=True, help="fused CSV")
    p_train.add_argument("--images", required=True, help="tile image directory")
    p_train.add_argument("--folds", required=True, help="fold CSV")
    p_train.add_argument("--output-dir", required=True)
    p_train.add_argument("--backbone", choices=BACKBONES, default="ConvNeXt")
    p_train.add_argument("--variant", choices=VARIANTS, default="+FPN+CoordConv+SE")
    _add_train_options(p_train)

    p_ablate = sub.add_parser("ablate", help="backbones x variants grid")
    p_ablate.add_argument("--dataset", required=True)
    p_ablate.add_argument("--images", required=True)
    p_ablate.add_argument("--folds", required=True)
    p_ablate.add_argument("--output", required=True)
    p_ablate.add_argument("--backbones", nargs="+", choices=BACKBONES, default=list(BACKBONES))
    _add_train_options(p_ablate)

    p_predict = sub.add_parser("predict", help="emit lat,lon,p0..p4 for a dataset")
    p_predict.add_argument("--checkpoint", required=True)
    p_predict.add_argument("--dataset", required=True)
    p_predict.add_argument("--images", required=True)
    p_predict.add_argument("--output", required=True)

    p_serve = sub.add_parser("serve", help="speak the sidecar protocol on stdio")
    p_serve.add_argument("--checkpoint", required=True)

    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "ablate": cmd_ablate,
    "predict": cmd_predict,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
