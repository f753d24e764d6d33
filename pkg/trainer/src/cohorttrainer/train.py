"""Training loop and spatial cross-validation harness."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from sklearn.metrics import accuracy_score, f1_score
from torch import nn
from torch.optim.lr_scheduler import CosineAnnealingLR
from torch.utils.data import DataLoader, Subset, WeightedRandomSampler

from .data import TileDataset, TileRecord, load_fold_csv, load_fused_csv
from .model import ModelSpec, build_model, count_parameters

__all__ = ["TrainConfig", "TrainResult", "FoldMetrics", "run_training", "cross_validate", "train"]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-4
    weight_decay: float = 1e-4
    epochs: int = 30
    label_smoothing: float = 0.05
    lr_floor: float = 0.0
    batch_size: int = 16
    seed: int = 0
    class_weighted_sampling: bool = True
    unfreeze_last_stage_at_epoch: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if min(self.lr, self.weight_decay, self.batch_size) <= 0:
            raise ValueError("lr, weight_decay, and batch_size must be positive")
        if self.label_smoothing < 0:
            raise ValueError("label_smoothing must be non-negative")


@dataclass
class TrainResult:
    epoch_losses: list[float]
    lr_history: list[float]
    final_lr: float
    model: nn.Module


@dataclass
class FoldMetrics:
    fold: int
    accuracy: float
    macro_f1: float


def _make_loader(dataset: TileDataset, indices: np.ndarray, config: TrainConfig) -> DataLoader:
    subset = Subset(dataset, indices.tolist())
    generator = torch.Generator().manual_seed(config.seed)
    if config.class_weighted_sampling:
        labels = dataset.labels()[indices]
        counts = np.bincount(labels, minlength=5).astype(np.float64)
        weights = np.where(counts[labels] > 0, 1.0 / np.maximum(counts[labels], 1), 0.0)
        sampler = WeightedRandomSampler(
            weights=torch.as_tensor(weights, dtype=torch.double),
            num_samples=len(indices),
            replacement=True,
            generator=generator,
        )
        return DataLoader(subset, batch_size=config.batch_size, sampler=sampler)
    return DataLoader(subset, batch_size=config.batch_size, shuffle=True, generator=generator)


def _unfreeze_last_stage(model: nn.Module) -> None:
    children = list(model.backbone.children())
    if children:
        for parameter in children[-1].parameters():
            parameter.requires_grad_(True)


def run_training(
    spec: ModelSpec,
    config: TrainConfig,
    dataset: TileDataset,
    train_indices: np.ndarray,
) -> TrainResult:
    """Train one model on one index subset; deterministic per config.seed."""
    torch.manual_seed(config.seed)
    model = build_model(spec)
    loss_fn = nn.CrossEntropyLoss(label_smoothing=config.label_smoothing)
    optimizer = torch.optim.AdamW(
        model.trainable_parameters(), lr=config.lr, weight_decay=config.weight_decay
    )
    scheduler = CosineAnnealingLR(optimizer, T_max=config.epochs, eta_min=config.lr_floor)
    loader = _make_loader(dataset, train_indices, config)

    epoch_losses: list[float] = []
    lr_history: list[float] = []
    for epoch in range(config.epochs):
        if (
            config.unfreeze_last_stage_at_epoch is not None
            and epoch == config.unfreeze_last_stage_at_epoch
        ):
            _unfreeze_last_stage(model)
            optimizer.add_param_group(
                {"params": [p for p in model.backbone.parameters() if p.requires_grad]}
            )
        lr_history.append(optimizer.param_groups[0]["lr"])
        model.train()
        total = 0.0
        seen = 0
        for batch, labels in loader:
            optimizer.zero_grad()
            loss = loss_fn(model(batch), labels)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(labels)
            seen += len(labels)
        epoch_losses.append(total / max(seen, 1))
        scheduler.step()

    return TrainResult(
        epoch_losses=epoch_losses,
        lr_history=lr_history,
        final_lr=optimizer.param_groups[0]["lr"],
        model=model,
    )


@torch.no_grad()
def evaluate(model: nn.Module, dataset: TileDataset, indices: np.ndarray, batch_size: int = 32):
    model.eval()
    loader = DataLoader(Subset(dataset, indices.tolist()), batch_size=batch_size)
    predictions = []
    truths = []
    for batch, labels in loader:
        predictions.extend(model(batch).argmax(dim=1).tolist())
        truths.extend(labels.tolist())
    return (
        float(accuracy_score(truths, predictions)),
        float(f1_score(truths, predictions, average="macro", zero_division=0)),
    )


def cross_validate(
    spec: ModelSpec,
    config: TrainConfig,
    records: list[TileRecord],
    folds: np.ndarray,
    checkpoint_dir: str | Path | None = None,
) -> dict:
    """Train on all folds but one, evaluate on the held-out fold, for each fold."""
    train_dataset = TileDataset(records, train=True, seed=config.seed)
    eval_dataset = TileDataset(records, train=False)
    fold_ids = sorted(set(int(f) for f in folds))
    per_fold: list[FoldMetrics] = []
    for fold in fold_ids:
        train_idx = np.where(folds != fold)[0]
        test_idx = np.where(folds == fold)[0]
        result = run_training(spec, config, train_dataset, train_idx)
        accuracy, macro_f1 = evaluate(result.model, eval_dataset, test_idx)
        per_fold.append(FoldMetrics(fold=fold, accuracy=accuracy, macro_f1=macro_f1))
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir)
            path.mkdir(parents=True, exist_ok=True)
            torch.save(
                {"spec": asdict(spec), "state_dict": result.model.state_dict()},
                path / f"fold{fold}.pt",
            )

    accuracies = [m.accuracy for m in per_fold]
    f1s = [m.macro_f1 for m in per_fold]
    return {
        "backbone": spec.backbone,
        "variant": spec.variant_name,
        "params_m": count_parameters(build_model(spec)) / 1e6,
        "folds": [asdict_fold(m) for m in per_fold],
        "accuracy_mean": float(np.mean(accuracies)),
        "accuracy_std": float(np.std(accuracies)),
        "macro_f1_mean": float(np.mean(f1s)),
        "macro_f1_std": float(np.std(f1s)),
    }


def asdict_fold(m: FoldMetrics) -> dict:
    return {"fold": m.fold, "accuracy": m.accuracy, "macro_f1": m.macro_f1}


def train(
    spec: ModelSpec,
    config: TrainConfig,
    fused_csv: str | Path,
    images_dir: str | Path,
    fold_file: str | Path,
    out_dir: str | Path,
) -> dict:
    """File-level entry point: per-fold checkpoints plus a metrics JSON."""
    records = load_fused_csv(fused_csv, images_dir)
    folds = load_fold_csv(fold_file, records)
    out_dir = Path(out_dir)
    summary = cross_validate(spec, config, records, folds, checkpoint_dir=out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary
