"""Training configuration: loss identities, schedule endpoints, smoke run."""

from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from cohorttrainer.data import FoldFileMismatch, TileDataset, load_fold_csv
from cohorttrainer.model import ModelSpec
from cohorttrainer.train import TrainConfig, cross_validate, run_training

SMOKE_SPEC = ModelSpec(backbone="SimpleCNN", backbone_frozen=False)


class TestLossIdentities:
    def test_uniform_prediction_smoothed_ce_is_ln5(self):
        """Uniform logits give loss ln 5 for any target and any smoothing."""
        for smoothing in (0.0, 0.05, 0.2):
            loss_fn = torch.nn.CrossEntropyLoss(label_smoothing=smoothing)
            logits = torch.zeros(7, 5)
            labels = torch.tensor([0, 1, 2, 3, 4, 0, 2])
            loss = float(loss_fn(logits, labels))
            assert abs(loss - math.log(5)) <= 1e-6


class TestConfigValidation:
    def test_defaults_match_training_recipe(self):
        config = TrainConfig()
        assert config.lr == 3e-4
        assert config.weight_decay == 1e-4
        assert config.epochs == 30
        assert config.label_smoothing == 0.05

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(lr=0.0)


class TestCosineSchedule:
    def test_starts_at_lr_and_ends_at_floor(self, synthetic_city):
        config = TrainConfig(epochs=5, batch_size=16, seed=0)
        dataset = TileDataset(synthetic_city["records"], train=True, seed=0)
        result = run_training(SMOKE_SPEC, config, dataset, np.arange(20))
        assert result.lr_history[0] == pytest.approx(3e-4, rel=1e-12)
        assert result.final_lr == pytest.approx(0.0, abs=1e-12)
        assert result.lr_history == sorted(result.lr_history, reverse=True)

    def test_nonzero_floor(self, synthetic_city):
        config = TrainConfig(epochs=3, lr_floor=1e-5, batch_size=16)
        dataset = TileDataset(synthetic_city["records"], train=True, seed=0)
        result = run_training(SMOKE_SPEC, config, dataset, np.arange(20))
        assert result.final_lr == pytest.approx(1e-5, rel=1e-9)


class TestSmokeRun:
    def test_two_epoch_loss_decreases_in_most_seeds(self, synthetic_city):
        """60 images, 2 epochs: training loss drops between epochs in >= 4/5 seeds."""
        records = synthetic_city["records"]
        dataset = TileDataset(records, train=False)
        indices = np.arange(60)
        decreased = 0
        for seed in range(5):
            config = TrainConfig(epochs=2, batch_size=16, seed=seed)
            result = run_training(SMOKE_SPEC, config, dataset, indices)
            if result.epoch_losses[1] < result.epoch_losses[0]:
                decreased += 1
        assert decreased >= 4, f"loss decreased in only {decreased}/5 repeats"


class TestCrossValidation:
    def test_per_fold_metrics_and_summary(self, synthetic_city, tmp_path):
        config = TrainConfig(epochs=1, batch_size=16, seed=0)
        summary = cross_validate(
            SMOKE_SPEC,
            config,
            synthetic_city["records"],
            synthetic_city["folds"],
            checkpoint_dir=tmp_path,
        )
        assert {f["fold"] for f in summary["folds"]} == {0, 1, 2}
        for key in ("accuracy_mean", "accuracy_std", "macro_f1_mean", "macro_f1_std", "params_m"):
            assert key in summary
        for fold in (0, 1, 2):
            assert (tmp_path / f"fold{fold}.pt").exists()
        for metrics in summary["folds"]:
            assert 0.0 <= metrics["accuracy"] <= 1.0
            assert 0.0 <= metrics["macro_f1"] <= 1.0

    def test_deterministic_given_seed(self, synthetic_city):
        config = TrainConfig(epochs=1, batch_size=16, seed=7)
        runs = [
            cross_validate(SMOKE_SPEC, config, synthetic_city["records"], synthetic_city["folds"])
            for _ in range(2)
        ]
        assert runs[0]["folds"] == runs[1]["folds"]


class TestFoldFile:
    def test_mismatched_fold_file_rejected(self, synthetic_city, tmp_path):
        bad = tmp_path / "bad_folds.csv"
        bad.write_text("# k=3 seed=0\nlat,lon,fold\n1.0,2.0,0\n", encoding="utf-8")
        with pytest.raises(FoldFileMismatch):
            load_fold_csv(bad, synthetic_city["records"])

    def test_misaligned_coordinates_rejected(self, synthetic_city, tmp_path):
        records = synthetic_city["records"]
        lines = ["# k=3 seed=0", "lat,lon,fold"]
        for record in records:
            lines.append(f"{record.lat + 1.0!r},{record.lon!r},0")
        bad = tmp_path / "misaligned.csv"
        bad.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(FoldFileMismatch):
            load_fold_csv(bad, records)


class TestStagedUnfreezing:
    def test_last_stage_unfreezes_at_configured_epoch(self, synthetic_city):
        config = TrainConfig(epochs=2, batch_size=16, unfreeze_last_stage_at_epoch=1)
        spec = ModelSpec(backbone="SimpleCNN", backbone_frozen=True)
        dataset = TileDataset(synthetic_city["records"], train=False)
        result = run_training(spec, config, dataset, np.arange(20))
        last_stage = list(result.model.backbone.children())[-1]
        assert all(p.requires_grad for p in last_stage.parameters())
        first_stage = list(result.model.backbone.children())[0]
        assert not any(p.requires_grad for p in first_stage.parameters())
