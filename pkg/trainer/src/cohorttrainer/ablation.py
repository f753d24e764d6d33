"""Ablation harness: backbones x variants grid with per-cell failure isolation."""

from __future__ import annotations

import logging

import numpy as np

from .data import TileRecord
from .model import ModelSpec
from .train import TrainConfig, cross_validate

__all__ = ["VARIANTS", "variant_spec", "ablation_grid"]

log = logging.getLogger(__name__)

VARIANTS = ("baseline", "+FPN", "+FPN+CoordConv", "+FPN+CoordConv+SE")


def variant_spec(backbone: str, variant: str, **overrides) -> ModelSpec:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    return ModelSpec(
        backbone=backbone,
        use_fpn=variant != "baseline",
        use_coordconv="CoordConv" in variant,
        use_se="SE" in variant,
        **overrides,
    )


def ablation_grid(
    backbones: list[str],
    variants: list[str],
    records: list[TileRecord],
    folds: np.ndarray,
    config: TrainConfig | None = None,
) -> list[dict]:
    """One row per (backbone, variant); a failed cell is marked, not fatal."""
    config = config or TrainConfig()
    rows = []
    for backbone in backbones:
        for variant in variants:
            try:
                spec = variant_spec(backbone, variant)
                row = cross_validate(spec, config, records, folds)
                row["status"] = "ok"
            except Exception as exc:
                log.warning("ablation cell (%s, %s) failed: %s", backbone, variant, exc)
                row = {
                    "backbone": backbone,
                    "variant": variant,
                    "status": f"failed: {exc}",
                }
            rows.append(row)
    return rows
