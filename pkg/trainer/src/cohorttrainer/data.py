"""Datasets: fused-CSV + fold-CSV loading, and a synthetic smoke generator.

The trainer consumes the mapping pipeline's file formats directly: the fused
dataset CSV (``lat,lon,chosen_year,chosen_source,cohort``), the fold CSV
(``lat,lon,fold`` with a ``# k=.. seed=..`` header), and a directory of tile
images named ``{lat!r}_{lon!r}.png``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

from . import COHORT_LABELS

__all__ = [
    "FoldFileMismatch",
    "TileRecord",
    "TileDataset",
    "load_fused_csv",
    "load_fold_csv",
    "generate_synthetic_city",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
]

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class FoldFileMismatch(ValueError):
    """Fold rows do not align with the dataset rows."""


@dataclass(frozen=True)
class TileRecord:
    lat: float
    lon: float
    label: int
    image_path: Path


def image_name(lat: float, lon: float) -> str:
    return f"{lat!r}_{lon!r}.png"


def load_fused_csv(path: str | Path, images_dir: str | Path) -> list[TileRecord]:
    images_dir = Path(images_dir)
    records = []
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            lat, lon = float(row["lat"]), float(row["lon"])
            records.append(
                TileRecord(
                    lat=lat,
                    lon=lon,
                    label=COHORT_LABELS.index(row["cohort"]),
                    image_path=images_dir / image_name(lat, lon),
                )
            )
    return records


def load_fold_csv(path: str | Path, records: list[TileRecord]) -> np.ndarray:
    """Fold index per record; rows must align 1:1 with the dataset rows."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("lat,"):
                continue
            lat, lon, fold = line.split(",")
            rows.append((float(lat), float(lon), int(fold)))
    if len(rows) != len(records):
        raise FoldFileMismatch(f"{len(rows)} fold rows for {len(records)} records")
    folds = np.empty(len(records), dtype=np.int64)
    for i, ((lat, lon, fold), record) in enumerate(zip(rows, records)):
        if lat != record.lat or lon != record.lon:
            raise FoldFileMismatch(
                f"row {i}: fold file at ({lat}, {lon}) but dataset at "
                f"({record.lat}, {record.lon})"
            )
        folds[i] = fold
    return folds


class TileDataset(Dataset):
    """Tile images with cohort labels and train-time augmentation."""

    def __init__(self, records: list[TileRecord], train: bool = False, seed: int = 0) -> None:
        self.records = records
        self.train = train
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, int]:
        record = self.records[index]
        image = Image.open(record.image_path).convert("RGB")
        if self.train:
            if self._rng.random() < 0.5:
                image = image.transpose(Image.FLIP_LEFT_RIGHT)
            angle = float(self._rng.uniform(-10.0, 10.0))
            image = image.rotate(angle, resample=Image.BILINEAR)
        image = image.resize((224, 224), Image.BILINEAR)
        array = np.asarray(image, dtype=np.float32) / 255.0
        array = (array - IMAGENET_MEAN) / IMAGENET_STD
        tensor = torch.from_numpy(array.astype(np.float32)).permute(2, 0, 1)
        return tensor, record.label


def _roof_texture(rng: np.random.Generator, label: int, size: int) -> np.ndarray:
    """Procedural roof-like texture per cohort (non-physical, for smoke tests).

    Older cohorts get steep high-frequency gable stripes; newer ones flatten
    out, ending in flat panels with bright rectangles standing in for PV.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / size
    frequency = [14.0, 10.0, 6.0, 3.0, 1.5][label]
    orientation = [0.0, 0.35, 0.8, 1.2, 1.57][label]
    wave = np.sin(2 * math.pi * frequency * (xx * math.cos(orientation) + yy * math.sin(orientation)))
    base = np.stack([0.45 + 0.25 * wave] * 3, axis=-1)
    tint = np.array([[0.8, 0.35, 0.25], [0.7, 0.5, 0.3], [0.55, 0.55, 0.5],
                     [0.45, 0.5, 0.55], [0.3, 0.35, 0.4]][label], dtype=np.float32)
    base = base * tint
    if label == 4:
        x0, y0 = rng.integers(4, size // 2, size=2)
        base[y0:y0 + size // 4, x0:x0 + size // 3] = (0.1, 0.15, 0.5)
    noise = rng.normal(0.0, 0.04, size=base.shape).astype(np.float32)
    return np.clip(base + noise, 0.0, 1.0)


def generate_synthetic_city(
    out_dir: str | Path,
    per_cohort: int = 12,
    seed: int = 0,
    image_size: int = 64,
    folds_k: int = 3,
) -> tuple[Path, Path, Path]:
    """Desk-scale synthetic dataset in the pipeline's file formats.

    Returns (fused_csv, fold_csv, images_dir).  Labels follow the procedural
    texture, not any physical truth.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "tiles"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    representative_years = [1890, 1930, 1960, 1990, 2010]
    rows = []
    for label in range(len(COHORT_LABELS)):
        for i in range(per_cohort):
            lat = round(50.7 + label * 0.01 + i * 0.0001, 6)
            lon = round(6.0 + label * 0.01 + (i % 4) * 0.0001, 6)
            texture = _roof_texture(rng, label, image_size)
            image = Image.fromarray((texture * 255).astype(np.uint8))
            image.save(images_dir / image_name(lat, lon))
            rows.append((lat, lon, representative_years[label], "zensus", COHORT_LABELS[label]))

    fused_csv = out_dir / "fused.csv"
    with open(fused_csv, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["lat", "lon", "chosen_year", "chosen_source", "cohort"])
        for lat, lon, year, source, cohort in rows:
            writer.writerow([repr(lat), repr(lon), year, source, cohort])

    fold_csv = out_dir / "folds.csv"
    with open(fold_csv, "w", encoding="utf-8", newline="") as f:
        f.write(f"# k={folds_k} seed={seed}\n")
        f.write("lat,lon,fold\n")
        for i, (lat, lon, *_rest) in enumerate(rows):
            f.write(f"{lat!r},{lon!r},{i % folds_k}\n")

    return fused_csv, fold_csv, images_dir
