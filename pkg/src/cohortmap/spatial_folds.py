"""Spatial cross-validation folds via K-means on standardized coordinates.

Clustering is fully deterministic given (points, k, seed): k-means++ seeding
from an explicit seed, Lloyd iterations until assignments stabilize (cap 300),
nearest-centroid ties broken by lowest centroid index.  Fold files are
byte-stable across runs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .geodesy import GeoPoint
from .records import FusedRecord

__all__ = [
    "FoldAssignment",
    "KMeansModel",
    "DegenerateSpread",
    "TooFewDistinctPoints",
    "standardize",
    "kmeans",
    "assign_folds",
    "write_fold_file",
    "read_fold_file",
]

MAX_ITERATIONS = 300


class DegenerateSpread(ValueError):
    """Standardization needs nonzero variance in every dimension."""


class TooFewDistinctPoints(ValueError):
    """k exceeds the number of distinct points."""


@dataclass(frozen=True)
class FoldAssignment:
    record_index: int
    fold: int


@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray
    k: int
    seed: int
    iterations_run: int
    inertia_history: tuple[float, ...]

    def assign(self, points: np.ndarray) -> np.ndarray:
        """Nearest-centroid index per point (lowest index on ties)."""
        d2 = ((points[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)


def standardize(points: list[GeoPoint]) -> np.ndarray:
    """Per-dimension zero mean, unit population standard deviation."""
    if len(points) < 2:
        raise DegenerateSpread("need at least 2 points")
    arr = np.array([[p.lat, p.lon] for p in points], dtype=np.float64)
    std = arr.std(axis=0)
    if np.any(std == 0.0):
        raise DegenerateSpread(f"zero variance in dimension(s) {np.where(std == 0.0)[0].tolist()}")
    return (arr - arr.mean(axis=0)) / std


def _plusplus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        # total > 0 is guaranteed while i < k <= number of distinct points
        assert total > 0.0, "k-means++ ran out of distinct points"
        centroids[i] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int) -> KMeansModel:
    """Lloyd's algorithm with k-means++ seeding; deterministic per (points, k, seed)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    distinct = np.unique(points, axis=0)
    if k < 1 or k > len(distinct):
        raise TooFewDistinctPoints(f"k={k} but only {len(distinct)} distinct points")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_seed(points, k, rng)
    assignments = np.full(len(points), -1)
    history: list[float] = []
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignments = d2.argmin(axis=1)
        inertia = float(d2[np.arange(len(points)), new_assignments].sum())
        if history:
            # Lloyd never increases inertia; tolerate only float noise
            assert inertia <= history[-1] + 1e-9 * max(1.0, history[-1]), (
                f"inertia rose: {history[-1]} -> {inertia}"
            )
        history.append(inertia)
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for j in range(k):
            members = points[assignments == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                # deterministic reseed: move to the point farthest from its centroid
                dist = d2[np.arange(len(points)), assignments]
                centroids[j] = points[int(dist.argmax())]
    return KMeansModel(
        centroids=centroids,
        k=k,
        seed=seed,
        iterations_run=iterations,
        inertia_history=tuple(history),
    )


def assign_folds(dataset: list[FusedRecord], k: int, seed: int) -> list[FoldAssignment]:
    """Fold index per record: nearest centroid over standardized locations."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    standardized = standardize([r.location for r in dataset])
    model = kmeans(standardized, k=k, seed=seed)
    folds = model.assign(standardized)
    return [FoldAssignment(record_index=i, fold=int(f)) for i, f in enumerate(folds)]


def write_fold_file(
    path: str, dataset: list[FusedRecord], assignments: list[FoldAssignment], k: int, seed: int
) -> None:
    """CSV ``lat,lon,fold`` with k and seed recorded in a header comment."""
    buf = io.StringIO()
    buf.write(f"# k={k} seed={seed}\n")
    buf.write("lat,lon,fold\n")
    for a in assignments:
        p = dataset[a.record_index].location
        buf.write(f"{p.lat!r},{p.lon!r},{a.fold}\n")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(buf.getvalue())


def read_fold_file(path: str) -> tuple[list[tuple[float, float, int]], dict[str, int]]:
    """Rows plus the k/seed header metadata."""
    rows: list[tuple[float, float, int]] = []
    meta: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if value:
                        meta[key] = int(value)
                continue
            if line.startswith("lat,"):
                continue
            lat, lon, fold = line.split(",")
            rows.append((float(lat), float(lon), int(fold)))
    return rows, meta
