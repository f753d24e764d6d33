"""Evaluation and planner-facing arithmetic.

Confusion matrices, accuracy and macro-F1, coverage shares, and the
cohort -> U-value join.  Percentages are rendered at two decimals with
half-up rounding throughout so report files match printed tables.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources

import numpy as np

from .records import AgeCohort, FusedRecord, cohort_index

__all__ = [
    "ConfusionMatrix",
    "UValueRow",
    "EmptyInput",
    "InvalidCounts",
    "confusion_matrix",
    "row_normalize",
    "metrics",
    "coverage_report",
    "uvalues_for_cohort",
    "annotate_uvalues",
    "load_uvalue_table",
    "check_uvalue_monotonicity",
    "round_share",
]

log = logging.getLogger(__name__)

N_CLASSES = 5


class EmptyInput(ValueError):
    """Metric computation needs at least one observation."""


class InvalidCounts(ValueError):
    """Coverage counts must satisfy 0 <= labeled <= universe, universe > 0."""


def round_share(value: float) -> float:
    """Percentage at 2 decimals, half-up."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ConfusionMatrix:
    """5x5 counts; rows are true cohorts, columns predicted."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.counts) != N_CLASSES or any(len(r) != N_CLASSES for r in self.counts):
            raise ValueError("confusion matrix must be 5x5")
        if any(v < 0 for row in self.counts for v in row):
            raise ValueError("confusion matrix entries must be non-negative")

    @property
    def total(self) -> int:
        return sum(v for row in self.counts for v in row)


@dataclass(frozen=True)
class UValueRow:
    """Thermal transmittances (W/m2K) for the four envelope components."""

    roof: float
    upper_ceiling: float
    wall: float
    floor: float

    def __post_init__(self) -> None:
        for name in ("roof", "upper_ceiling", "wall", "floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} U-value must be positive")


def confusion_matrix(pairs: list[tuple[AgeCohort, AgeCohort]]) -> ConfusionMatrix:
    """Tally (true, predicted) cohort pairs."""
    if not pairs:
        raise EmptyInput("no (true, predicted) pairs")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for true, pred in pairs:
        counts[cohort_index(true), cohort_index(pred)] += 1
    return ConfusionMatrix(counts=tuple(tuple(int(v) for v in row) for row in counts))


def row_normalize(m: ConfusionMatrix) -> list[list[float]]:
    """Rows scaled to sum to 1; zero-support rows stay all-zero."""
    out = []
    for row in m.counts:
        support = sum(row)
        if support == 0:
            out.append([0.0] * N_CLASSES)
        else:
            out.append([v / support for v in row])
    return out


def metrics(m: ConfusionMatrix) -> dict:
    """Accuracy, per-class precision/recall/F1, and the 5-class macro F1.

    Zero-support classes contribute F1 = 0 to the macro average; a class F1
    is 0 whenever precision and recall are both 0.
    """
    if m.total == 0:
        raise EmptyInput("confusion matrix has no observations")
    counts = np.asarray(m.counts, dtype=np.float64)
    diag = np.diag(counts)
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    precision = np.divide(diag, col_sums, out=np.zeros(N_CLASSES), where=col_sums > 0)
    recall = np.divide(diag, row_sums, out=np.zeros(N_CLASSES), where=row_sums > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(N_CLASSES), where=pr > 0)
    return {
        "accuracy": float(diag.sum() / m.total),
        "per_class_precision": precision.tolist(),
        "per_class_recall": recall.tolist(),
        "per_class_f1": f1.tolist(),
        "macro_f1": float(f1.mean()),
    }


def coverage_report(labeled: int, universe: int) -> float:
    """Share of the building universe carrying labels, as a 2-dp percentage."""
    if universe <= 0 or labeled < 0 or labeled > universe:
        raise InvalidCounts(f"labeled={labeled}, universe={universe}")
    return round_share(100.0 * labeled / universe)


_UVALUE_COMPONENTS = ("roof", "upper_ceiling", "wall", "floor")
_uvalue_cache: dict[AgeCohort, UValueRow] | None = None


def load_uvalue_table(strict: bool = False) -> dict[AgeCohort, UValueRow]:
    """Cohort -> U-value rows from the shipped reference data file.

    The table is expected to be non-increasing per component from the oldest
    to the newest cohort; violations are logged (or raised when ``strict``).
    """
    global _uvalue_cache
    if _uvalue_cache is None:
        path = resources.files("cohortmap").joinpath("data/uvalues.csv")
        with path.open(encoding="utf-8", newline="") as f:
            rows = {
                r["cohort"]: UValueRow(
                    roof=float(r["roof"]),
                    upper_ceiling=float(r["upper_ceiling"]),
                    wall=float(r["wall"]),
                    floor=float(r["floor"]),
                )
                for r in csv.DictReader(f)
            }
        table = {c: rows[c.label] for c in AgeCohort}
        violations = check_uvalue_monotonicity(table)
        for component, older, newer in violations:
            message = (
                f"U-value table: {component} rises from {older.label} to {newer.label}"
            )
            if strict:
                raise ValueError(message)
            log.warning(message)
        _uvalue_cache = table
    return _uvalue_cache


def check_uvalue_monotonicity(
    table: dict[AgeCohort, UValueRow],
) -> list[tuple[str, AgeCohort, AgeCohort]]:
    """Adjacent cohort pairs where a component's U-value increases."""
    violations = []
    cohorts = list(AgeCohort)
    for component in _UVALUE_COMPONENTS:
        for older, newer in zip(cohorts, cohorts[1:]):
            if getattr(table[newer], component) > getattr(table[older], component):
                violations.append((component, older, newer))
    return violations


def uvalues_for_cohort(c: AgeCohort) -> UValueRow:
    """Reference U-values for a cohort."""
    return load_uvalue_table()[c]


def annotate_uvalues(dataset: list[FusedRecord]) -> list[tuple[FusedRecord, UValueRow]]:
    """Join each record with its cohort's U-values; length preserved."""
    return [(r, uvalues_for_cohort(r.cohort)) for r in dataset]
