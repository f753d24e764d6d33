"""Core vocabulary: sources, age cohorts, raw and fused records.

The three evidence sources carry a total priority order (Monument beats
Zensus beats OSM) that the fusion layer uses to resolve co-located records.
Construction years map into five cohorts whose inclusive ranges partition
the integers.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from enum import Enum

from .geodesy import GeoPoint

__all__ = [
    "Source",
    "AgeCohort",
    "RawRecord",
    "FusedRecord",
    "ImplausibleYear",
    "cohort_of",
    "cohort_index",
    "cohort_from_index",
    "cohort_from_label",
    "source_from_label",
    "plausible_year_window",
    "COHORT_LABELS",
    "FUSED_CSV_COLUMNS",
    "fused_to_csv_row",
    "fused_from_csv_row",
    "PLAUSIBLE_YEAR_MIN",
]


class ImplausibleYear(ValueError):
    """Year outside the plausibility window."""


class Source(Enum):
    """Evidence source; enum order encodes fusion priority (most definitive first)."""

    MONUMENT = "monument"
    ZENSUS = "zensus"
    OSM = "osm"

    @property
    def priority(self) -> int:
        return _SOURCE_PRIORITY[self]

    def __lt__(self, other: "Source") -> bool:
        if not isinstance(other, Source):
            return NotImplemented
        return self.priority < other.priority


_SOURCE_PRIORITY = {Source.MONUMENT: 0, Source.ZENSUS: 1, Source.OSM: 2}


class AgeCohort(Enum):
    """Construction-period class; labels are the canonical wire strings."""

    PRE_1919 = "pre-1919"
    C1919_1950 = "1919-1950"
    C1951_1978 = "1951-1978"
    C1979_2000 = "1979-2000"
    POST_2000 = "post-2000"

    @property
    def label(self) -> str:
        return self.value

    @property
    def year_range(self) -> tuple[int | None, int | None]:
        """Inclusive (start, end); None marks an open end."""
        return _COHORT_RANGES[self]

    @property
    def midpoint_year(self) -> int:
        """Representative year used when only a cohort is known."""
        return _COHORT_MIDPOINTS[self]


_COHORT_RANGES: dict[AgeCohort, tuple[int | None, int | None]] = {
    AgeCohort.PRE_1919: (None, 1918),
    AgeCohort.C1919_1950: (1919, 1950),
    AgeCohort.C1951_1978: (1951, 1978),
    AgeCohort.C1979_2000: (1979, 2000),
    AgeCohort.POST_2000: (2001, None),
}

# open-ended cohorts get fixed representatives; bounded ones the floor midpoint
_COHORT_MIDPOINTS: dict[AgeCohort, int] = {
    AgeCohort.PRE_1919: 1900,
    AgeCohort.C1919_1950: (1919 + 1950) // 2,
    AgeCohort.C1951_1978: (1951 + 1978) // 2,
    AgeCohort.C1979_2000: (1979 + 2000) // 2,
    AgeCohort.POST_2000: 2010,
}

_COHORT_ORDER = list(AgeCohort)
COHORT_LABELS = [c.label for c in _COHORT_ORDER]

PLAUSIBLE_YEAR_MIN = 1000


def plausible_year_window() -> tuple[int, int]:
    """Inclusive [min, max] range of years accepted as construction dates."""
    return PLAUSIBLE_YEAR_MIN, datetime.date.today().year + 1


def cohort_of(year: int) -> AgeCohort:
    """Cohort whose inclusive year range contains ``year``."""
    lo, hi = plausible_year_window()
    if not lo <= year <= hi:
        raise ImplausibleYear(f"year {year} outside plausibility window [{lo}, {hi}]")
    for cohort in _COHORT_ORDER:
        start, end = cohort.year_range
        if (start is None or year >= start) and (end is None or year <= end):
            return cohort
    raise AssertionError("cohort ranges must partition the window")


def cohort_index(c: AgeCohort) -> int:
    """Stable chronological index in [0, 4]."""
    return _COHORT_ORDER.index(c)


def cohort_from_index(i: int) -> AgeCohort:
    return _COHORT_ORDER[i]


def cohort_from_label(label: str) -> AgeCohort:
    for cohort in _COHORT_ORDER:
        if cohort.label == label:
            return cohort
    raise ValueError(f"unknown cohort label: {label!r}")


def source_from_label(label: str) -> Source:
    for source in Source:
        if source.value == label:
            return source
    raise ValueError(f"unknown source label: {label!r}")


@dataclass(frozen=True)
class RawRecord:
    """One geocoded evidence row from a single agent."""

    location: GeoPoint
    year_raw: str
    source: Source

    def __post_init__(self) -> None:
        if not self.year_raw:
            raise ValueError("year_raw must be non-empty")


@dataclass(frozen=True)
class FusedRecord:
    """Harmonized building row; the unit of the output dataset."""

    location: GeoPoint
    chosen_year: int
    chosen_source: Source
    cohort: AgeCohort

    def __post_init__(self) -> None:
        if cohort_of(self.chosen_year) is not self.cohort:
            raise ValueError(
                f"cohort {self.cohort.label} inconsistent with year {self.chosen_year}"
            )


FUSED_CSV_COLUMNS = ["lat", "lon", "chosen_year", "chosen_source", "cohort"]


def fused_to_csv_row(r: FusedRecord) -> list[str]:
    return [
        repr(r.location.lat),
        repr(r.location.lon),
        str(r.chosen_year),
        r.chosen_source.value,
        r.cohort.label,
    ]


def fused_from_csv_row(row: list[str]) -> FusedRecord:
    lat, lon, year, source, cohort = row
    return FusedRecord(
        location=GeoPoint(lat=float(lat), lon=float(lon)),
        chosen_year=int(year),
        chosen_source=source_from_label(source),
        cohort=cohort_from_label(cohort),
    )
