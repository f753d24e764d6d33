"""Orchestration, fusion, and harmonization of the three evidence agents.

Agents run concurrently and independently; their outputs are concatenated,
grouped by quantized (lat, lon), and resolved by source priority
(Monument beats Zensus beats OSM).  Groups where no source yields a usable
year or cohort hint are dropped and reported, never raised.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .analytics import round_share
from .geodesy import GeoPoint
from .normalize import TemporalResult, normalize_temporal
from .records import (
    AgeCohort,
    FusedRecord,
    RawRecord,
    Source,
    cohort_index,
    cohort_of,
)

__all__ = [
    "FusionConfig",
    "FusionReport",
    "AgentRunResult",
    "AllAgentsFailed",
    "run_agents",
    "fuse",
    "harmonize",
    "cohort_distribution",
]

log = logging.getLogger(__name__)

Agent = Callable[[], list[RawRecord]]


class AllAgentsFailed(RuntimeError):
    """Every data-collection agent failed; nothing to fuse."""


@dataclass(frozen=True)
class FusionConfig:
    coord_quantize_decimals: int = 6
    priority: tuple[Source, ...] = (Source.MONUMENT, Source.ZENSUS, Source.OSM)

    def __post_init__(self) -> None:
        if sorted(self.priority, key=lambda s: s.value) != sorted(Source, key=lambda s: s.value):
            raise ValueError("priority must be a permutation of all three sources")
        if not 4 <= self.coord_quantize_decimals <= 8:
            raise ValueError("coord_quantize_decimals must be in [4, 8]")


@dataclass
class FusionReport:
    """Observability record for one harmonization run."""

    input_counts: dict[str, int] = field(default_factory=dict)
    groups_total: int = 0
    groups_dropped_null: int = 0
    output_count: int = 0
    conflicts_resolved: dict[str, int] = field(default_factory=dict)
    dropped_keys: list[tuple[float, float]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "input_counts": dict(sorted(self.input_counts.items())),
            "groups_total": self.groups_total,
            "groups_dropped_null": self.groups_dropped_null,
            "output_count": self.output_count,
            "conflicts_resolved": dict(sorted(self.conflicts_resolved.items())),
            "dropped_keys": [[lat, lon] for lat, lon in self.dropped_keys],
        }


@dataclass
class AgentRunResult:
    by_source: dict[Source, list[RawRecord]]
    failures: dict[Source, str]


def run_agents(agents: Mapping[Source, Agent]) -> AgentRunResult:
    """Run the agents concurrently; one failure never aborts the others."""
    by_source: dict[Source, list[RawRecord]] = {}
    failures: dict[Source, str] = {}
    with ThreadPoolExecutor(max_workers=max(1, len(agents))) as pool:
        futures = {source: pool.submit(agent) for source, agent in agents.items()}
        for source in agents:
            try:
                by_source[source] = futures[source].result()
            except Exception as exc:
                log.warning("agent %s failed: %s", source.value, exc)
                failures[source] = str(exc)
    if agents and not by_source:
        raise AllAgentsFailed(f"all agents failed: {failures}")
    return AgentRunResult(by_source=by_source, failures=failures)


def fuse(per_source_lists: Iterable[list[RawRecord]]) -> list[RawRecord]:
    """Concatenate agent outputs; no deduplication happens here."""
    combined: list[RawRecord] = []
    for records in per_source_lists:
        combined.extend(records)
    return combined


def _quantize(value: float, decimals: int) -> float:
    return round(value, decimals) + 0.0  # fold -0.0 into 0.0


def _pick_for_source(parsed: list[TemporalResult]) -> tuple[int, AgeCohort] | None:
    """Resolve one source's candidates: earliest explicit year wins; a
    cohort hint (earliest cohort) is used only when no year is available."""
    years = [t.year for t in parsed if t.year is not None]
    if years:
        year = min(years)
        return year, cohort_of(year)
    hints = [t.cohort_hint for t in parsed if t.cohort_hint is not None]
    if hints:
        cohort = min(hints, key=cohort_index)
        return cohort.midpoint_year, cohort
    return None


def harmonize(
    records: list[RawRecord], config: FusionConfig | None = None
) -> tuple[list[FusedRecord], FusionReport]:
    """Group co-located records and select one year by source priority.

    Output order is canonical (lat, lon, source), so any permutation of the
    input yields an identical result.
    """
    config = config or FusionConfig()
    report = FusionReport()
    for source in Source:
        report.input_counts[source.value] = 0
    for r in records:
        report.input_counts[r.source.value] += 1

    groups: dict[tuple[float, float], list[RawRecord]] = {}
    for r in records:
        key = (
            _quantize(r.location.lat, config.coord_quantize_decimals),
            _quantize(r.location.lon, config.coord_quantize_decimals),
        )
        groups.setdefault(key, []).append(r)
    report.groups_total = len(groups)

    fused: list[FusedRecord] = []
    dropped: list[tuple[float, float]] = []
    for key, group in groups.items():
        by_source: dict[Source, list[TemporalResult]] = {}
        for r in group:
            by_source.setdefault(r.source, []).append(normalize_temporal(r.year_raw))

        chosen: tuple[Source, int, AgeCohort] | None = None
        usable_sources: list[Source] = []
        for source in config.priority:
            pick = _pick_for_source(by_source.get(source, []))
            if pick is None:
                continue
            usable_sources.append(source)
            if chosen is None:
                chosen = (source, pick[0], pick[1])

        if chosen is None:
            dropped.append(key)
            continue

        winner, year, cohort = chosen
        for loser in usable_sources[1:]:
            pair = f"{winner.value}>{loser.value}"
            report.conflicts_resolved[pair] = report.conflicts_resolved.get(pair, 0) + 1
        fused.append(
            FusedRecord(
                location=GeoPoint(lat=key[0], lon=key[1]),
                chosen_year=year,
                chosen_source=winner,
                cohort=cohort,
            )
        )

    fused.sort(
        key=lambda r: (r.location.lat, r.location.lon, r.chosen_source.priority)
    )
    dropped.sort()
    report.dropped_keys = dropped
    report.groups_dropped_null = len(dropped)
    report.output_count = len(fused)
    return fused, report


def cohort_distribution(
    dataset: list[FusedRecord],
) -> dict[AgeCohort, tuple[int, float]]:
    """Count and 2-dp percentage share per cohort."""
    counts = {c: 0 for c in AgeCohort}
    for r in dataset:
        counts[r.cohort] += 1
    total = len(dataset)
    return {
        c: (n, round_share(100.0 * n / total) if total else 0.0)
        for c, n in counts.items()
    }
