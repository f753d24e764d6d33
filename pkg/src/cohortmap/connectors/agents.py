"""The three data-collection agents, producing geocoded raw records.

Each agent isolates per-item failures: one bad cell, page, or entry is
logged and skipped rather than aborting a whole run.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

from ..geocode import Geocoder, geocode
from ..geodesy import BoundingBox, GridCellId, grid_to_bbox, parse_grid_id
from ..normalize import UnparseableAddress, parse_address
from ..records import RawRecord, Source
from .annotator import Annotator, annotate_year
from .overpass import OverpassClient, extract_year_tagged_buildings, representative_point
from .scraper import ScrapeConfig, SelectorMiss, scrape_monument_entries

__all__ = [
    "ZensusCell",
    "load_zensus_cells",
    "run_zensus_agent",
    "run_osm_agent",
    "run_monument_agent",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZensusCell:
    """One census grid cell with its construction-period attribute."""

    grid_id: GridCellId
    period_label: str

    def __post_init__(self) -> None:
        if not self.period_label:
            raise ValueError("period_label must be non-empty")


def load_zensus_cells(
    path: str | Path, allowed_labels: set[str] | None = None
) -> list[ZensusCell]:
    """Read ``grid_id,period_label`` rows; labels outside the closed set fail."""
    cells = []
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            label = row["period_label"]
            if allowed_labels is not None and label not in allowed_labels:
                raise ValueError(f"period label {label!r} not in the configured label set")
            cells.append(ZensusCell(grid_id=parse_grid_id(row["grid_id"]), period_label=label))
    return cells


def run_zensus_agent(
    cells: list[ZensusCell],
    client: OverpassClient,
    label_map: dict[str, str] | None = None,
) -> list[RawRecord]:
    """Fan each cell out to its footprints, labeled with the cell's period.

    ``label_map`` translates census period labels to normalizer-ready
    year_raw strings; unmapped labels pass through verbatim.
    """
    records: list[RawRecord] = []
    for cell in cells:
        year_raw = (label_map or {}).get(cell.period_label, cell.period_label)
        try:
            box = grid_to_bbox(cell.grid_id)
            footprints = client.fetch_buildings_in_bbox(box)
        except Exception as exc:
            log.warning("zensus cell %s skipped: %s", cell.grid_id, exc)
            continue
        for footprint in footprints:
            records.append(
                RawRecord(
                    location=representative_point(footprint),
                    year_raw=year_raw,
                    source=Source.ZENSUS,
                )
            )
    return records


def run_osm_agent(box: BoundingBox, client: OverpassClient) -> list[RawRecord]:
    """Construction-date-tagged footprints in the box, as raw records."""
    footprints = client.fetch_year_tagged_in_bbox(box)
    return [
        RawRecord(
            location=representative_point(footprint),
            year_raw=year_raw,
            source=Source.OSM,
        )
        for footprint, year_raw in extract_year_tagged_buildings(footprints)
    ]


def run_monument_agent(
    pages: list[tuple[str, str]],
    scrape_config: ScrapeConfig,
    annotator: Annotator,
    geocoder: Geocoder,
    city_box: BoundingBox | None = None,
) -> list[RawRecord]:
    """Scrape registry pages, annotate years, geocode addresses.

    ``pages`` holds (html, base_url) tuples.  Entries without a usable year
    or address are skipped; the skip count is logged per page.
    """
    records: list[RawRecord] = []
    for html, base_url in pages:
        try:
            entries = scrape_monument_entries(html, scrape_config, base_url=base_url)
        except SelectorMiss as exc:
            log.warning("monument page %s skipped: %s", base_url, exc)
            continue
        skipped = 0
        for entry in entries:
            try:
                response = annotate_year(entry, annotator)
                if response.construction_year is None:
                    skipped += 1
                    continue
                address = parse_address(entry.address_text)
                point = geocode(address, geocoder, city_box=city_box)
            except (UnparseableAddress, LookupError) as exc:
                log.info("monument entry %s skipped: %s", entry.url, exc)
                skipped += 1
                continue
            records.append(
                RawRecord(
                    location=point,
                    year_raw=str(response.construction_year),
                    source=Source.MONUMENT,
                )
            )
        if skipped:
            log.info("monument page %s: %d entr(y/ies) skipped", base_url, skipped)
    return records
