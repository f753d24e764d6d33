"""Data-collection connectors: census grid, map service, monument registry.

Connectors are replayable: every network exchange can be recorded to and
served from an on-disk cache keyed by query hash, so test and batch runs
are reproducible offline.
"""

from .annotator import (
    Annotator,
    AnnotatorResponse,
    AnnotatorUnavailable,
    ContractViolation,
    RemoteAnnotator,
    RuleBasedAnnotator,
    annotate_year,
)
from .agents import ZensusCell, load_zensus_cells, run_monument_agent, run_osm_agent, run_zensus_agent
from ..net import FixtureCache, MalformedResponse, NetworkError, RateLimited
from .overpass import (
    BuildingFootprint,
    DegeneratePolygon,
    OverpassClient,
    extract_year_tagged_buildings,
    fetch_buildings_in_bbox,
    representative_point,
)
from .scraper import MonumentEntry, ScrapeConfig, SelectorMiss, scrape_monument_entries

__all__ = [
    "Annotator",
    "AnnotatorResponse",
    "AnnotatorUnavailable",
    "BuildingFootprint",
    "ContractViolation",
    "DegeneratePolygon",
    "FixtureCache",
    "MalformedResponse",
    "MonumentEntry",
    "NetworkError",
    "OverpassClient",
    "RateLimited",
    "RemoteAnnotator",
    "RuleBasedAnnotator",
    "ScrapeConfig",
    "SelectorMiss",
    "ZensusCell",
    "annotate_year",
    "extract_year_tagged_buildings",
    "fetch_buildings_in_bbox",
    "load_zensus_cells",
    "representative_point",
    "run_monument_agent",
    "run_osm_agent",
    "run_zensus_agent",
    "scrape_monument_entries",
]
