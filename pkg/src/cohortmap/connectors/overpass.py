"""Map-service connector: building footprints and construction-year tags.

Queries follow fixed templates so recorded responses replay byte-identically.
Footprints are filtered client-side to the requested box via their
representative point.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import requests

from ..geodesy import BoundingBox, GeoPoint
from ..net import FixtureCache, MalformedResponse, NetworkError, RateLimited, http_timeout, limiter_for

__all__ = [
    "BuildingFootprint",
    "DegeneratePolygon",
    "OverpassClient",
    "BUILDINGS_QUERY_TEMPLATE",
    "YEAR_TAGGED_QUERY_TEMPLATE",
    "DATE_TAGS",
    "extract_year_tagged_buildings",
    "fetch_buildings_in_bbox",
    "representative_point",
]

log = logging.getLogger(__name__)

BUILDINGS_QUERY_TEMPLATE = '[out:json][timeout:{T}];way["building"]({s},{w},{n},{e});out geom;'
YEAR_TAGGED_QUERY_TEMPLATE = (
    '[out:json][timeout:{T}];'
    'way["building"]["building:start_date"]({s},{w},{n},{e});'
    'way["building"]["building:year_built"]({s},{w},{n},{e});'
    'out geom;'
)

# precedence order: start_date wins when both are present
DATE_TAGS = ("building:start_date", "building:year_built")


class DegeneratePolygon(ValueError):
    """Ring encloses no area."""


@dataclass(frozen=True)
class BuildingFootprint:
    """Closed polygon ring plus tags from the map service."""

    way_id: str
    polygon: tuple[GeoPoint, ...]
    tags: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.polygon) < 4:
            raise ValueError(f"ring needs at least 4 points, got {len(self.polygon)}")
        if self.polygon[0] != self.polygon[-1]:
            raise ValueError("ring must be closed (first point == last point)")


def representative_point(f: BuildingFootprint) -> GeoPoint:
    """Area-weighted centroid of the ring (planar shoelace on lon/lat).

    Coordinates are shifted to the first vertex before summing; otherwise the
    tiny-area cross products cancel catastrophically at building scale.
    """
    lat0 = f.polygon[0].lat
    lon0 = f.polygon[0].lon
    twice_area = 0.0
    cx = 0.0
    cy = 0.0
    for a, b in zip(f.polygon, f.polygon[1:]):
        ax, ay = a.lon - lon0, a.lat - lat0
        bx, by = b.lon - lon0, b.lat - lat0
        cross = ax * by - bx * ay
        twice_area += cross
        cx += (ax + bx) * cross
        cy += (ay + by) * cross
    if abs(twice_area) < 1e-18:
        raise DegeneratePolygon(f"way {f.way_id} has zero area")
    return GeoPoint(lat=lat0 + cy / (3.0 * twice_area), lon=lon0 + cx / (3.0 * twice_area))


def extract_year_tagged_buildings(
    footprints: list[BuildingFootprint],
) -> list[tuple[BuildingFootprint, str]]:
    """Keep footprints carrying a construction-date tag, with its raw value."""
    out = []
    for f in footprints:
        for tag in DATE_TAGS:
            value = f.tags.get(tag)
            if value is not None:
                out.append((f, value))
                break
    return out


class OverpassClient:
    """Queries the map service, with replayable on-disk caching."""

    def __init__(
        self,
        endpoint: str,
        cache_dir: str | Path | None = None,
        offline: bool = False,
        timeout: float | None = None,
        rate_per_sec: float = 1.0,
    ) -> None:
        self.endpoint = endpoint
        self.cache = FixtureCache(cache_dir) if cache_dir else None
        self.offline = offline
        self.timeout = timeout if timeout is not None else http_timeout()
        self._limiter = limiter_for(endpoint, rate_per_sec=rate_per_sec)

    def query(self, query_text: str) -> dict:
        body = self.cache.get(query_text) if self.cache else None
        if body is None:
            if self.offline:
                raise NetworkError(f"offline and no recorded response for: {query_text}")
            body = self._fetch(query_text)
            if self.cache:
                self.cache.put(query_text, body)
        try:
            return json.loads(body)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedResponse(f"response is not valid JSON: {exc}") from exc

    def _fetch(self, query_text: str) -> bytes:
        self._limiter.acquire()
        try:
            resp = requests.post(self.endpoint, data={"data": query_text}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise NetworkError(f"request to {self.endpoint} failed: {exc}") from exc
        if resp.status_code == 429:
            retry_after = resp.headers.get("Retry-After")
            raise RateLimited(
                "endpoint rate limit hit",
                retry_after=float(retry_after) if retry_after else None,
            )
        if resp.status_code != 200:
            raise NetworkError(f"HTTP {resp.status_code} from {self.endpoint}")
        return resp.content

    def _footprints(self, payload: dict) -> list[BuildingFootprint]:
        if "elements" not in payload:
            raise MalformedResponse("payload lacks 'elements'")
        footprints = []
        for element in payload["elements"]:
            if element.get("type") != "way" or "geometry" not in element:
                continue
            ring = [GeoPoint(lat=p["lat"], lon=p["lon"]) for p in element["geometry"]]
            if ring and ring[0] != ring[-1]:
                ring.append(ring[0])
            if len(ring) < 4:
                log.debug("skipping way %s: ring too short", element.get("id"))
                continue
            footprint = BuildingFootprint(
                way_id=str(element.get("id", "")),
                polygon=tuple(ring),
                tags=dict(element.get("tags", {})),
            )
            try:
                representative_point(footprint)
            except DegeneratePolygon:
                log.debug("skipping way %s: zero area", footprint.way_id)
                continue
            footprints.append(footprint)
        return footprints

    def fetch_buildings_in_bbox(self, box: BoundingBox) -> list[BuildingFootprint]:
        """All building footprints whose representative point lies in the box."""
        query = BUILDINGS_QUERY_TEMPLATE.format(
            T=int(self.timeout), s=box.south, w=box.west, n=box.north, e=box.east
        )
        footprints = self._footprints(self.query(query))
        return [f for f in footprints if box.contains(representative_point(f))]

    def fetch_year_tagged_in_bbox(self, box: BoundingBox) -> list[BuildingFootprint]:
        """Footprints from the construction-date-tag query, box-filtered."""
        query = YEAR_TAGGED_QUERY_TEMPLATE.format(
            T=int(self.timeout), s=box.south, w=box.west, n=box.north, e=box.east
        )
        footprints = self._footprints(self.query(query))
        return [f for f in footprints if box.contains(representative_point(f))]


def fetch_buildings_in_bbox(
    box: BoundingBox,
    endpoint: str,
    cache_dir: str | Path | None = None,
    offline: bool = False,
) -> list[BuildingFootprint]:
    """One-shot convenience wrapper around OverpassClient."""
    client = OverpassClient(endpoint, cache_dir=cache_dir, offline=offline)
    return client.fetch_buildings_in_bbox(box)
