"""Address geocoding with an offline fixture resolver for tests and replays.

Candidates outside the configured city box are rejected; the first surviving
candidate wins.  The fixture resolver serves a JSON file mapping
``"street house_number, city"`` to candidate lists.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol

import requests

from .net import NetworkError, http_timeout
from .geodesy import BoundingBox, GeoPoint
from .normalize import Address

__all__ = [
    "GeocodeMiss",
    "AmbiguousOutsideCity",
    "Geocoder",
    "FixtureGeocoder",
    "HttpGeocoder",
    "geocode",
    "address_key",
]


class GeocodeMiss(LookupError):
    """No candidate found for the address."""


class AmbiguousOutsideCity(LookupError):
    """Candidates exist, but none inside the configured city box."""


def address_key(addr: Address) -> str:
    return f"{addr.street} {addr.house_number}, {addr.city}"


class Geocoder(Protocol):
    def candidates(self, addr: Address) -> list[GeoPoint]:
        """Candidate points in provider order."""


class FixtureGeocoder:
    """Offline resolver backed by a recorded candidate file."""

    def __init__(self, path: str | Path) -> None:
        with open(path, encoding="utf-8") as f:
            self._table: dict[str, list[dict]] = json.load(f)

    def candidates(self, addr: Address) -> list[GeoPoint]:
        rows = self._table.get(address_key(addr), [])
        return [GeoPoint(lat=r["lat"], lon=r["lon"]) for r in rows]


class HttpGeocoder:
    """Minimal client for a search endpoint returning ``[{lat, lon}, ...]``."""

    def __init__(self, endpoint: str, timeout: float | None = None) -> None:
        self.endpoint = endpoint
        self.timeout = timeout if timeout is not None else http_timeout()

    def candidates(self, addr: Address) -> list[GeoPoint]:
        try:
            resp = requests.get(
                self.endpoint,
                params={"q": address_key(addr), "format": "json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise NetworkError(f"geocoder request failed: {exc}") from exc
        if resp.status_code != 200:
            raise NetworkError(f"geocoder returned HTTP {resp.status_code}")
        return [GeoPoint(lat=float(r["lat"]), lon=float(r["lon"])) for r in resp.json()]


def geocode(addr: Address, geocoder: Geocoder, city_box: BoundingBox | None = None) -> GeoPoint:
    """First candidate inside the city box (or first overall without a box)."""
    candidates = geocoder.candidates(addr)
    if not candidates:
        raise GeocodeMiss(f"no geocode candidate for {address_key(addr)!r}")
    if city_box is None:
        return candidates[0]
    for point in candidates:
        if city_box.contains(point):
            return point
    raise AmbiguousOutsideCity(
        f"{len(candidates)} candidate(s) for {address_key(addr)!r}, none inside the city box"
    )
