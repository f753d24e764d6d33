"""Grid-cell identifiers, ETRS89-LAEA (EPSG:3035) <-> WGS84, and slippy-map tiles.

The census grid addresses 100 m cells by their lower-left corner in EPSG:3035
meters.  The projection here is the ellipsoidal Lambert Azimuthal Equal Area
on GRS80 (center 52N/10E, false origin 4321000/3210000), implemented directly
so results agree with authoritative transformation tools to sub-centimeter.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "GeoPoint",
    "LaeaPoint",
    "GridCellId",
    "BoundingBox",
    "TileCoord",
    "MalformedGridId",
    "NonAlignedCorner",
    "OutOfDomain",
    "LatitudeOutOfMercatorRange",
    "parse_grid_id",
    "compose_grid_id",
    "wgs84_to_laea",
    "laea_to_wgs84",
    "grid_to_bbox",
    "lonlat_to_tile",
    "tile_to_bbox",
]


class MalformedGridId(ValueError):
    """Grid identifier does not match the accepted patterns."""


class NonAlignedCorner(ValueError):
    """Grid corner coordinate is not a multiple of the cell resolution."""


class OutOfDomain(ValueError):
    """Coordinate falls outside the projection's valid domain."""


class LatitudeOutOfMercatorRange(ValueError):
    """Latitude beyond the Web-Mercator limit of +/-85.0511 degrees."""


# GRS80 ellipsoid and EPSG:3035 projection parameters (read-only, used in tests)
GRS80_A = 6378137.0
GRS80_INV_F = 298.257222101
GRS80_F = 1.0 / GRS80_INV_F
GRS80_E2 = GRS80_F * (2.0 - GRS80_F)
GRS80_E = math.sqrt(GRS80_E2)
LAEA_LAT0_DEG = 52.0
LAEA_LON0_DEG = 10.0
LAEA_FALSE_EASTING = 4_321_000.0
LAEA_FALSE_NORTHING = 3_210_000.0

# EPSG:3035 area of use (Europe), WGS84 degrees
AREA_OF_USE_WEST = -35.58
AREA_OF_USE_EAST = 44.83
AREA_OF_USE_SOUTH = 24.6
AREA_OF_USE_NORTH = 84.73

MERCATOR_LAT_LIMIT = 85.0511
MAX_ZOOM = 22

_INVERSE_TOL_RAD = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class LaeaPoint:
    """EPSG:3035 coordinate in meters."""

    easting: float
    northing: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.easting) and math.isfinite(self.northing)):
            raise ValueError(f"non-finite coordinate: ({self.easting}, {self.northing})")


@dataclass(frozen=True)
class GridCellId:
    """Grid cell addressed by resolution and lower-left EPSG:3035 corner."""

    resolution_m: int
    northing_m: int
    easting_m: int

    def __post_init__(self) -> None:
        if self.resolution_m <= 0:
            raise ValueError(f"resolution must be positive: {self.resolution_m}")
        if self.northing_m % self.resolution_m or self.easting_m % self.resolution_m:
            raise NonAlignedCorner(
                f"corner N{self.northing_m} E{self.easting_m} not aligned "
                f"to {self.resolution_m} m"
            )


@dataclass(frozen=True)
class BoundingBox:
    """WGS84 box; antimeridian-crossing boxes are unsupported."""

    south: float
    west: float
    north: float
    east: float

    def __post_init__(self) -> None:
        if not self.south < self.north:
            raise ValueError(f"south {self.south} must be < north {self.north}")
        if not self.west < self.east:
            raise ValueError(f"west {self.west} must be < east {self.east}")

    def contains(self, p: GeoPoint) -> bool:
        return self.south <= p.lat <= self.north and self.west <= p.lon <= self.east


@dataclass(frozen=True)
class TileCoord:
    """Web-Mercator XYZ tile address."""

    z: int
    x: int
    y: int

    def __post_init__(self) -> None:
        if self.z < 0:
            raise ValueError(f"zoom must be non-negative: {self.z}")
        n = 1 << self.z
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise ValueError(f"tile ({self.x}, {self.y}) out of range for z={self.z}")


_LONG_ID = re.compile(r"^CRS3035RES(\d+)mN(\d+)E(\d+)$")
_SHORT_ID = re.compile(r"^(\d+)mN(\d+)E(\d+)$")
_SHORT_UNIT_M = 100


def parse_grid_id(text: str) -> GridCellId:
    """Parse a grid-cell identifier.

    Accepts the full form ``CRS3035RES{r}mN{n}E{e}`` (meters) and the short
    form ``{r}mN{n'}E{e'}`` with corners in units of 100 m.
    """
    m = _LONG_ID.match(text)
    if m:
        res, northing, easting = (int(g) for g in m.groups())
    else:
        m = _SHORT_ID.match(text)
        if not m:
            raise MalformedGridId(f"unrecognized grid id: {text!r}")
        res = int(m.group(1))
        northing = int(m.group(2)) * _SHORT_UNIT_M
        easting = int(m.group(3)) * _SHORT_UNIT_M
    return GridCellId(resolution_m=res, northing_m=northing, easting_m=easting)


def compose_grid_id(cell: GridCellId) -> str:
    """Render the canonical full-form identifier; inverse of parse_grid_id."""
    return f"CRS3035RES{cell.resolution_m}mN{cell.northing_m}E{cell.easting_m}"


def _authalic_q(sin_lat: float) -> float:
    e = GRS80_E
    es = e * sin_lat
    return (1.0 - GRS80_E2) * (
        sin_lat / (1.0 - GRS80_E2 * sin_lat * sin_lat)
        - (1.0 / (2.0 * e)) * math.log((1.0 - es) / (1.0 + es))
    )


_QP = _authalic_q(1.0)
_LAT0 = math.radians(LAEA_LAT0_DEG)
_LON0 = math.radians(LAEA_LON0_DEG)
_BETA0 = math.asin(_authalic_q(math.sin(_LAT0)) / _QP)
_RQ = GRS80_A * math.sqrt(_QP / 2.0)
_M1 = math.cos(_LAT0) / math.sqrt(1.0 - GRS80_E2 * math.sin(_LAT0) ** 2)
_D = GRS80_A * _M1 / (_RQ * math.cos(_BETA0))


def wgs84_to_laea(p: GeoPoint) -> LaeaPoint:
    """Project a WGS84 point into EPSG:3035 meters."""
    if not (AREA_OF_USE_SOUTH <= p.lat <= AREA_OF_USE_NORTH
            and AREA_OF_USE_WEST <= p.lon <= AREA_OF_USE_EAST):
        raise OutOfDomain(f"({p.lat}, {p.lon}) outside the EPSG:3035 area of use")
    lat = math.radians(p.lat)
    dlon = math.radians(p.lon) - _LON0
    beta = math.asin(_authalic_q(math.sin(lat)) / _QP)
    denom = 1.0 + math.sin(_BETA0) * math.sin(beta) + math.cos(_BETA0) * math.cos(beta) * math.cos(dlon)
    if denom <= 1e-14:
        raise OutOfDomain(f"({p.lat}, {p.lon}) is antipodal to the projection center")
    b = _RQ * math.sqrt(2.0 / denom)
    easting = LAEA_FALSE_EASTING + b * _D * math.cos(beta) * math.sin(dlon)
    northing = LAEA_FALSE_NORTHING + (b / _D) * (
        math.cos(_BETA0) * math.sin(beta)
        - math.sin(_BETA0) * math.cos(beta) * math.cos(dlon)
    )
    return LaeaPoint(easting=easting, northing=northing)


def laea_to_wgs84(p: LaeaPoint) -> GeoPoint:
    """Un-project EPSG:3035 meters back to WGS84 degrees.

    The latitude recovery iterates the authalic relation until the update
    falls below 1e-12 rad.
    """
    x = (p.easting - LAEA_FALSE_EASTING) / _D
    y = (p.northing - LAEA_FALSE_NORTHING) * _D
    rho = math.hypot(x, y)
    if rho == 0.0:
        return GeoPoint(lat=LAEA_LAT0_DEG, lon=LAEA_LON0_DEG)
    s = rho / (2.0 * _RQ)
    if s > 1.0:
        raise OutOfDomain(f"({p.easting}, {p.northing}) outside the projection disc")
    ce = 2.0 * math.asin(s)
    q = _QP * (
        math.cos(ce) * math.sin(_BETA0)
        + (y * math.sin(ce) * math.cos(_BETA0)) / rho
    )
    lon = _LON0 + math.atan2(
        x * math.sin(ce),
        rho * math.cos(_BETA0) * math.cos(ce) - y * math.sin(_BETA0) * math.sin(ce),
    )
    # invert q(lat); q/qp can exceed 1 by float noise at the pole
    ratio = max(-1.0, min(1.0, q / _QP))
    lat = math.asin(ratio)
    e = GRS80_E
    for _ in range(64):
        sin_lat = math.sin(lat)
        es = e * sin_lat
        one = 1.0 - GRS80_E2 * sin_lat * sin_lat
        cos_lat = math.cos(lat)
        if abs(cos_lat) < 1e-15:
            break
        delta = (one * one / (2.0 * cos_lat)) * (
            q / (1.0 - GRS80_E2)
            - sin_lat / one
            + (1.0 / (2.0 * e)) * math.log((1.0 - es) / (1.0 + es))
        )
        lat += delta
        if abs(delta) < _INVERSE_TOL_RAD:
            break
    return GeoPoint(lat=math.degrees(lat), lon=math.degrees(lon))


def grid_to_bbox(cell: GridCellId) -> BoundingBox:
    """WGS84 bounding box of a grid cell (min/max over its four LAEA corners)."""
    r = cell.resolution_m
    corners = [
        laea_to_wgs84(LaeaPoint(easting=cell.easting_m + de, northing=cell.northing_m + dn))
        for de in (0, r)
        for dn in (0, r)
    ]
    lats = [c.lat for c in corners]
    lons = [c.lon for c in corners]
    return BoundingBox(south=min(lats), west=min(lons), north=max(lats), east=max(lons))


def _tile_edge_lat(y: int, n: int) -> float:
    return math.degrees(math.atan(math.sinh(math.pi * (1.0 - 2.0 * y / n))))


def lonlat_to_tile(p: GeoPoint, z: int) -> TileCoord:
    """Web-Mercator XYZ tile containing a point."""
    if abs(p.lat) > MERCATOR_LAT_LIMIT:
        raise LatitudeOutOfMercatorRange(f"latitude {p.lat} beyond +/-{MERCATOR_LAT_LIMIT}")
    if not 0 <= z <= MAX_ZOOM:
        raise ValueError(f"zoom out of range: {z}")
    n = 1 << z
    x = math.floor((p.lon + 180.0) / 360.0 * n)
    lat_rad = math.radians(p.lat)
    y = math.floor((1.0 - math.asinh(math.tan(lat_rad)) / math.pi) / 2.0 * n)
    x = min(max(x, 0), n - 1)
    y = min(max(y, 0), n - 1)
    # sub-ulp rounding in the projection can land a point one tile across an
    # edge; correct against the same edge math tile_to_bbox uses
    for _ in range(2):
        if x > 0 and p.lon < x / n * 360.0 - 180.0:
            x -= 1
        elif x < n - 1 and p.lon > (x + 1) / n * 360.0 - 180.0:
            x += 1
        else:
            break
    for _ in range(2):
        if y > 0 and p.lat > _tile_edge_lat(y, n):
            y -= 1
        elif y < n - 1 and p.lat < _tile_edge_lat(y + 1, n):
            y += 1
        else:
            break
    return TileCoord(z=z, x=x, y=y)


def tile_to_bbox(t: TileCoord) -> BoundingBox:
    """WGS84 bounding box of a tile; contains every point that maps to it."""
    n = 1 << t.z
    west = t.x / n * 360.0 - 180.0
    east = (t.x + 1) / n * 360.0 - 180.0
    return BoundingBox(
        south=_tile_edge_lat(t.y + 1, n),
        west=west,
        north=_tile_edge_lat(t.y, n),
        east=east,
    )
