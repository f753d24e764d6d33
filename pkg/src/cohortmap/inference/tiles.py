"""Satellite tile retrieval with replayable on-disk caching."""

from __future__ import annotations

import logging
from pathlib import Path

import requests

from ..net import NetworkError, http_timeout
from ..geodesy import GeoPoint, TileCoord, lonlat_to_tile

__all__ = ["TileFetcher", "fetch_tile_for_point"]

log = logging.getLogger(__name__)


class TileFetcher:
    """Fetches XYZ tiles from a ``{z}/{x}/{y}`` URL template or a local cache."""

    def __init__(
        self,
        url_template: str | None = None,
        cache_dir: str | Path | None = None,
        offline: bool = False,
        timeout: float | None = None,
    ) -> None:
        if url_template is None and cache_dir is None:
            raise ValueError("need a URL template or a cache directory")
        self.url_template = url_template
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.offline = offline
        self.timeout = timeout if timeout is not None else http_timeout()

    def _cache_path(self, t: TileCoord) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{t.z}_{t.x}_{t.y}.png"

    def fetch(self, t: TileCoord) -> bytes:
        path = self._cache_path(t)
        if path is not None and path.exists():
            return path.read_bytes()
        if self.offline or self.url_template is None:
            raise NetworkError(f"offline and no cached tile for z={t.z} x={t.x} y={t.y}")
        url = self.url_template.format(z=t.z, x=t.x, y=t.y)
        try:
            resp = requests.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise NetworkError(f"tile request failed: {exc}") from exc
        if resp.status_code != 200:
            raise NetworkError(f"HTTP {resp.status_code} for tile {url}")
        body = resp.content
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(body)
        return body


def fetch_tile_for_point(
    point: GeoPoint, zoom: int, fetcher: TileFetcher, stitch: bool = False
) -> bytes:
    """Tile bytes covering a point; optionally a 3x3 neighborhood stitch.

    Stitching guards against footprints that straddle tile borders and
    requires pillow.
    """
    center = lonlat_to_tile(point, zoom)
    if not stitch:
        return fetcher.fetch(center)

    from io import BytesIO

    from PIL import Image

    n = 1 << zoom
    tiles: dict[tuple[int, int], bytes] = {}
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            x = (center.x + dx) % n
            y = min(max(center.y + dy, 0), n - 1)
            tiles[(dx, dy)] = fetcher.fetch(TileCoord(z=zoom, x=x, y=y))

    first = Image.open(BytesIO(tiles[(0, 0)]))
    w, h = first.size
    canvas = Image.new("RGB", (3 * w, 3 * h))
    for (dx, dy), body in tiles.items():
        canvas.paste(Image.open(BytesIO(body)).convert("RGB"), ((dx + 1) * w, (dy + 1) * h))
    out = BytesIO()
    canvas.save(out, format="PNG")
    return out.getvalue()
