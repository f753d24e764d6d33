from __future__ import annotations

import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def overpass_fixture_dir() -> Path:
    return FIXTURES / "overpass"


@pytest.fixture(scope="session")
def tiles_fixture_dir() -> Path:
    return FIXTURES / "tiles"


@pytest.fixture(autouse=True)
def _clean_connector_env(monkeypatch):
    """Keep connector configuration deterministic regardless of the host env."""
    for var in (
        "OVERPASS_URL",
        "ANNOTATOR_URL",
        "HTTP_TIMEOUT_SECS",
        "CACHE_DIR",
        "TILE_URL",
        "GEOCODER_URL",
        "GEOCODER_FIXTURE",
    ):
        monkeypatch.delenv(var, raising=False)
