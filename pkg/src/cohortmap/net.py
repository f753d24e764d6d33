"""Shared network plumbing: errors, response cache, per-endpoint rate limiting."""

from __future__ import annotations

import hashlib
import os
import threading
import time
from pathlib import Path

__all__ = [
    "NetworkError",
    "RateLimited",
    "MalformedResponse",
    "FixtureCache",
    "TokenBucket",
    "limiter_for",
    "http_timeout",
]


class NetworkError(RuntimeError):
    """Transport-level failure; safe to retry."""

    retryable = True


class RateLimited(NetworkError):
    """Endpoint asked us to back off."""

    def __init__(self, message: str, retry_after: float | None = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class MalformedResponse(ValueError):
    """Response body did not parse as the expected structure."""


def http_timeout(default: float = 25.0) -> float:
    return float(os.environ.get("HTTP_TIMEOUT_SECS", default))


class FixtureCache:
    """Recorded request/response pairs as files named by query hash.

    The response body for a query lives at ``<sha256(query)>.json``; the
    query text itself is kept alongside as ``<hash>.query`` so recordings
    stay auditable.
    """

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    @staticmethod
    def key(query: str) -> str:
        return hashlib.sha256(query.encode("utf-8")).hexdigest()

    def get(self, query: str) -> bytes | None:
        path = self.directory / f"{self.key(query)}.json"
        if not path.exists():
            return None
        return path.read_bytes()

    def put(self, query: str, body: bytes) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        key = self.key(query)
        (self.directory / f"{key}.query").write_text(query, encoding="utf-8")
        (self.directory / f"{key}.json").write_bytes(body)


class TokenBucket:
    """Blocking token bucket; one bucket serializes traffic to one endpoint."""

    def __init__(self, rate_per_sec: float = 1.0, capacity: float = 1.0) -> None:
        self.rate = rate_per_sec
        self.capacity = capacity
        self._tokens = capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


_buckets: dict[str, TokenBucket] = {}
_buckets_lock = threading.Lock()


def limiter_for(endpoint: str, rate_per_sec: float = 1.0) -> TokenBucket:
    """Shared bucket per endpoint URL."""
    with _buckets_lock:
        bucket = _buckets.get(endpoint)
        if bucket is None:
            bucket = _buckets[endpoint] = TokenBucket(rate_per_sec=rate_per_sec)
        return bucket
