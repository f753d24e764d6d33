"""Classifier backends: uniform baseline, hash-keyed stub, sidecar process.

The sidecar protocol is line-delimited JSON over the child's standard
streams.  The sidecar emits one handshake line at startup::

    {"protocol": "buildingage/1", "classes": ["pre-1919", ..., "post-2000"]}

then answers ``{"id": N, "image_path": P}`` requests with
``{"id": N, "probs": [f, f, f, f, f]}``.  A response id that does not match
the request id is a protocol error.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import tempfile
import threading
from pathlib import Path
from typing import Protocol, Sequence

from ..records import COHORT_LABELS

__all__ = [
    "BackendUnavailable",
    "InvalidProbabilityVector",
    "ClassifierBackend",
    "UniformBackend",
    "StubBackend",
    "SidecarBackend",
    "SIDECAR_PROTOCOL",
]

SIDECAR_PROTOCOL = "buildingage/1"


class BackendUnavailable(RuntimeError):
    """Backend cannot serve predictions (missing key, dead process, protocol error)."""


class InvalidProbabilityVector(ValueError):
    """Backend reply is not a usable 5-class probability vector."""


class ClassifierBackend(Protocol):
    def probs_for(self, tile: bytes) -> Sequence[float]:
        """Raw class probabilities for one tile image."""


class UniformBackend:
    """Maximum-entropy baseline; useful as a no-model placeholder."""

    def probs_for(self, tile: bytes) -> Sequence[float]:
        return [0.2, 0.2, 0.2, 0.2, 0.2]


class StubBackend:
    """Fixed table keyed by tile content hash, for tests and golden runs."""

    def __init__(
        self,
        table: dict[str, Sequence[float]],
        default: Sequence[float] | None = None,
    ) -> None:
        self.table = dict(table)
        self.default = default

    @classmethod
    def from_json(cls, path: str | Path) -> "StubBackend":
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        return cls(table=payload.get("table", {}), default=payload.get("default"))

    @staticmethod
    def key(tile: bytes) -> str:
        return hashlib.sha256(tile).hexdigest()

    def probs_for(self, tile: bytes) -> Sequence[float]:
        key = self.key(tile)
        row = self.table.get(key, self.default)
        if row is None:
            raise BackendUnavailable(f"stub table has no row for tile hash {key}")
        return row


class SidecarBackend:
    """External classifier process speaking the sidecar protocol.

    Requests are serialized through a lock: the protocol allows one
    in-flight request per channel.
    """

    def __init__(self, cmd: Sequence[str], cwd: str | None = None, startup_timeout: float = 30.0) -> None:
        self.cmd = list(cmd)
        self.cwd = cwd
        self.startup_timeout = startup_timeout
        self._proc: subprocess.Popen | None = None
        self._next_id = 0
        self._lock = threading.Lock()

    def start(self) -> None:
        """Spawn the process and validate its handshake line."""
        if self._proc is not None:
            return
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                cwd=self.cwd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot spawn sidecar {self.cmd!r}: {exc}") from exc
        line = self._proc.stdout.readline()
        if not line:
            raise BackendUnavailable("sidecar exited before the handshake")
        try:
            handshake = json.loads(line)
        except ValueError as exc:
            raise BackendUnavailable(f"sidecar handshake is not JSON: {line!r}") from exc
        if handshake.get("protocol") != SIDECAR_PROTOCOL:
            raise BackendUnavailable(f"unexpected protocol: {handshake.get('protocol')!r}")
        if handshake.get("classes") != COHORT_LABELS:
            raise BackendUnavailable(f"unexpected class list: {handshake.get('classes')!r}")

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=10)
            if self._proc.stdout:
                self._proc.stdout.close()
            self._proc = None

    def __enter__(self) -> "SidecarBackend":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def probs_for(self, tile: bytes) -> Sequence[float]:
        with self._lock:
            self.start()
            assert self._proc is not None
            with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as f:
                f.write(tile)
                image_path = f.name
            try:
                request_id = self._next_id
                self._next_id += 1
                request = json.dumps({"id": request_id, "image_path": image_path})
                try:
                    self._proc.stdin.write(request + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, ValueError) as exc:
                    raise BackendUnavailable(f"sidecar pipe closed: {exc}") from exc
                line = self._proc.stdout.readline()
                if not line:
                    raise BackendUnavailable("sidecar closed its stdout")
                try:
                    reply = json.loads(line)
                except ValueError as exc:
                    raise BackendUnavailable(f"sidecar reply is not JSON: {line!r}") from exc
                if reply.get("id") != request_id:
                    raise BackendUnavailable(
                        f"protocol error: reply id {reply.get('id')!r} for request {request_id}"
                    )
                return reply.get("probs", [])
            finally:
                Path(image_path).unlink(missing_ok=True)
