"""Sidecar protocol conformance for the served classifier."""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from cohorttrainer import COHORT_LABELS
from cohorttrainer.model import ModelSpec, build_model
from cohorttrainer.sidecar import PROTOCOL, load_checkpoint


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory) -> Path:
    torch.manual_seed(0)
    spec = ModelSpec(backbone="SimpleCNN")
    model = build_model(spec)
    path = tmp_path_factory.mktemp("ckpt") / "model.pt"
    torch.save({"spec": asdict(spec), "state_dict": model.state_dict()}, path)
    return path


@pytest.fixture(scope="module")
def tile_image(tmp_path_factory) -> Path:
    rng = np.random.default_rng(5)
    path = tmp_path_factory.mktemp("tiles") / "tile.png"
    Image.fromarray(rng.integers(0, 255, size=(64, 64, 3), dtype=np.uint8)).save(path)
    return path


def spawn(checkpoint: Path) -> subprocess.Popen:
    return subprocess.Popen(
        [sys.executable, "-m", "cohorttrainer.sidecar", "--checkpoint", str(checkpoint)],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )


class TestProtocolConformance:
    def test_handshake_first_with_canonical_classes(self, checkpoint):
        proc = spawn(checkpoint)
        try:
            handshake = json.loads(proc.stdout.readline())
            assert handshake == {"protocol": PROTOCOL, "classes": COHORT_LABELS}
        finally:
            proc.stdin.close()
            proc.wait(timeout=30)

    def test_id_echo_and_normalized_probs(self, checkpoint, tile_image):
        proc = spawn(checkpoint)
        try:
            proc.stdout.readline()  # handshake
            for request_id in (0, 7, 3):
                proc.stdin.write(json.dumps({"id": request_id, "image_path": str(tile_image)}) + "\n")
                proc.stdin.flush()
                reply = json.loads(proc.stdout.readline())
                assert reply["id"] == request_id
                assert len(reply["probs"]) == 5
                assert abs(sum(reply["probs"]) - 1.0) <= 1e-6
                assert all(0.0 <= p <= 1.0 for p in reply["probs"])
        finally:
            proc.stdin.close()
            proc.wait(timeout=30)

    def test_malformed_request_exits_nonzero(self, checkpoint):
        proc = spawn(checkpoint)
        proc.stdout.readline()  # handshake
        proc.stdin.write("this is not json\n")
        proc.stdin.flush()
        proc.stdin.close()
        assert proc.wait(timeout=30) != 0

    def test_clean_shutdown_on_eof(self, checkpoint):
        proc = spawn(checkpoint)
        proc.stdout.readline()
        proc.stdin.close()
        assert proc.wait(timeout=30) == 0

    def test_deterministic_probabilities(self, checkpoint, tile_image):
        replies = []
        for _ in range(2):
            proc = spawn(checkpoint)
            try:
                proc.stdout.readline()
                proc.stdin.write(json.dumps({"id": 0, "image_path": str(tile_image)}) + "\n")
                proc.stdin.flush()
                replies.append(json.loads(proc.stdout.readline())["probs"])
            finally:
                proc.stdin.close()
                proc.wait(timeout=30)
        assert replies[0] == replies[1]


class TestCheckpointRoundtrip:
    def test_load_checkpoint_restores_weights(self, checkpoint):
        model = load_checkpoint(checkpoint)
        again = load_checkpoint(checkpoint)
        for a, b in zip(model.parameters(), again.parameters()):
            assert torch.equal(a, b)
