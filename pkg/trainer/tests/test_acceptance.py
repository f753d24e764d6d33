"""Trainer acceptance gate: shape/flow, training-config, sidecar conformance.

Run with ``pytest tests/test_acceptance.py -s`` for one PASS line per
criterion.
"""

from __future__ import annotations

import json
import math
import subprocess
import sys
from dataclasses import asdict

import numpy as np
import pytest
import torch
from PIL import Image

from cohorttrainer import COHORT_LABELS
from cohorttrainer.blocks import coordconv_channels, se_forward, SEBlock
from cohorttrainer.data import TileDataset
from cohorttrainer.model import BACKBONES, ModelSpec, build_model, count_parameters
from cohorttrainer.train import TrainConfig, run_training

RESULTS: list[str] = []


def record(name: str) -> None:
    RESULTS.append(name)
    print(f"ACCEPTANCE {name}: PASS")


VARIANT_KWARGS = [
    dict(),
    dict(use_fpn=True),
    dict(use_fpn=True, use_coordconv=True),
    dict(use_fpn=True, use_coordconv=True, use_se=True),
]


def test_model_shape_and_flow_suite():
    # logits (B, 5) and CoordConv channel arithmetic
    full = build_model(
        ModelSpec(backbone="SimpleCNN", use_fpn=True, use_coordconv=True, use_se=True)
    )
    assert full(torch.zeros(2, 3, 224, 224)).shape == (2, 5)
    assert full.coordconv.conv.in_channels == full.spec.fpn_channels + 2

    # zero-weight SE scales by exactly 0.5
    f = torch.randn(2, 8, 4, 4, dtype=torch.float64)
    zeros1 = torch.zeros(2, 8, dtype=torch.float64)
    zeros2 = torch.zeros(8, 2, dtype=torch.float64)
    assert torch.equal(se_forward(f, zeros1, zeros2), 0.5 * f)

    # gradient flow: trainable parts all receive nonzero gradients
    loss = torch.nn.functional.cross_entropy(
        full(torch.randn(4, 3, 224, 224)), torch.tensor([0, 1, 2, 3])
    )
    loss.backward()
    for name, parameter in full.named_parameters():
        if name.startswith("backbone."):
            assert parameter.grad is None
        else:
            assert parameter.grad is not None and float(parameter.grad.abs().max()) > 0.0, name

    # SE finite-difference check
    torch.manual_seed(0)
    block = SEBlock(8, reduction=4).double()
    x = torch.randn(1, 8, 3, 3, dtype=torch.float64, requires_grad=True)
    direction = torch.randn_like(x)
    direction /= direction.norm()
    block(x).sum().backward()
    analytic = float((x.grad * direction).sum())
    eps = 1e-6
    with torch.no_grad():
        numeric = float((block(x + eps * direction).sum() - block(x - eps * direction).sum()) / (2 * eps))
    assert abs(numeric - analytic) <= 1e-4 * max(1.0, abs(analytic))

    # parameter-count ordering for every backbone
    for backbone in BACKBONES:
        counts = [
            count_parameters(build_model(ModelSpec(backbone=backbone, **kw)))
            for kw in VARIANT_KWARGS
        ]
        assert counts == sorted(counts) and len(set(counts)) == 4, backbone

    # coordinate planes depend only on the shape
    a = coordconv_channels(7, 9)
    b = coordconv_channels(7, 9)
    assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])
    record("model-shape-and-flow")


def test_training_config_suite(synthetic_city):
    # uniform-prediction smoothed CE identity
    loss_fn = torch.nn.CrossEntropyLoss(label_smoothing=0.05)
    loss = float(loss_fn(torch.zeros(5, 5), torch.arange(5)))
    assert abs(loss - math.log(5)) <= 1e-6

    # cosine endpoints
    spec = ModelSpec(backbone="SimpleCNN", backbone_frozen=False)
    dataset = TileDataset(synthetic_city["records"], train=False)
    result = run_training(spec, TrainConfig(epochs=3, batch_size=16), dataset, np.arange(20))
    assert result.lr_history[0] == pytest.approx(3e-4, rel=1e-12)
    assert result.final_lr == pytest.approx(0.0, abs=1e-12)

    # 2-epoch smoke decrease in >= 4 of 5 seeded repeats
    decreased = 0
    for seed in range(5):
        run = run_training(
            spec, TrainConfig(epochs=2, batch_size=16, seed=seed), dataset, np.arange(60)
        )
        if run.epoch_losses[1] < run.epoch_losses[0]:
            decreased += 1
    assert decreased >= 4, f"{decreased}/5"
    record("training-config")


def test_sidecar_conformance(tmp_path):
    torch.manual_seed(0)
    spec = ModelSpec(backbone="SimpleCNN")
    model = build_model(spec)
    checkpoint = tmp_path / "model.pt"
    torch.save({"spec": asdict(spec), "state_dict": model.state_dict()}, checkpoint)
    tile = tmp_path / "tile.png"
    Image.fromarray(
        np.random.default_rng(1).integers(0, 255, size=(64, 64, 3), dtype=np.uint8)
    ).save(tile)

    proc = subprocess.Popen(
        [sys.executable, "-m", "cohorttrainer.sidecar", "--checkpoint", str(checkpoint)],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    try:
        handshake = json.loads(proc.stdout.readline())
        assert handshake["protocol"] == "buildingage/1"
        assert handshake["classes"] == COHORT_LABELS
        for request_id in (0, 7):
            proc.stdin.write(json.dumps({"id": request_id, "image_path": str(tile)}) + "\n")
            proc.stdin.flush()
            reply = json.loads(proc.stdout.readline())
            assert reply["id"] == request_id
            assert len(reply["probs"]) == 5
            assert abs(sum(reply["probs"]) - 1.0) <= 1e-6
    finally:
        proc.stdin.close()
        proc.wait(timeout=30)
    record("sidecar-conformance")


def test_zzz_print_summary():
    print("\n--- trainer acceptance summary ---")
    for name in RESULTS:
        print(f"  {name}: PASS")
    assert len(RESULTS) == 3
