"""Sidecar server: classify tile images over line-delimited JSON.

Protocol (one request in flight at a time):

    -> {"protocol": "buildingage/1", "classes": [...]}      handshake, once
    <- {"id": N, "image_path": P}
    -> {"id": N, "probs": [f, f, f, f, f]}

Malformed request lines are protocol violations and terminate the process
with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from . import COHORT_LABELS
from .data import IMAGENET_MEAN, IMAGENET_STD
from .model import ModelSpec, build_model

__all__ = ["PROTOCOL", "load_checkpoint", "serve_sidecar", "main"]

PROTOCOL = "buildingage/1"


def load_checkpoint(path: str | Path) -> torch.nn.Module:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    spec = ModelSpec(**payload["spec"])
    model = build_model(spec)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def _preprocess(image_path: str) -> torch.Tensor:
    image = Image.open(image_path).convert("RGB").resize((224, 224), Image.BILINEAR)
    array = np.asarray(image, dtype=np.float32) / 255.0
    array = (array - IMAGENET_MEAN) / IMAGENET_STD
    return torch.from_numpy(array.astype(np.float32)).permute(2, 0, 1).unsqueeze(0)


@torch.no_grad()
def serve_sidecar(model: torch.nn.Module, stdin=None, stdout=None) -> int:
    """Serve until stdin closes; returns the process exit status."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    stdout.write(json.dumps({"protocol": PROTOCOL, "classes": COHORT_LABELS}) + "\n")
    stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            request_id = request["id"]
            image_path = request["image_path"]
        except (ValueError, KeyError, TypeError) as exc:
            print(f"protocol violation: {exc}: {line!r}", file=sys.stderr)
            return 1
        logits = model(_preprocess(image_path))
        probs = torch.softmax(logits[0], dim=0).tolist()
        stdout.write(json.dumps({"id": request_id, "probs": probs}) + "\n")
        stdout.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="serve a trained checkpoint over the sidecar protocol")
    parser.add_argument("--checkpoint", required=True)
    args = parser.parse_args(argv)
    model = load_checkpoint(args.checkpoint)
    return serve_sidecar(model)


if __name__ == "__main__":
    sys.exit(main())
