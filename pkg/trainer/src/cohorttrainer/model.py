"""Classifier assembly: backbone feature taps + optional FPN/CoordConv/SE + head.

Variants stack in a fixed order (FPN, then CoordConv on the fused map, then
SE), so parameter counts increase structurally from the baseline through the
full model for every backbone.  Baselines route the deepest feature map
through a 1x1 neck to the same width the FPN produces, keeping the head
identical across variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from . import NUM_CLASSES
from .blocks import CoordConv, FpnMerge, SEBlock

__all__ = ["ModelSpec", "InvalidSpec", "BuildingAgeClassifier", "build_model", "BACKBONES", "count_parameters"]

BACKBONES = ("ConvNeXt", "ResNet50", "MobileNetV3", "EfficientNetB0", "SimpleCNN")


class InvalidSpec(ValueError):
    """Model specification violates the stacking rules."""


@dataclass(frozen=True)
class ModelSpec:
    backbone: str = "ConvNeXt"
    use_fpn: bool = False
    use_coordconv: bool = False
    use_se: bool = False
    fpn_channels: int = 256
    num_classes: int = NUM_CLASSES
    pretrained: bool = False
    backbone_frozen: bool = True

    def __post_init__(self) -> None:
        if self.backbone not in BACKBONES:
            raise InvalidSpec(f"unknown backbone {self.backbone!r}")
        if self.use_coordconv and not self.use_fpn:
            raise InvalidSpec("CoordConv stacks on the FPN map; enable use_fpn")
        if self.use_se and not self.use_coordconv:
            raise InvalidSpec("SE stacks on the CoordConv map; enable use_coordconv")
        if self.fpn_channels < 1:
            raise InvalidSpec("fpn_channels must be positive")

    @property
    def variant_name(self) -> str:
        if not self.use_fpn:
            return "baseline"
        name = "+FPN"
        if self.use_coordconv:
            name += "+CoordConv"
        if self.use_se:
            name += "+SE"
        return name


class _SimpleCNN(nn.Module):
    """Small from-scratch convnet with two tap points (stride 16 and 32)."""

    def __init__(self) -> None:
        super().__init__()

        def block(cin: int, cout: int) -> nn.Sequential:
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, stride=2, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            )

        self.stem = block(3, 16)
        self.stage1 = block(16, 32)
        self.stage2 = block(32, 64)
        self.stage3 = block(64, 96)
        self.stage4 = block(96, 128)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = self.stage2(self.stage1(self.stem(x)))
        c3 = self.stage3(x)
        c4 = self.stage4(c3)
        return c3, c4


class _TorchvisionTaps(nn.Module):
    """Wraps a torchvision feature stack, emitting the last two stage maps."""

    def __init__(self, features: nn.Module, split_at: int) -> None:
        super().__init__()
        children = list(features.children())
        self.shallow = nn.Sequential(*children[:split_at])
        self.deep = nn.Sequential(*children[split_at:])

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        c3 = self.shallow(x)
        c4 = self.deep(c3)
        return c3, c4


class _ResNetTaps(nn.Module):
    def __init__(self, resnet: nn.Module) -> None:
        super().__init__()
        self.stem = nn.Sequential(
            resnet.conv1, resnet.bn1, resnet.relu, resnet.maxpool,
            resnet.layer1, resnet.layer2, resnet.layer3,
        )
        self.layer4 = resnet.layer4

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        c3 = self.stem(x)
        c4 = self.layer4(c3)
        return c3, c4


def _make_backbone(spec: ModelSpec) -> nn.Module:
    from torchvision import models

    weights = "DEFAULT" if spec.pretrained else None
    if spec.backbone == "SimpleCNN":
        return _SimpleCNN()
    if spec.backbone == "ResNet50":
        return _ResNetTaps(models.resnet50(weights=weights))
    if spec.backbone == "ConvNeXt":
        # features[0..5] end stage 3 (stride 16); [6..7] are stage 4
        return _TorchvisionTaps(models.convnext_tiny(weights=weights).features, split_at=6)
    if spec.backbone == "MobileNetV3":
        # features[0..12] end the 14x14 stage; [13..16] run at stride 32
        return _TorchvisionTaps(models.mobilenet_v3_large(weights=weights).features, split_at=13)
    if spec.backbone == "EfficientNetB0":
        # features[0..5] end the 14x14 stage; [6..8] run at stride 32
        return _TorchvisionTaps(models.efficientnet_b0(weights=weights).features, split_at=6)
    raise InvalidSpec(f"unknown backbone {spec.backbone!r}")


class BuildingAgeClassifier(nn.Module):
    """Backbone taps -> (neck | FPN) -> optional CoordConv -> optional SE -> head."""

    def __init__(self, spec: ModelSpec) -> None:
        super().__init__()
        self.spec = spec
        self.backbone = _make_backbone(spec)

        with torch.no_grad():
            c3, c4 = self.backbone(torch.zeros(1, 3, 224, 224))
        c3_channels, c4_channels = c3.shape[1], c4.shape[1]

        width = spec.fpn_channels
        if spec.use_fpn:
            self.fpn = FpnMerge(c3_channels, c4_channels, width)
            self.neck = None
        else:
            self.fpn = None
            self.neck = nn.Conv2d(c4_channels, width, 1)
        self.coordconv = CoordConv(width, width) if spec.use_coordconv else None
        self.se = SEBlock(width, reduction=16) if spec.use_se else None
        self.head = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(width, 128),
            nn.ReLU(inplace=True),
            nn.Linear(128, spec.num_classes),
        )

        if spec.backbone_frozen:
            for parameter in self.backbone.parameters():
                parameter.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        c3, c4 = self.backbone(x)
        f = self.fpn(c3, c4) if self.fpn is not None else self.neck(c4)
        if self.coordconv is not None:
            f = self.coordconv(f)
        if self.se is not None:
            f = self.se(f)
        return self.head(f)

    def trainable_parameters(self):
        return (p for p in self.parameters() if p.requires_grad)


def build_model(spec: ModelSpec) -> BuildingAgeClassifier:
    return BuildingAgeClassifier(spec)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
