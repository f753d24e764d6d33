"""Feature blocks: coordinate channels, channel attention, pyramid fusion."""

from __future__ import annotations

import torch
from torch import nn

__all__ = ["coordconv_channels", "CoordConv", "SEBlock", "se_forward", "FpnMerge"]


def coordconv_channels(h: int, w: int, dtype=torch.float32, device=None) -> tuple[torch.Tensor, torch.Tensor]:
    """Normalized coordinate planes X (varies along width) and Y (along height).

    Each plane is (1, H, W), running linearly from -1 at index 0 to +1 at the
    last index; a degenerate dimension of size 1 yields an all-zero plane.
    """
    if h < 1 or w < 1:
        raise ValueError(f"invalid plane size ({h}, {w})")
    xs = torch.linspace(-1.0, 1.0, w, dtype=dtype, device=device) if w > 1 else torch.zeros(1, dtype=dtype, device=device)
    ys = torch.linspace(-1.0, 1.0, h, dtype=dtype, device=device) if h > 1 else torch.zeros(1, dtype=dtype, device=device)
    x_plane = xs.view(1, 1, w).expand(1, h, w)
    y_plane = ys.view(1, h, 1).expand(1, h, w)
    return x_plane, y_plane


class CoordConv(nn.Module):
    """Convolution over the feature map concatenated with its X/Y planes."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3) -> None:
        super().__init__()
        self.conv = nn.Conv2d(
            in_channels + 2, out_channels, kernel_size, padding=kernel_size // 2
        )

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        b, _, h, w = f.shape
        x_plane, y_plane = coordconv_channels(h, w, dtype=f.dtype, device=f.device)
        planes = torch.cat([x_plane, y_plane], dim=0).unsqueeze(0).expand(b, -1, -1, -1)
        return self.conv(torch.cat([f, planes], dim=1))


class SEBlock(nn.Module):
    """Squeeze-and-excitation: scale channels by gated global-pool statistics."""

    def __init__(self, channels: int, reduction: int = 16) -> None:
        super().__init__()
        hidden = max(1, channels // reduction)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        squeezed = f.mean(dim=(2, 3))
        scale = torch.sigmoid(self.fc2(torch.relu(self.fc1(squeezed))))
        return f * scale.unsqueeze(-1).unsqueeze(-1)


def se_forward(f: torch.Tensor, w1: torch.Tensor, w2: torch.Tensor) -> torch.Tensor:
    """Functional SE with explicit weight matrices (no biases), for checks."""
    squeezed = f.mean(dim=(2, 3))
    hidden = torch.relu(squeezed @ w1.t())
    scale = torch.sigmoid(hidden @ w2.t())
    return f * scale.unsqueeze(-1).unsqueeze(-1)


class FpnMerge(nn.Module):
    """Two-level pyramid fusion: lateral 1x1 convs, upsample deep, sum, 3x3 merge."""

    def __init__(self, c3_channels: int, c4_channels: int, out_channels: int) -> None:
        super().__init__()
        self.lateral3 = nn.Conv2d(c3_channels, out_channels, 1)
        self.lateral4 = nn.Conv2d(c4_channels, out_channels, 1)
        self.merge = nn.Conv2d(out_channels, out_channels, 3, padding=1)

    def forward(self, c3: torch.Tensor, c4: torch.Tensor) -> torch.Tensor:
        deep = self.lateral4(c4)
        deep = nn.functional.interpolate(deep, size=c3.shape[-2:], mode="nearest")
        return self.merge(self.lateral3(c3) + deep)
