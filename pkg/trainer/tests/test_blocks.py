"""Coordinate planes, channel attention, and pyramid fusion blocks."""

from __future__ import annotations

import torch

from cohorttrainer.blocks import CoordConv, FpnMerge, SEBlock, coordconv_channels, se_forward


class TestCoordinatePlanes:
    def test_three_by_three_rows(self):
        x, y = coordconv_channels(3, 3)
        assert x[0, 0].tolist() == [-1.0, 0.0, 1.0]
        assert x[0, 1].tolist() == [-1.0, 0.0, 1.0]
        assert y[0, :, 0].tolist() == [-1.0, 0.0, 1.0]

    def test_corners(self):
        x, y = coordconv_channels(5, 7)
        assert (x[0, 0, 0], y[0, 0, 0]) == (-1.0, -1.0)
        assert (x[0, -1, -1], y[0, -1, -1]) == (1.0, 1.0)

    def test_degenerate_height_gives_zero_y_plane(self):
        x, y = coordconv_channels(1, 4)
        assert torch.equal(y, torch.zeros(1, 1, 4))
        assert torch.allclose(
            x[0, 0], torch.tensor([-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0]), atol=1e-6
        )

    def test_planes_depend_only_on_shape(self):
        a = coordconv_channels(6, 9)
        b = coordconv_channels(6, 9)
        assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])

    def test_coordconv_consumes_two_extra_channels(self):
        block = CoordConv(16, 32)
        assert block.conv.in_channels == 18
        out = block(torch.randn(2, 16, 7, 7))
        assert out.shape == (2, 32, 7, 7)


class TestSE:
    def test_zero_weights_scale_exactly_half(self):
        f = torch.randn(3, 8, 5, 5, dtype=torch.float64)
        w1 = torch.zeros(2, 8, dtype=torch.float64)
        w2 = torch.zeros(8, 2, dtype=torch.float64)
        assert torch.equal(se_forward(f, w1, w2), 0.5 * f)

    def test_zero_weight_module_scales_half(self):
        block = SEBlock(16, reduction=16)
        with torch.no_grad():
            for parameter in block.parameters():
                parameter.zero_()
        f = torch.randn(2, 16, 4, 4)
        assert torch.allclose(block(f), 0.5 * f)

    def test_scaling_factors_bounded(self):
        block = SEBlock(256, reduction=16)
        f = torch.rand(2, 256, 7, 7) + 0.5  # strictly positive input
        with torch.no_grad():
            ratio = block(f) / f
        assert float(ratio.min()) > 0.0
        assert float(ratio.max()) < 1.0

    def test_shape_preserved(self):
        block = SEBlock(256, reduction=16)
        f = torch.randn(2, 256, 7, 7)
        assert block(f).shape == f.shape

    def test_reduction_ratio_16(self):
        block = SEBlock(256, reduction=16)
        assert block.fc1.out_features == 16
        assert block.fc2.in_features == 16

    def test_finite_difference_matches_analytic_gradient(self):
        """Directional derivative of sum(SE(f)) against autograd, float64."""
        torch.manual_seed(0)
        block = SEBlock(8, reduction=4).double()
        f = torch.randn(1, 8, 3, 3, dtype=torch.float64, requires_grad=True)
        direction = torch.randn_like(f)
        direction /= direction.norm()

        block(f).sum().backward()
        analytic = float((f.grad * direction).sum())

        eps = 1e-6
        with torch.no_grad():
            plus = block(f + eps * direction).sum()
            minus = block(f - eps * direction).sum()
        numeric = float((plus - minus) / (2 * eps))
        assert abs(numeric - analytic) <= 1e-4 * max(1.0, abs(analytic))


class TestFpnMerge:
    def test_output_resolution_follows_shallow_map(self):
        merge = FpnMerge(96, 128, 64)
        c3 = torch.randn(2, 96, 14, 14)
        c4 = torch.randn(2, 128, 7, 7)
        assert merge(c3, c4).shape == (2, 64, 14, 14)
