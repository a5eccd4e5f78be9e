"""Building blocks of the gait encoder.

Every 3x3x3 convolution runs with stride 1 / padding 1, so feature maps keep
the (H, W) extent of the input silhouettes end to end; only the frame axis is
compressed (by a factor of 3, inside the motion-aggregation stage).  Part
branches slice the height axis and process each slab with its own weights and
its own zero padding, so no information crosses slab seams.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, ShapeError


class DepthwiseSeparableConv3d(nn.Module):
    """3x3x3 per-channel convolution followed by a 1x1x1 pointwise mixer.

    Parameter count is in_ch*27 + in_ch*out_ch + out_ch: the bias lives on
    the pointwise stage only.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.depthwise = nn.Conv3d(in_channels, in_channels, 3, padding=1,
                                   groups=in_channels, bias=False)
        self.pointwise = nn.Conv3d(in_channels, out_channels, 1, bias=True)

    @property
    def in_channels(self) -> int:
        return self.depthwise.in_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pointwise(self.depthwise(x))


class BodyMotionExtractor(nn.Module):
    """Full-body branch: a single shape-preserving 3x3x3 convolution."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv3d(in_channels, out_channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C_in, D, H, W) -> (B, C_out, D, H, W)"""
        if x.shape[1] != self.conv.in_channels:
            raise ConfigError(
                f"body branch expects {self.conv.in_channels} input channels, "
                f"got {x.shape[1]}")
        return self.conv(x)


class PartMotionExtractor(nn.Module):
    """Part branch: k horizontal slabs, each convolved by its own bank.

    Slabs are zero-padded independently before convolution and the results
    are concatenated top-to-bottom, so perturbing bank j can only affect
    output rows [j*H/k, (j+1)*H/k).
    """

    def __init__(self, in_channels: int, out_channels: int, k_parts: int,
                 depthwise_separable: bool = False):
        super().__init__()
        if k_parts < 1:
            raise ConfigError(f"k_parts must be >= 1, got {k_parts}")
        if depthwise_separable:
            make = lambda: DepthwiseSeparableConv3d(in_channels, out_channels)
        else:
            make = lambda: nn.Conv3d(in_channels, out_channels, 3, padding=1)
        self.banks = nn.ModuleList([make() for _ in range(k_parts)])
        self.k_parts = k_parts
        self.in_channels = in_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C_in, D, H, W) -> (B, C_out, D, H, W)"""
        if x.shape[1] != self.in_channels:
            raise ConfigError(
                f"part branch expects {self.in_channels} input channels, "
                f"got {x.shape[1]}")
        height = x.shape[3]
        if height % self.k_parts:
            raise ConfigError(
                f"height {height} not divisible by k_parts={self.k_parts}")
        slab = height // self.k_parts
        parts = [bank(x[:, :, :, j * slab:(j + 1) * slab, :])
                 for j, bank in enumerate(self.banks)]
        return torch.cat(parts, dim=3)


class FFSLBlock(nn.Module):
    """Full-body and fine-grained sequence learning block.

    The body and part branches are fused by element-wise sum, then a leaky
    rectifier.  With ``use_pme=False`` (ablation) the block reduces to the
    activated body path.  Batch normalization between the sum and the
    rectifier is off by default.
    """

    def __init__(self, in_channels: int, out_channels: int, k_parts: int,
                 use_pme: bool = True, depthwise_separable: bool = False,
                 batch_norm: bool = False, leaky_slope: float = 0.01):
        super().__init__()
        self.bme = BodyMotionExtractor(in_channels, out_channels)
        self.pme = (PartMotionExtractor(in_channels, out_channels, k_parts,
                                        depthwise_separable)
                    if use_pme else None)
        self.norm = nn.BatchNorm3d(out_channels) if batch_norm else None
        self.leaky_slope = leaky_slope

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C_in, D, H, W) -> (B, C_out, D, H, W)"""
        y = self.bme(x)
        if self.pme is not None:
            y = y + self.pme(x)
        if self.norm is not None:
            y = self.norm(y)
        return F.leaky_relu(y, negative_slope=self.leaky_slope)


class LocalMotionAggregation(nn.Module):
    """Learnable temporal compression over non-overlapping 3-frame windows.

    Output frame t mixes the window {3t, 3t+1, 3t+2} as p1*max + p2*avg,
    per channel and pixel.  Both coefficients start at 0.5.
    """

    def __init__(self):
        super().__init__()
        self.p1 = nn.Parameter(torch.tensor(0.5))
        self.p2 = nn.Parameter(torch.tensor(0.5))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, D, H, W) -> (B, C, D/3, H, W)"""
        if x.shape[2] % 3:
            raise ShapeError(
                f"frame count {x.shape[2]} not divisible by the temporal "
                f"window of 3")
        return (self.p1 * F.max_pool3d(x, kernel_size=(3, 1, 1))
                + self.p2 * F.avg_pool3d(x, kernel_size=(3, 1, 1)))


class MultiScaleMotionAggregation(nn.Module):
    """Two parallel temporal-compression branches fused by element-wise sum.

    The global branch applies one body-level aggregation; the part branch
    splits the height axis into l slabs, each compressed by its own
    independently parameterized aggregation, and concatenates them back.
    """

    def __init__(self, l_parts: int):
        super().__init__()
        if l_parts < 1:
            raise ConfigError(f"l_parts must be >= 1, got {l_parts}")
        self.global_lma = LocalMotionAggregation()
        self.part_lmas = nn.ModuleList(
            [LocalMotionAggregation() for _ in range(l_parts)])

    @property
    def l_parts(self) -> int:
        return len(self.part_lmas)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, D, H, W) -> (B, C, D/3, H, W)"""
        height = x.shape[3]
        if height % self.l_parts:
            raise ShapeError(
                f"height {height} not divisible by l_parts={self.l_parts}")
        if x.shape[2] % 3:
            raise ShapeError(
                f"frame count {x.shape[2]} not divisible by the temporal "
                f"window of 3")
        slab = height // self.l_parts
        parts = [lma(x[:, :, :, j * slab:(j + 1) * slab, :])
                 for j, lma in enumerate(self.part_lmas)]
        return self.global_lma(x) + torch.cat(parts, dim=3)


def temporal_pool(x: torch.Tensor) -> torch.Tensor:
    """Collapse the frame axis by element-wise maximum.

    (B, C, D, H, W) -> (B, C, H, W)
    """
    if x.shape[2] < 1:
        raise ShapeError("temporal pooling needs at least one frame")
    return x.amax(dim=2)


class GeMPooling(nn.Module):
    """Per-strip generalized-mean spatial pooling with a learnable exponent.

    The height axis is split into ``num_strips`` bands; each band is reduced
    to one value per channel by the power mean (mean(v^delta))^(1/delta),
    which interpolates between average (delta=1) and max (delta->inf).
    Inputs are clamped to >= eps before exponentiation so the fractional
    power stays differentiable at zero; values are normalized by the band
    max internally to keep large exponents in range.
    """

    def __init__(self, num_strips: int, delta_init: float = 6.5,
                 eps: float = 1e-6):
        super().__init__()
        if num_strips < 1:
            raise ConfigError(f"num_strips must be >= 1, got {num_strips}")
        if delta_init <= 0:
            raise ConfigError(f"GeM exponent must be > 0, got {delta_init}")
        self.num_strips = num_strips
        self.eps = eps
        self.delta = nn.Parameter(torch.tensor(float(delta_init)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) -> (B, num_strips, C)"""
        if self.delta.item() <= 0:
            raise ConfigError(
                f"GeM exponent must stay > 0, got {self.delta.item()}")
        b, c, h, w = x.shape
        if h % self.num_strips:
            raise ConfigError(
                f"height {h} not divisible by num_strips={self.num_strips}")
        band = h // self.num_strips
        v = x.clamp(min=self.eps).view(b, c, self.num_strips, band * w)
        scale = v.amax(dim=3, keepdim=True)
        pooled = ((v / scale) ** self.delta).mean(dim=3, keepdim=True) \
            ** (1.0 / self.delta) * scale
        return pooled.squeeze(3).permute(0, 2, 1)


class SeparableFC(nn.Module):
    """One independent linear map per strip (no weight sharing).

    Weight shape (num_strips, in_features, out_features): perturbing the
    weights of strip s changes only output row s.
    """

    def __init__(self, num_strips: int, in_features: int, out_features: int):
        super().__init__()
        self.num_strips = num_strips
        self.in_features = in_features
        self.out_features = out_features
        bound = in_features ** -0.5
        self.weight = nn.Parameter(
            torch.empty(num_strips, in_features, out_features)
            .uniform_(-bound, bound))
        self.bias = nn.Parameter(
            torch.empty(num_strips, out_features).uniform_(-bound, bound))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, num_strips, in_features) -> (B, num_strips, out_features)"""
        if x.shape[1] != self.num_strips or x.shape[2] != self.in_features:
            raise ConfigError(
                f"expected input (B, {self.num_strips}, {self.in_features}), "
                f"got {tuple(x.shape)}")
        return torch.einsum("bsc,sce->bse", x, self.weight) + self.bias
