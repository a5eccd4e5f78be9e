"""The gait encoder: stacked FFSL blocks with one temporal-compression stage,
then temporal pooling, per-strip GeM pooling, and per-strip linear heads.

forward() maps a silhouette clip batch (B, C, D, H, W) to per-strip
embeddings (B, num_strips, embed_dim) and per-strip classifier logits
(B, num_strips, num_classes).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .blocks import (FFSLBlock, GeMPooling, MultiScaleMotionAggregation,
                     SeparableFC, temporal_pool)
from .config import ModelConfig
from .errors import GaitmmError, ShapeError


class GaitMM(nn.Module):
    """Multi-granularity motion encoder for silhouette sequences."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        blocks = []
        in_ch = cfg.in_channels
        for out_ch in cfg.stage_channels:
            blocks.append(FFSLBlock(
                in_ch, out_ch, cfg.k_parts,
                use_pme=cfg.use_pme,
                depthwise_separable=(cfg.pme_mode == "depthwise_separable"),
                batch_norm=cfg.use_batch_norm,
                leaky_slope=cfg.leaky_slope))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.msma = (MultiScaleMotionAggregation(cfg.l_parts)
                     if cfg.use_msma else None)
        self.gem = GeMPooling(cfg.num_strips, cfg.gem_delta_init, cfg.gem_eps)
        self.sefc = SeparableFC(cfg.num_strips, cfg.stage_channels[-1],
                                cfg.embed_dim)
        self.classifier = SeparableFC(cfg.num_strips, cfg.embed_dim,
                                      cfg.num_classes)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, C, D, H, W) -> embeddings (B, S, E), logits (B, S, classes)"""
        cfg = self.cfg
        if x.ndim != 5:
            raise ShapeError(f"expected a 5D clip batch, got shape "
                             f"{tuple(x.shape)}")
        if cfg.use_msma and x.shape[2] % 3:
            raise ShapeError(
                f"frame count {x.shape[2]} not divisible by 3 (required by "
                f"the temporal compression stage)")
        if cfg.input_downsample > 1:
            ds = cfg.input_downsample
            x = F.avg_pool3d(x, kernel_size=(1, ds, ds))
        for index, block in enumerate(self.blocks):
            try:
                x = block(x)
                if self.msma is not None and index + 1 == cfg.msma_after_block:
                    x = self.msma(x)
            except GaitmmError as exc:
                raise type(exc)(f"block {index + 1}: {exc}") from None
        strips = self.gem(temporal_pool(x))
        embeddings = self.sefc(strips)
        logits = self.classifier(embeddings)
        return embeddings, logits


@dataclass
class ParameterCount:
    total: int
    per_module: dict[str, int]


def count_parameters(model: GaitMM) -> ParameterCount:
    """Exact learnable-scalar count with a per-module breakdown."""
    per_module: dict[str, int] = {}
    for index, block in enumerate(model.blocks, start=1):
        per_module[f"block{index}.bme"] = sum(
            p.numel() for p in block.bme.parameters())
        if block.pme is not None:
            per_module[f"block{index}.pme"] = sum(
                p.numel() for p in block.pme.parameters())
        if block.norm is not None:
            per_module[f"block{index}.norm"] = sum(
                p.numel() for p in block.norm.parameters())
    if model.msma is not None:
        per_module["msma"] = sum(p.numel() for p in model.msma.parameters())
    per_module["gem"] = sum(p.numel() for p in model.gem.parameters())
    per_module["sefc"] = sum(p.numel() for p in model.sefc.parameters())
    per_module["classifier"] = sum(
        p.numel() for p in model.classifier.parameters())
    total = sum(p.numel() for p in model.parameters())
    assert total == sum(per_module.values())
    return ParameterCount(total=total, per_module=per_module)
