"""Metric-learning objective: batch-all triplet loss over per-strip
embeddings plus per-strip softmax cross-entropy.

Both losses are computed per strip and averaged over strips, so their
magnitude (and the meaning of the triplet margin) does not depend on the
strip count.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import DataError

# Keeps the distance gradient finite when two embeddings coincide.
_DIST_EPS = 1e-12


@dataclass
class LossReport:
    triplet: float
    cross_entropy: float
    total: float
    nonzero_triplet_fraction: float


def _pairwise_distances(embeddings: torch.Tensor) -> torch.Tensor:
    """(B, E) -> (B, B) Euclidean distances."""
    sq = embeddings.pow(2).sum(dim=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * embeddings @ embeddings.T
    return torch.sqrt(d2.clamp(min=0.0) + _DIST_EPS)


def triplet_loss(embeddings: torch.Tensor, labels: torch.Tensor,
                 margin: float) -> tuple[torch.Tensor, float]:
    """Batch-all triplet loss.

    embeddings: (B, num_strips, embed_dim); labels: (B,) subject ids.
    Per strip, every (anchor, positive, negative) combination with
    label(a) == label(p) != label(n), a != p contributes
    max(0, d(a,p) - d(a,n) + margin); the strip loss is the mean over
    combinations with nonzero loss (0 if none), and strips are averaged.
    Returns (loss, fraction of combinations with nonzero loss).
    """
    if embeddings.ndim != 3:
        raise DataError(f"expected embeddings (B, S, E), got shape "
                        f"{tuple(embeddings.shape)}")
    labels = labels.reshape(-1)
    if labels.shape[0] != embeddings.shape[0]:
        raise DataError("labels and embeddings disagree on batch size")
    same = labels[:, None] == labels[None, :]
    not_self = ~torch.eye(len(labels), dtype=torch.bool,
                          device=labels.device)
    pos_mask = same & not_self                      # valid (a, p)
    neg_mask = ~same                                # valid (a, n)
    triplet_mask = pos_mask[:, :, None] & neg_mask[:, None, :]
    if not triplet_mask.any():
        raise DataError(
            "batch contains no valid triplet: need at least 2 subjects and "
            "2 sequences for some subject")

    num_strips = embeddings.shape[1]
    strip_losses = []
    nonzero = 0
    for s in range(num_strips):
        dist = _pairwise_distances(embeddings[:, s, :])
        hinge = dist[:, :, None] - dist[:, None, :] + margin
        hinge = torch.where(triplet_mask, hinge,
                            torch.zeros((), dtype=hinge.dtype,
                                        device=hinge.device))
        hinge = hinge.clamp(min=0.0)
        active = hinge > 0
        count = int(active.sum())
        nonzero += count
        if count:
            strip_losses.append(hinge.sum() / count)
        else:
            strip_losses.append(hinge.sum())  # exact zero, keeps the graph
    loss = torch.stack(strip_losses).mean()
    total_triplets = int(triplet_mask.sum()) * num_strips
    return loss, nonzero / total_triplets


def cross_entropy_loss(logits: torch.Tensor,
                       labels: torch.Tensor) -> torch.Tensor:
    """Softmax cross-entropy per strip, averaged over strips and batch.

    logits: (B, num_strips, num_classes); labels: (B,) class indices.
    """
    if logits.ndim != 3:
        raise DataError(f"expected logits (B, S, C), got shape "
                        f"{tuple(logits.shape)}")
    labels = labels.reshape(-1)
    num_classes = logits.shape[2]
    if labels.min() < 0 or labels.max() >= num_classes:
        raise DataError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{int(labels.min())}, {int(labels.max())}]")
    batch, num_strips, _ = logits.shape
    flat = logits.reshape(batch * num_strips, num_classes)
    repeated = labels.repeat_interleave(num_strips)
    return F.cross_entropy(flat, repeated)


def combined_loss(embeddings: torch.Tensor, logits: torch.Tensor,
                  labels: torch.Tensor, margin: float,
                  triplet_weight: float = 1.0, ce_weight: float = 1.0,
                  ) -> tuple[torch.Tensor, LossReport]:
    """Weighted sum of the two objectives (unit weights by default).

    Returns the differentiable total plus a float report.
    """
    tri, nonzero_fraction = triplet_loss(embeddings, labels, margin)
    ce = cross_entropy_loss(logits, labels)
    total = triplet_weight * tri + ce_weight * ce
    report = LossReport(
        triplet=tri.detach().item(),
        cross_entropy=ce.detach().item(),
        total=total.detach().item(),
        nonzero_triplet_fraction=float(nonzero_fraction),
    )
    return total, report
