"""Cross-view rank-1 evaluation: embedding extraction, per-strip distances,
gallery/probe matching with identical-view exclusion, and CSV reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigError, DataError
from .model import GaitMM


@dataclass
class GaitEmbedding:
    """Per-strip embedding of one sequence: strips is (num_strips, embed_dim)."""

    subject_id: int
    view_deg: int
    condition: str
    seq_index: int
    strips: np.ndarray


def extract_embedding(seq, model: GaitMM):
    """Embed one aligned sequence; returns None for too-short sequences.

    Models with temporal aggregation need the frame count divisible by 3,
    so the sequence is truncated to the largest usable multiple; anything
    shorter than 3 frames cannot be embedded.
    """
    frames = seq.frames_float()
    total = frames.shape[0]
    if model.cfg.use_msma:
        usable = total - (total % 3)
        if usable < 3:
            return None
        frames = frames[:usable]
    elif total < 1:
        return None
    model.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(frames))[None, None]
        embeddings, _ = model(x)
    return GaitEmbedding(subject_id=seq.subject_id, view_deg=seq.view_deg,
                         condition=seq.condition, seq_index=seq.seq_index,
                         strips=embeddings[0].numpy())


def extract_embeddings(sequences, model: GaitMM, log=None):
    """Embed a collection; returns (embeddings, skipped_count)."""
    out = []
    skipped = 0
    for i, seq in enumerate(sequences):
        emb = extract_embedding(seq, model)
        if emb is None:
            skipped += 1
            continue
        out.append(emb)
        if log is not None and (i + 1) % 50 == 0:
            log(f"embedded {i + 1}/{len(sequences)} sequences")
    return out, skipped


def pairwise_distance(a: GaitEmbedding, b: GaitEmbedding) -> float:
    """Mean over strips of the per-strip Euclidean distance."""
    if a.strips.shape != b.strips.shape:
        raise ConfigError(
            f"strip shape mismatch: {a.strips.shape} vs {b.strips.shape}")
    diff = a.strips.astype(np.float64) - b.strips.astype(np.float64)
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def distance_matrix(probes, gallery) -> np.ndarray:
    """(num_probes, num_gallery) matrix of pairwise_distance values."""
    p = np.stack([e.strips for e in probes]).astype(np.float64)
    g = np.stack([e.strips for e in gallery]).astype(np.float64)
    if p.shape[1:] != g.shape[1:]:
        raise ConfigError(
            f"strip shape mismatch: {p.shape[1:]} vs {g.shape[1:]}")
    # (P, G, S): squared Euclidean per strip via the norm expansion
    p_sq = (p * p).sum(axis=2)                        # (P, S)
    g_sq = (g * g).sum(axis=2)                        # (G, S)
    cross = np.einsum("pse,gse->pgs", p, g)
    sq = p_sq[:, None, :] + g_sq[None, :, :] - 2.0 * cross
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq).mean(axis=2)


# ---------------------------------------------------------------------------
# Rank-1 protocol
# ---------------------------------------------------------------------------

@dataclass
class RankOneReport:
    """Per condition: probe_view x gallery_view rank-1 matrix.  Means always
    exclude the identical-view diagonal."""

    views: tuple
    conditions: tuple
    matrices: dict

    def _off_diagonal(self, matrix: np.ndarray) -> np.ndarray:
        n = matrix.shape[0]
        mask = ~np.eye(n, dtype=bool)
        return matrix[mask]

    def row_mean(self, condition: str, row: int) -> float:
        matrix = self.matrices[condition]
        cols = [j for j in range(matrix.shape[1]) if j != row]
        return float(matrix[row, cols].mean())

    def condition_mean(self, condition: str) -> float:
        return float(self._off_diagonal(self.matrices[condition]).mean())

    def overall_mean(self) -> float:
        if not self.conditions:
            raise DataError("empty report has no mean")
        return float(np.mean([self.condition_mean(c) for c in self.conditions]))


def rank1_matrix(gallery, probes, protocol) -> RankOneReport:
    """Score probes against per-view galleries.

    A probe is correct when its nearest gallery embedding within one gallery
    view shares its subject id.  Cell (i, j) is the accuracy of probes from
    view i against gallery view j; identical-view cells are computed but
    never enter any mean.
    """
    views = tuple(protocol.views)
    view_pos = {v: i for i, v in enumerate(views)}

    gallery_by_view = {v: [] for v in views}
    for emb in gallery:
        if emb.view_deg in view_pos:
            gallery_by_view[emb.view_deg].append(emb)
    missing = [v for v in views if not gallery_by_view[v]]
    if missing:
        raise DataError(
            "empty gallery for required view(s): "
            + ", ".join(f"{v:03d}" for v in missing))

    probe_groups = {}
    for emb in probes:
        if emb.view_deg not in view_pos:
            continue
        probe_groups.setdefault((emb.condition, emb.view_deg), []).append(emb)

    conditions = tuple(sorted({cond for cond, _ in probe_groups}))
    n = len(views)
    matrices = {cond: np.zeros((n, n), dtype=np.float64) for cond in conditions}
    for cond in conditions:
        for i, pv in enumerate(views):
            group = probe_groups.get((cond, pv), [])
            if not group:
                raise DataError(
                    f"no {cond} probes for required view {pv:03d}")
            labels = np.asarray([e.subject_id for e in group])
            for j, gv in enumerate(views):
                bank = gallery_by_view[gv]
                dists = distance_matrix(group, bank)
                nearest = dists.argmin(axis=1)
                gallery_labels = np.asarray([e.subject_id for e in bank])
                correct = gallery_labels[nearest] == labels
                matrices[cond][i, j] = correct.mean()
    return RankOneReport(views=views, conditions=conditions, matrices=matrices)


# ---------------------------------------------------------------------------
# Reports and embedding cache
# ---------------------------------------------------------------------------

def emit_report(report: RankOneReport, out_dir) -> list:
    """Write one CSV per condition plus a summary CSV; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create report dir {out}: {exc}") from None
    paths = []
    header = "probe_view," + ",".join(str(v) for v in report.views) + ",mean"
    for cond in report.conditions:
        path = out / f"rank1_{cond}.csv"
        matrix = report.matrices[cond]
        lines = [header]
        for i, pv in enumerate(report.views):
            cells = ",".join(f"{matrix[i, j]:.6f}" for j in range(len(report.views)))
            lines.append(f"{pv},{cells},{report.row_mean(cond, i):.6f}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(path)
    summary = out / "rank1_summary.csv"
    lines = ["condition,mean"]
    for cond in report.conditions:
        lines.append(f"{cond},{report.condition_mean(cond):.6f}")
    if report.conditions:
        lines.append(f"overall,{report.overall_mean():.6f}")
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths.append(summary)
    return paths


def save_embeddings(path, embeddings) -> Path:
    """Cache embeddings as an npz so scoring can rerun without the model."""
    path = Path(path)
    np.savez_compressed(
        path,
        subject_ids=np.asarray([e.subject_id for e in embeddings], dtype=np.int64),
        view_degs=np.asarray([e.view_deg for e in embeddings], dtype=np.int64),
        conditions=np.asarray([e.condition for e in embeddings], dtype="U4"),
        seq_indices=np.asarray([e.seq_index for e in embeddings], dtype=np.int64),
        strips=np.stack([e.strips for e in embeddings]) if embeddings
        else np.zeros((0, 0, 0), dtype=np.float32))
    return path


def load_embeddings(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embeddings cache not found: {path}")
    with np.load(path) as data:
        return [GaitEmbedding(subject_id=int(data["subject_ids"][i]),
                              view_deg=int(data["view_degs"][i]),
                              condition=str(data["conditions"][i]),
                              seq_index=int(data["seq_indices"][i]),
                              strips=data["strips"][i])
                for i in range(data["subject_ids"].shape[0])]
