"""Silhouette alignment: raw binary frames -> fixed-size aligned crops.

Each frame is cropped to the vertical extent of its foreground, rescaled to
the target height with aspect ratio preserved, then horizontally centred on
the foreground centroid and cut (or zero-padded) to the target width.  This
mirrors the usual gait-silhouette normalisation, so loaders for real
datasets and the synthetic corpus share one code path.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from ..errors import DataError

ALIGNED_HEIGHT = 64
ALIGNED_WIDTH = 44


def align_frame(frame: np.ndarray, out_height: int = ALIGNED_HEIGHT,
                out_width: int = ALIGNED_WIDTH):
    """Align one raw frame.  Returns float32 (out_height, out_width) in
    [0, 1], or None when the frame has no foreground."""
    if frame.ndim != 2:
        raise DataError(f"expected a 2-d frame, got shape {frame.shape}")
    if np.issubdtype(frame.dtype, np.floating):
        frame = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    fg = frame > 0
    rows = np.flatnonzero(fg.any(axis=1))
    if rows.size == 0:
        return None
    top, bottom = int(rows[0]), int(rows[-1]) + 1
    crop = np.ascontiguousarray(frame[top:bottom])

    scale = out_height / crop.shape[0]
    new_w = max(1, int(round(crop.shape[1] * scale)))
    img = Image.fromarray(crop, mode="L").resize(
        (new_w, out_height), resample=Image.BILINEAR)
    resized = np.asarray(img, dtype=np.float32) / 255.0

    weights = resized.sum()
    if weights <= 0.0:
        return None
    xs = np.arange(new_w, dtype=np.float32)
    centroid = float((resized.sum(axis=0) * xs).sum() / weights)
    left = int(round(centroid)) - out_width // 2

    out = np.zeros((out_height, out_width), dtype=np.float32)
    src_lo = max(0, left)
    src_hi = min(new_w, left + out_width)
    if src_lo < src_hi:
        out[:, src_lo - left:src_hi - left] = resized[:, src_lo:src_hi]
    return out


def align_and_crop(frames: np.ndarray, out_height: int = ALIGNED_HEIGHT,
                   out_width: int = ALIGNED_WIDTH):
    """Align a sequence (F, H, W) -> (kept, dropped_count).

    Frames with no foreground are dropped.  Raises DataError when nothing
    survives, since an all-empty sequence cannot be aligned.
    """
    if frames.ndim != 3:
        raise DataError(f"expected (frames, height, width), got {frames.shape}")
    kept = []
    dropped = 0
    for frame in frames:
        aligned = align_frame(frame, out_height, out_width)
        if aligned is None:
            dropped += 1
        else:
            kept.append(aligned)
    if not kept:
        raise DataError(
            f"all {len(frames)} frames were empty after alignment")
    return np.stack(kept, axis=0), dropped
