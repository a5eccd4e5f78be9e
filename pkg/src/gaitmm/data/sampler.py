"""PK batch sampling for metric-learning training.

Each batch holds P distinct subjects with K clips each; a clip is a random
contiguous window of D ordered frames from one sequence, wrapping cyclically
when the sequence is shorter than D.  Frame order is never shuffled: the
temporal structure is the signal.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError


def sample_clip(frames: np.ndarray, clip_len: int, rng) -> np.ndarray:
    """Contiguous window of `clip_len` frames; cyclic wrap for short input."""
    total = frames.shape[0]
    if total == 0:
        raise DataError("cannot sample a clip from an empty sequence")
    if total >= clip_len:
        start = int(rng.integers(0, total - clip_len + 1))
        return frames[start:start + clip_len]
    start = int(rng.integers(0, total))
    idx = (start + np.arange(clip_len)) % total
    return frames[idx]


def sample_training_batch(pool, p_subjects: int, k_clips: int, clip_len: int,
                          rng, label_map=None):
    """Draw one PK batch from a sequence pool.

    Returns (clips, labels): clips float32 (P*K, 1, D, H, W) in [0, 1],
    labels int64 (P*K,).  Labels come from `label_map` (subject_id ->
    class index) or default to the rank of the subject id within the pool.
    """
    by_subject = {}
    for seq in pool:
        by_subject.setdefault(seq.subject_id, []).append(seq)
    subjects = sorted(by_subject)
    if len(subjects) < p_subjects:
        raise DataError(
            f"batch needs {p_subjects} distinct subjects, pool has "
            f"{len(subjects)}")
    if label_map is None:
        label_map = {sid: i for i, sid in enumerate(subjects)}

    chosen = rng.choice(len(subjects), size=p_subjects, replace=False)
    clips = []
    labels = []
    for subj_pos in chosen:
        subject_id = subjects[int(subj_pos)]
        seqs = by_subject[subject_id]
        replace = len(seqs) < k_clips
        picks = rng.choice(len(seqs), size=k_clips, replace=replace)
        for pick in picks:
            seq = seqs[int(pick)]
            window = sample_clip(seq.frames, clip_len, rng)
            clips.append(window.astype(np.float32) / 255.0)
            labels.append(label_map[subject_id])
    batch = np.stack(clips, axis=0)[:, np.newaxis]     # (P*K, 1, D, H, W)
    return batch, np.asarray(labels, dtype=np.int64)


class TrainingSampler:
    """Stateful PK sampler with a private rng stream (checkpointable)."""

    def __init__(self, pool, p_subjects: int, k_clips: int, clip_len: int,
                 seed: int = 0):
        self.pool = list(pool)
        if not self.pool:
            raise DataError("training pool is empty")
        self.p_subjects = p_subjects
        self.k_clips = k_clips
        self.clip_len = clip_len
        subjects = sorted({seq.subject_id for seq in self.pool})
        if len(subjects) < p_subjects:
            raise DataError(
                f"batch needs {p_subjects} distinct subjects, pool has "
                f"{len(subjects)}")
        self.label_map = {sid: i for i, sid in enumerate(subjects)}
        self.num_classes = len(subjects)
        self.rng = np.random.default_rng(np.random.SeedSequence([0xBA7C, seed]))

    def next_batch(self):
        return sample_training_batch(self.pool, self.p_subjects,
                                     self.k_clips, self.clip_len, self.rng,
                                     self.label_map)

    def state_dict(self) -> dict:
        return {"bit_generator": self.rng.bit_generator.state}

    def load_state_dict(self, state: dict):
        self.rng.bit_generator.state = state["bit_generator"]
