"""Silhouette corpus I/O: CASIA-B directory layout, reader and synth writer.

Layout: ``root/<subject:03d>/<cond>-<seq:02d>/<view:03d>/<frame:04d>.png``
with 8-bit grayscale PNGs, foreground > 127.  The synthetic writer emits the
same layout plus a plain-text ``index.txt`` manifest (one line per sequence:
subject, condition, view, seq, num_frames), so the loader treats synthetic
and real corpora identically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError
from .preprocess import align_and_crop
from .walker import WalkerSpec, render_sequence

CONDITIONS = ("nm", "bg", "cl")
# CASIA-B sequence budget per subject and view: 6 normal walks, 2 with a
# bag, 2 with a coat.  The synthetic writer defaults to the same profile.
CASIA_SEQ_PROFILE = {"nm": 6, "bg": 2, "cl": 2}
CASIA_VIEWS = tuple(range(0, 181, 18))

_COND_SEQ_RE = re.compile(r"^([a-z]{2})-(\d{2})$")


@dataclass
class SilhouetteSequence:
    """One aligned gait sequence: frames are (F, 64, 44) uint8 in 0..255."""

    subject_id: int
    condition: str
    seq_index: int
    view_deg: int
    frames: np.ndarray

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def key(self):
        return (self.subject_id, self.condition, self.seq_index, self.view_deg)

    def frames_float(self) -> np.ndarray:
        """Frames as float32 in [0, 1], the model's input scale."""
        return self.frames.astype(np.float32) / 255.0


@dataclass
class LoadReport:
    """Counters for non-fatal problems met while loading a corpus."""

    malformed_entries: int = 0
    dropped_frames: int = 0
    skipped_sequences: int = 0
    messages: list = field(default_factory=list)

    def note(self, message: str):
        self.messages.append(message)


class GaitDataset:
    """An indexed, fully-loaded collection of aligned sequences."""

    def __init__(self, sequences, report: LoadReport | None = None):
        self.sequences = list(sequences)
        self.report = report if report is not None else LoadReport()

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def subjects(self):
        return sorted({seq.subject_id for seq in self.sequences})

    def filter(self, predicate) -> "GaitDataset":
        return GaitDataset([s for s in self.sequences if predicate(s)],
                           self.report)

    def training_pool(self, protocol, min_frames: int = 15):
        """Train-subject sequences long enough to sample from."""
        return [s for s in self.sequences
                if s.subject_id in protocol.train_subjects
                and s.num_frames >= min_frames]

    def gallery_pool(self, protocol):
        return [s for s in self.sequences
                if s.subject_id in protocol.test_subjects
                and protocol.gallery_selector(s.condition, s.seq_index)]

    def probe_pool(self, protocol):
        return [s for s in self.sequences
                if s.subject_id in protocol.test_subjects
                and protocol.probe_selector(s.condition, s.seq_index)]


# ---------------------------------------------------------------------------
# Writer
# ---------------------------------------------------------------------------

def _sequence_phase_seed(corpus_seed: int, subject: int, condition: str,
                         seq_index: int) -> int:
    # one phase per (subject, condition, seq): all views of a sequence show
    # the same walk captured simultaneously, as multi-camera rigs do
    cond_code = CONDITIONS.index(condition)
    ss = np.random.SeedSequence([corpus_seed, subject, cond_code, seq_index])
    return int(ss.generate_state(1)[0])


def write_synthetic_corpus(out_dir, num_subjects: int = 8,
                           views=CASIA_VIEWS,
                           seqs_per_condition=None,
                           frames_per_seq: int = 36,
                           seed: int = 0) -> int:
    """Render a synthetic corpus in CASIA-B layout.  Returns the number of
    sequence directories written.

    `seqs_per_condition` is either None (CASIA-B profile: nm 6, bg 2, cl 2),
    an int applied to every condition, or a {condition: count} mapping.
    Deterministic: same arguments and seed give byte-identical trees.
    """
    if seqs_per_condition is None:
        profile = dict(CASIA_SEQ_PROFILE)
    elif isinstance(seqs_per_condition, int):
        profile = {cond: seqs_per_condition for cond in CONDITIONS}
    else:
        profile = dict(seqs_per_condition)

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    index_lines = []
    written = 0
    for subject in range(1, num_subjects + 1):
        base_spec = WalkerSpec.from_seed(seed * 100003 + subject)
        for condition in CONDITIONS:
            spec = base_spec.with_condition(condition)
            for seq_index in range(1, profile.get(condition, 0) + 1):
                phase_seed = _sequence_phase_seed(seed, subject, condition,
                                                  seq_index)
                for view in views:
                    frames = render_sequence(spec, float(view),
                                             frames_per_seq, phase_seed)
                    seq_dir = root / f"{subject:03d}" / \
                        f"{condition}-{seq_index:02d}" / f"{int(view):03d}"
                    seq_dir.mkdir(parents=True, exist_ok=True)
                    for t in range(frames.shape[0]):
                        Image.fromarray(frames[t], mode="L").save(
                            seq_dir / f"{t + 1:04d}.png")
                    index_lines.append(
                        f"{subject:03d} {condition} {int(view):03d} "
                        f"{seq_index:02d} {frames_per_seq}")
                    written += 1
    (root / "index.txt").write_text("\n".join(index_lines) + ("\n" if index_lines else ""))
    return written


# ---------------------------------------------------------------------------
# Loader
# ---------------------------------------------------------------------------

def _read_frame(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def load_dataset(root_path, protocol=None, min_frames: int = 15) -> GaitDataset:
    """Load every sequence under a CASIA-B-layout root.

    Sequences are aligned to 64x44 at load time.  When a protocol is given,
    only subjects in its train/test sets are kept.  Malformed directory
    entries and empty frames are skipped and counted in the returned
    dataset's report; `min_frames` is not applied here (training pools
    apply it) so short sequences stay available for evaluation.
    """
    del min_frames  # filtering happens in GaitDataset.training_pool
    root = Path(root_path)
    if not root.is_dir():
        raise DataError(f"dataset root does not exist: {root}")

    allowed = None
    if protocol is not None:
        allowed = set(protocol.train_subjects) | set(protocol.test_subjects)

    report = LoadReport()
    sequences = []
    for subject_dir in sorted(root.iterdir()):
        if not subject_dir.is_dir():
            continue
        if not subject_dir.name.isdigit():
            report.malformed_entries += 1
            report.note(f"not a subject directory: {subject_dir.name}")
            continue
        subject_id = int(subject_dir.name)
        if allowed is not None and subject_id not in allowed:
            continue
        for cond_dir in sorted(subject_dir.iterdir()):
            if not cond_dir.is_dir():
                report.malformed_entries += 1
                report.note(f"stray file: {cond_dir}")
                continue
            match = _COND_SEQ_RE.match(cond_dir.name)
            if match is None or match.group(1) not in CONDITIONS:
                report.malformed_entries += 1
                report.note(f"unrecognized condition dir: {cond_dir}")
                continue
            condition, seq_index = match.group(1), int(match.group(2))
            for view_dir in sorted(cond_dir.iterdir()):
                if not view_dir.is_dir() or not view_dir.name.isdigit():
                    report.malformed_entries += 1
                    report.note(f"unrecognized view dir: {view_dir}")
                    continue
                view_deg = int(view_dir.name)
                frame_paths = sorted(view_dir.glob("*.png"))
                if not frame_paths:
                    report.skipped_sequences += 1
                    report.note(f"no frames: {view_dir}")
                    continue
                raw = np.stack([_read_frame(p) for p in frame_paths], axis=0)
                try:
                    aligned, dropped = align_and_crop(raw)
                except DataError:
                    report.skipped_sequences += 1
                    report.note(f"all frames empty: {view_dir}")
                    continue
                report.dropped_frames += dropped
                frames_u8 = np.round(aligned * 255.0).astype(np.uint8)
                sequences.append(SilhouetteSequence(
                    subject_id=subject_id, condition=condition,
                    seq_index=seq_index, view_deg=view_deg,
                    frames=frames_u8))
    return GaitDataset(sequences, report)
