"""Train/test split protocols and gallery/probe selection rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import ConfigError

CASIA_B_VIEWS = tuple(range(0, 181, 18))                 # 11 views
OUMVLP_VIEWS = tuple(range(0, 91, 15)) + tuple(range(180, 271, 15))  # 14

CASIA_B_TRAIN_COUNT = 74

PROTOCOL_NAMES = ("casia_b_lt", "oumvlp", "synth")


@dataclass(frozen=True)
class SplitProtocol:
    """Who trains, who tests, and which sequences act as gallery/probe.

    Selectors take (condition, seq_index) and return bool.  `views` lists
    the camera views the evaluation grid requires.
    """

    name: str
    train_subjects: frozenset
    test_subjects: frozenset
    views: tuple
    gallery_selector: Callable[[str, int], bool] = field(repr=False)
    probe_selector: Callable[[str, int], bool] = field(repr=False)

    def __post_init__(self):
        overlap = set(self.train_subjects) & set(self.test_subjects)
        if overlap:
            raise ConfigError(
                f"protocol {self.name}: train/test subjects overlap: "
                f"{sorted(overlap)[:5]}")


def _casia_gallery(condition: str, seq_index: int) -> bool:
    return condition == "nm" and 1 <= seq_index <= 4


def _casia_probe(condition: str, seq_index: int) -> bool:
    if condition == "nm":
        return seq_index in (5, 6)
    return seq_index in (1, 2)      # bg-01/02, cl-01/02


def casia_b_lt(subject_ids) -> SplitProtocol:
    """Large-sample training split: first 74 subjects train, rest test.
    Gallery nm-01..04; probes nm-05..06, bg-01..02, cl-01..02."""
    ids = sorted(set(subject_ids))
    if len(ids) <= CASIA_B_TRAIN_COUNT:
        raise ConfigError(
            f"casia_b_lt needs more than {CASIA_B_TRAIN_COUNT} subjects, "
            f"corpus has {len(ids)}")
    return SplitProtocol(
        name="casia_b_lt",
        train_subjects=frozenset(ids[:CASIA_B_TRAIN_COUNT]),
        test_subjects=frozenset(ids[CASIA_B_TRAIN_COUNT:]),
        views=CASIA_B_VIEWS,
        gallery_selector=_casia_gallery,
        probe_selector=_casia_probe)


def oumvlp(subject_ids) -> SplitProtocol:
    """14-view protocol: half the subjects train; per test subject the
    second sequence (index 1) is the gallery and the first (index 0) the
    probe, regardless of condition tag."""
    ids = sorted(set(subject_ids))
    if len(ids) < 2:
        raise ConfigError(f"oumvlp needs at least 2 subjects, got {len(ids)}")
    # floor split: 10307 ids -> 5153 train / 5154 test
    half = len(ids) // 2
    return SplitProtocol(
        name="oumvlp",
        train_subjects=frozenset(ids[:half]),
        test_subjects=frozenset(ids[half:]),
        views=OUMVLP_VIEWS,
        gallery_selector=lambda cond, seq: seq == 1,
        probe_selector=lambda cond, seq: seq == 0)


def synth_split(subject_ids, views=CASIA_B_VIEWS) -> SplitProtocol:
    """Desk-scale split for synthetic corpora: first half of the subjects
    train, second half test, CASIA-style gallery/probe rules."""
    ids = sorted(set(subject_ids))
    if len(ids) < 2:
        raise ConfigError(f"synth needs at least 2 subjects, got {len(ids)}")
    half = len(ids) // 2
    return SplitProtocol(
        name="synth",
        train_subjects=frozenset(ids[:half]),
        test_subjects=frozenset(ids[half:]),
        views=tuple(views),
        gallery_selector=_casia_gallery,
        probe_selector=_casia_probe)


def get_protocol(name: str, subject_ids, views=None) -> SplitProtocol:
    key = name.lower().replace("-", "_")
    if key == "casia_b_lt":
        return casia_b_lt(subject_ids)
    if key == "oumvlp":
        return oumvlp(subject_ids)
    if key == "synth":
        return synth_split(subject_ids, views or CASIA_B_VIEWS)
    raise ConfigError(
        f"unknown protocol {name!r}; expected one of {PROTOCOL_NAMES}")
