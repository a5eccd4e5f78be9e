"""Data pipeline: synthetic walker, alignment, corpus I/O, splits, sampling."""

from .corpus import (CASIA_SEQ_PROFILE, CASIA_VIEWS, CONDITIONS, GaitDataset,
                     LoadReport, SilhouetteSequence, load_dataset,
                     write_synthetic_corpus)
from .preprocess import ALIGNED_HEIGHT, ALIGNED_WIDTH, align_and_crop, align_frame
from .protocols import (CASIA_B_VIEWS, OUMVLP_VIEWS, PROTOCOL_NAMES,
                        SplitProtocol, casia_b_lt, get_protocol, oumvlp,
                        synth_split)
from .sampler import TrainingSampler, sample_clip, sample_training_batch
from .walker import RAW_HEIGHT, RAW_WIDTH, WalkerSpec, render_frame, render_sequence

__all__ = [
    "ALIGNED_HEIGHT", "ALIGNED_WIDTH", "CASIA_B_VIEWS", "CASIA_SEQ_PROFILE",
    "CASIA_VIEWS", "CONDITIONS", "GaitDataset", "LoadReport", "OUMVLP_VIEWS",
    "PROTOCOL_NAMES", "RAW_HEIGHT", "RAW_WIDTH", "SilhouetteSequence",
    "SplitProtocol", "TrainingSampler", "WalkerSpec", "align_and_crop",
    "align_frame", "casia_b_lt", "get_protocol", "load_dataset", "oumvlp",
    "render_frame", "render_sequence", "sample_clip", "sample_training_batch",
    "synth_split", "write_synthetic_corpus",
]
