"""gaitmm: part-aware spatio-temporal gait recognition.

A silhouette-sequence recognizer built from stacked feature blocks that run
a full-body 3D convolution in parallel with per-part non-shared 3D
convolutions, a learnable multi-scale temporal compressor, set-style
temporal pooling, generalized-mean strip pooling, and per-strip embedding
heads.  Ships with a synthetic walking-figure corpus generator, a
CASIA-B-layout loader, PK-batch metric-learning training, and a cross-view
rank-1 evaluation protocol.
"""

__version__ = "0.1.0"

from .blocks import (BodyMotionExtractor, DepthwiseSeparableConv3d, FFSLBlock,
                     GeMPooling, LocalMotionAggregation,
                     MultiScaleMotionAggregation, PartMotionExtractor,
                     SeparableFC, temporal_pool)
from .config import (ModelConfig, TrainConfig, desk_model_config,
                     desk_train_config, dump_config, load_config, parse_config)
from .errors import (ConfigError, DataError, GaitmmError, NumericError,
                     ShapeError)
from .losses import LossReport, combined_loss, cross_entropy_loss, triplet_loss
from .model import GaitMM, ParameterCount, count_parameters

__all__ = [
    "BodyMotionExtractor", "ConfigError", "DataError",
    "DepthwiseSeparableConv3d", "FFSLBlock", "GaitMM", "GaitmmError",
    "GeMPooling", "LocalMotionAggregation", "LossReport", "ModelConfig",
    "MultiScaleMotionAggregation", "NumericError", "ParameterCount",
    "PartMotionExtractor", "SeparableFC", "ShapeError", "TrainConfig",
    "combined_loss", "count_parameters", "cross_entropy_loss",
    "desk_model_config", "desk_train_config", "dump_config", "load_config",
    "parse_config", "temporal_pool", "triplet_loss",
]
