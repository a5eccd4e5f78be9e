"""Model and training configuration.

Configs are plain dataclasses with defaults matching the reference recipe
(k = l = 8 parts, GeM exponent 6.5, triplet margin 0.2, PK batch 8x8,
30-frame clips, Adam at 1e-4 decayed to 1e-5 after 70K of 80K iterations).
They round-trip through a flat, sectioned INI file so a resolved dump can be
re-parsed into an equivalent config.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass

from .errors import ConfigError

PME_MODES = ("standard", "depthwise_separable")


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``stage_channels`` gives the output width of each stacked FFSL block;
    the temporal-compression stage (MSMA) sits after ``msma_after_block``
    blocks.  ``input_downsample`` average-pools the silhouettes spatially
    before the first block (CPU-friendly desk preset; 1 = off).  Heights are
    validated post-downsample against every horizontal split in the model.
    """

    in_channels: int = 1
    num_ffsl_blocks: int = 3
    stage_channels: tuple[int, ...] = (32, 64, 128)
    k_parts: int = 8
    l_parts: int = 8
    msma_after_block: int = 2
    pme_mode: str = "standard"
    num_strips: int = 16
    embed_dim: int = 256
    num_classes: int = 74
    use_pme: bool = True
    use_msma: bool = True
    use_batch_norm: bool = False
    input_height: int = 64
    input_width: int = 44
    input_downsample: int = 1
    gem_delta_init: float = 6.5
    gem_eps: float = 1e-6
    leaky_slope: float = 0.01

    def feature_height(self) -> int:
        return self.input_height // self.input_downsample

    def validate(self) -> None:
        """Raise ConfigError listing every violated invariant."""
        problems = []
        if self.num_ffsl_blocks < 2:
            problems.append("num_ffsl_blocks must be >= 2 (the temporal "
                            "compression stage sits strictly inside the stack)")
        if len(self.stage_channels) != self.num_ffsl_blocks:
            problems.append(
                f"stage_channels has {len(self.stage_channels)} entries, "
                f"expected num_ffsl_blocks={self.num_ffsl_blocks}")
        if self.use_msma and not (1 <= self.msma_after_block < self.num_ffsl_blocks):
            problems.append(
                f"msma_after_block={self.msma_after_block} must satisfy "
                f"1 <= msma_after_block < num_ffsl_blocks={self.num_ffsl_blocks}")
        if self.pme_mode not in PME_MODES:
            problems.append(f"pme_mode={self.pme_mode!r} not in {PME_MODES}")
        for name in ("in_channels", "k_parts", "l_parts", "num_strips",
                     "embed_dim", "num_classes", "input_height", "input_width",
                     "input_downsample"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be a positive integer")
        if any(c < 1 for c in self.stage_channels):
            problems.append("stage_channels must all be positive")
        if self.input_downsample >= 1:
            if self.input_height % self.input_downsample:
                problems.append(
                    f"input_height={self.input_height} not divisible by "
                    f"input_downsample={self.input_downsample}")
            if self.input_width % self.input_downsample:
                problems.append(
                    f"input_width={self.input_width} not divisible by "
                    f"input_downsample={self.input_downsample}")
            h = self.input_height // self.input_downsample
            if self.k_parts >= 1 and h % self.k_parts:
                problems.append(
                    f"feature height {h} not divisible by k_parts={self.k_parts}")
            if self.l_parts >= 1 and self.use_msma and h % self.l_parts:
                problems.append(
                    f"feature height {h} not divisible by l_parts={self.l_parts}")
            if self.num_strips >= 1 and h % self.num_strips:
                problems.append(
                    f"feature height {h} not divisible by num_strips={self.num_strips}")
        if self.gem_delta_init <= 0:
            problems.append(f"gem_delta_init={self.gem_delta_init} must be > 0")
        if self.gem_eps <= 0:
            problems.append("gem_eps must be > 0")
        if problems:
            raise ConfigError("invalid model config: " + "; ".join(problems))


@dataclass
class TrainConfig:
    """Optimization schedule and batch composition.

    ``batch_p`` subjects x ``batch_k`` clips of ``frames_per_clip`` ordered
    frames per training batch.  The learning rate is ``base_lr`` until
    iteration ``decay_at`` and ``decayed_lr`` from there on.
    """

    iterations: int = 80000
    base_lr: float = 1e-4
    decay_at: int = 70000
    decayed_lr: float = 1e-5
    margin: float = 0.2
    batch_p: int = 8
    batch_k: int = 8
    frames_per_clip: int = 30
    seed: int = 0
    checkpoint_every: int = 10000
    weight_decay: float = 0.0
    grad_clip: float = 0.0
    triplet_weight: float = 1.0
    ce_weight: float = 1.0
    min_train_frames: int = 15

    def validate(self) -> None:
        problems = []
        if self.iterations < 0:
            problems.append("iterations must be >= 0")
        if self.base_lr <= 0 or self.decayed_lr <= 0:
            problems.append("learning rates must be > 0")
        # decay_at >= iterations is allowed: the decay simply never fires
        # within the budget (short runs keep the long-run schedule intact)
        if self.decay_at < 0:
            problems.append("decay_at must be >= 0")
        if self.margin < 0:
            problems.append("margin must be >= 0")
        if self.batch_p < 2 or self.batch_k < 2:
            problems.append("batch_p and batch_k must both be >= 2 "
                            "(the triplet loss needs positives and negatives)")
        if self.frames_per_clip < 1:
            problems.append("frames_per_clip must be >= 1")
        if self.checkpoint_every < 0:
            problems.append("checkpoint_every must be >= 0 (0 disables "
                            "periodic checkpoints)")
        if self.min_train_frames < 1:
            problems.append("min_train_frames must be >= 1")
        if problems:
            raise ConfigError("invalid train config: " + "; ".join(problems))


def desk_model_config(**overrides) -> ModelConfig:
    """Small-footprint preset for CPU-scale experiments and CI."""
    base = dict(
        stage_channels=(8, 16, 32),
        embed_dim=128,
        input_downsample=2,
    )
    base.update(overrides)
    return ModelConfig(**base)


def desk_train_config(**overrides) -> TrainConfig:
    """Desk-scale schedule: short budget, small PK batch, short clips."""
    base = dict(
        iterations=2000,
        decay_at=1500,
        base_lr=3e-4,
        decayed_lr=3e-5,
        batch_p=4,
        batch_k=4,
        frames_per_clip=15,
        checkpoint_every=500,
    )
    base.update(overrides)
    return TrainConfig(**base)


# --- INI (de)serialization --------------------------------------------------

_SECTIONS = {"model": ModelConfig, "train": TrainConfig}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(text: str, target_type, key: str):
    text = text.strip()
    try:
        if target_type is bool or target_type == "bool":
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is str:
            return text
        # tuple[int, ...]
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def _field_types(cls) -> dict:
    types = {}
    for f in dataclasses.fields(cls):
        if f.type in ("int", int):
            types[f.name] = int
        elif f.type in ("float", float):
            types[f.name] = float
        elif f.type in ("bool", bool):
            types[f.name] = bool
        elif f.type in ("str", str):
            types[f.name] = str
        else:
            types[f.name] = tuple
    return types


def dump_config(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    """Render both configs as a sectioned key=value document."""
    parser = configparser.ConfigParser()
    for section, cfg in (("model", model_cfg), ("train", train_cfg)):
        parser[section] = {
            f.name: _format_value(getattr(cfg, f.name))
            for f in dataclasses.fields(cfg)
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse_config(text: str) -> tuple[ModelConfig, TrainConfig]:
    """Parse an INI document; unknown keys are configuration errors."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    configs = {}
    for section, cls in _SECTIONS.items():
        kwargs = {}
        types = _field_types(cls)
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in types:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                kwargs[key] = _parse_value(raw, types[key], key)
        configs[section] = cls(**kwargs)
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")
    return configs["model"], configs["train"]


def load_config(path) -> tuple[ModelConfig, TrainConfig]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config(text)


def model_config_from_dict(data: dict) -> ModelConfig:
    """Rebuild a ModelConfig from an asdict() snapshot (checkpoints)."""
    kwargs = dict(data)
    if "stage_channels" in kwargs:
        kwargs["stage_channels"] = tuple(kwargs["stage_channels"])
    try:
        return ModelConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad model config snapshot: {exc}") from None


def train_config_from_dict(data: dict) -> TrainConfig:
    try:
        return TrainConfig(**dict(data))
    except TypeError as exc:
        raise ConfigError(f"bad train config snapshot: {exc}") from None
