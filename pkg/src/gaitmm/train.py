"""Training engine: loss-driven optimization loop with step LR decay,
periodic atomic checkpoints, resume, and the 4-row ablation matrix runner.
"""

from __future__ import annotations

import csv
import dataclasses
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .config import (ModelConfig, TrainConfig, model_config_from_dict,
                     train_config_from_dict)
from .data.sampler import TrainingSampler
from .errors import ConfigError, DataError, NumericError
from .losses import LossReport, combined_loss
from .model import GaitMM

CHECKPOINT_SCHEMA = "gaitmm-checkpoint-v1"
LOSS_CSV_HEADER = ("iter", "triplet", "ce", "total", "nonzero_frac", "lr")

# The four ablation rows: body-only, body+part, body+temporal, full model.
ABLATION_ROWS = (
    ("bme", {"use_pme": False, "use_msma": False}),
    ("bme_pme", {"use_pme": True, "use_msma": False}),
    ("bme_msma", {"use_pme": False, "use_msma": True}),
    ("full", {"use_pme": True, "use_msma": True}),
)


def lr_schedule(iteration: int, cfg: TrainConfig) -> float:
    """Flat base rate, dropped once: base before decay_at, decayed at/after."""
    return cfg.base_lr if iteration < cfg.decay_at else cfg.decayed_lr


def build_optimizer(model: GaitMM, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.base_lr,
                            betas=(0.9, 0.999), eps=1e-8,
                            weight_decay=cfg.weight_decay)


def _first_nonfinite(named_tensors) -> str | None:
    for name, tensor in named_tensors:
        if tensor is not None and not torch.isfinite(tensor).all():
            return name
    return None


def train_step(model: GaitMM, optimizer: torch.optim.Optimizer,
               batch: np.ndarray, labels: np.ndarray, lr: float,
               cfg: TrainConfig) -> LossReport:
    """One optimization step.  Raises NumericError (before touching the
    weights) if the forward pass or loss goes non-finite, naming the first
    offending tensor."""
    for group in optimizer.param_groups:
        group["lr"] = lr
    model.train()
    x = torch.from_numpy(np.ascontiguousarray(batch))
    y = torch.from_numpy(np.ascontiguousarray(labels))
    optimizer.zero_grad(set_to_none=True)
    embeddings, logits = model(x)
    total, report = combined_loss(embeddings, logits, y, margin=cfg.margin,
                                  triplet_weight=cfg.triplet_weight,
                                  ce_weight=cfg.ce_weight)
    if not np.isfinite(report.total):
        culprit = _first_nonfinite([
            ("input batch", x),
            ("embeddings", embeddings),
            ("logits", logits),
            ("triplet loss", torch.tensor(report.triplet)),
            ("cross-entropy loss", torch.tensor(report.cross_entropy)),
        ]) or "total loss"
        raise NumericError(f"non-finite values in {culprit}")
    total.backward()
    if cfg.grad_clip > 0.0:
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    optimizer.step()
    return report


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, *, iteration: int, model: GaitMM,
                    optimizer: torch.optim.Optimizer,
                    sampler: TrainingSampler | None,
                    model_cfg: ModelConfig, train_cfg: TrainConfig) -> Path:
    """Atomic write: serialize to a sibling temp file, then rename."""
    path = Path(path)
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "iteration": iteration,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "torch_rng_state": torch.get_rng_state(),
        "sampler_state": sampler.state_dict() if sampler is not None else None,
        "model_config": dataclasses.asdict(model_cfg),
        "train_config": dataclasses.asdict(train_cfg),
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("schema") != CHECKPOINT_SCHEMA:
        raise DataError(
            f"{path} is not a {CHECKPOINT_SCHEMA} checkpoint")
    return payload


def restore_model(payload: dict) -> tuple[GaitMM, ModelConfig]:
    """Rebuild the model recorded in a checkpoint payload."""
    model_cfg = model_config_from_dict(payload["model_config"])
    model = GaitMM(model_cfg)
    model.load_state_dict(payload["model_state"])
    return model, model_cfg


def restore_train_config(payload: dict) -> TrainConfig:
    return train_config_from_dict(payload["train_config"])


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainingResult:
    checkpoint_path: Path
    csv_path: Path
    iterations_run: int
    final_report: LossReport | None


def _format_row(iteration: int, report: LossReport, lr: float) -> str:
    return (f"{iteration},{report.triplet:.12e},{report.cross_entropy:.12e},"
            f"{report.total:.12e},{report.nonzero_triplet_fraction:.8f},"
            f"{lr:.8e}")


def run_training(model_cfg: ModelConfig, train_cfg: TrainConfig, pool,
                 out_dir, resume=None, log=None) -> TrainingResult:
    """Run the full loop over a training pool of aligned sequences.

    Writes `loss.csv` (header iter,triplet,ce,total,nonzero_frac,lr, one row
    per iteration), periodic `checkpoint_<iter>.pt`, and `checkpoint_final.pt`.
    On a non-finite loss the last good state is saved to
    `checkpoint_abort.pt` before the error propagates.  `resume` takes a
    checkpoint path and continues as if training had never stopped.
    """
    model_cfg.validate()
    train_cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "loss.csv"

    torch.manual_seed(train_cfg.seed)
    model = GaitMM(model_cfg)
    optimizer = build_optimizer(model, train_cfg)
    sampler = TrainingSampler(pool, train_cfg.batch_p, train_cfg.batch_k,
                              train_cfg.frames_per_clip, seed=train_cfg.seed)
    if model_cfg.num_classes < sampler.num_classes:
        raise ConfigError(
            f"model num_classes={model_cfg.num_classes} below the "
            f"{sampler.num_classes} training subjects")

    start_iter = 0
    if resume is not None:
        payload = load_checkpoint(resume)
        model, model_cfg = restore_model(payload)
        optimizer = build_optimizer(model, train_cfg)
        optimizer.load_state_dict(payload["optimizer_state"])
        torch.set_rng_state(payload["torch_rng_state"])
        if payload["sampler_state"] is not None:
            sampler.load_state_dict(payload["sampler_state"])
        start_iter = int(payload["iteration"])

    append = resume is not None and csv_path.exists()
    csv_file = open(csv_path, "a" if append else "w", encoding="utf-8")
    if not append:
        csv_file.write(",".join(LOSS_CSV_HEADER) + "\n")

    def checkpoint(name: str, iteration: int) -> Path:
        return save_checkpoint(out / name, iteration=iteration, model=model,
                               optimizer=optimizer, sampler=sampler,
                               model_cfg=model_cfg, train_cfg=train_cfg)

    report = None
    iteration = start_iter
    try:
        for iteration in range(start_iter, train_cfg.iterations):
            lr = lr_schedule(iteration, train_cfg)
            batch, labels = sampler.next_batch()
            try:
                report = train_step(model, optimizer, batch, labels, lr,
                                    train_cfg)
            except NumericError as exc:
                checkpoint("checkpoint_abort.pt", iteration)
                raise NumericError(
                    f"iteration {iteration + 1}: {exc}") from None
            csv_file.write(_format_row(iteration + 1, report, lr) + "\n")
            done = iteration + 1
            if train_cfg.checkpoint_every > 0 and \
                    done % train_cfg.checkpoint_every == 0 and \
                    done < train_cfg.iterations:
                checkpoint(f"checkpoint_{done:06d}.pt", done)
            if log is not None and (done % 100 == 0 or done == train_cfg.iterations):
                log(f"iter {done}/{train_cfg.iterations} "
                    f"total {report.total:.4f} lr {lr:.1e}")
    finally:
        csv_file.close()

    final_path = checkpoint("checkpoint_final.pt", train_cfg.iterations)
    return TrainingResult(checkpoint_path=final_path, csv_path=csv_path,
                          iterations_run=train_cfg.iterations - start_iter,
                          final_report=report)


def run_ablation(model_cfg: ModelConfig, train_cfg: TrainConfig, pool,
                 out_dir, log=None) -> dict:
    """Train the 4 ablation variants; returns {row_name: TrainingResult}."""
    out = Path(out_dir)
    results = {}
    for name, flags in ABLATION_ROWS:
        cfg = replace(model_cfg, **flags)
        if log is not None:
            log(f"ablation row {name}: use_pme={cfg.use_pme} "
                f"use_msma={cfg.use_msma}")
        results[name] = run_training(cfg, train_cfg, pool, out / name,
                                     log=log)
    return results
