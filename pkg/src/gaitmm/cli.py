"""Command-line interface.

Subcommands: synth-data (render a synthetic corpus), train, eval, params
(parameter-count table), ablation (the 4-row variant matrix).  Every run
writes a manifest.json at the output root before heavy work starts, so a
run can be reproduced from its manifest alone.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.  GAITMM_THREADS caps torch's thread pool.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import torch

from . import __version__
from .config import ModelConfig, TrainConfig, dump_config, load_config
from .data.corpus import CASIA_VIEWS, load_dataset, write_synthetic_corpus
from .data.protocols import PROTOCOL_NAMES, get_protocol
from .errors import ConfigError, DataError, GaitmmError, NumericError
from .evaluate import (emit_report, extract_embeddings, rank1_matrix,
                       save_embeddings)
from .model import GaitMM, count_parameters
from .train import (load_checkpoint, restore_model, run_ablation,
                    run_training)


def _version_string() -> str:
    return f"gaitmm-{__version__}"


def _apply_thread_cap():
    raw = os.environ.get("GAITMM_THREADS", "").strip()
    if raw:
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"GAITMM_THREADS must be an integer, got {raw!r}")
        if threads < 1:
            raise ConfigError(f"GAITMM_THREADS must be >= 1, got {threads}")
        torch.set_num_threads(threads)


def _write_manifest(out_dir, command: str, *, config_file=None,
                    model_cfg=None, train_cfg=None, seed=None,
                    extra=None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_file": str(config_file) if config_file else None,
        "config": dump_config(model_cfg, train_cfg)
        if model_cfg is not None and train_cfg is not None else None,
        "out_dir": str(out),
        "seed": seed,
        "version": _version_string(),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _load_configs(args) -> tuple[ModelConfig, TrainConfig]:
    if getattr(args, "config", None):
        model_cfg, train_cfg = load_config(args.config)
    else:
        model_cfg, train_cfg = ModelConfig(), TrainConfig()
    if getattr(args, "iterations", None) is not None:
        train_cfg = dataclasses.replace(train_cfg, iterations=args.iterations)
    if getattr(args, "seed", None) is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    model_cfg.validate()
    train_cfg.validate()
    return model_cfg, train_cfg


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth_data(args) -> int:
    if args.views < 1 or args.views > len(CASIA_VIEWS):
        raise ConfigError(
            f"--views must be in 1..{len(CASIA_VIEWS)}, got {args.views}")
    if args.subjects < 0:
        raise ConfigError(f"--subjects must be >= 0, got {args.subjects}")
    if args.frames < 1:
        raise ConfigError(f"--frames must be >= 1, got {args.frames}")
    views = CASIA_VIEWS[:args.views]
    _write_manifest(args.out, "synth-data", seed=args.seed, extra={
        "subjects": args.subjects,
        "views": list(views),
        "seqs_per_cond": args.seqs_per_cond,
        "frames": args.frames,
    })
    written = write_synthetic_corpus(
        args.out, num_subjects=args.subjects, views=views,
        seqs_per_condition=args.seqs_per_cond, frames_per_seq=args.frames,
        seed=args.seed)
    print(f"wrote {written} sequence directories under {args.out}")
    return 0


def _dataset_protocol(name: str, dataset):
    # the synth split adapts to whatever views the corpus holds; the named
    # dataset protocols keep their fixed view grids
    views = sorted({seq.view_deg for seq in dataset})
    return get_protocol(name, dataset.subjects(), views=views)


def cmd_train(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    dataset = load_dataset(args.data)
    if len(dataset) == 0:
        raise DataError(f"no sequences found under {args.data}")
    protocol = _dataset_protocol(args.protocol, dataset)
    pool = dataset.training_pool(protocol, train_cfg.min_train_frames)
    if not pool:
        raise DataError(
            f"training pool is empty for protocol {protocol.name} "
            f"(min {train_cfg.min_train_frames} frames)")

    counts = count_parameters(GaitMM(model_cfg))
    _write_manifest(args.out, "train", config_file=args.config,
                    model_cfg=model_cfg, train_cfg=train_cfg,
                    seed=train_cfg.seed, extra={
                        "data": str(args.data),
                        "protocol": protocol.name,
                        "train_subjects": sorted(protocol.train_subjects),
                        "parameters": {"total": counts.total,
                                       "per_module": counts.per_module},
                    })
    result = run_training(model_cfg, train_cfg, pool, args.out,
                          resume=args.resume, log=print)
    if result.final_report is not None:
        print(f"final loss {result.final_report.total:.6f} "
              f"({result.iterations_run} iterations)")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"loss curve: {result.csv_path}")
    return 0


def cmd_eval(args) -> int:
    payload = load_checkpoint(args.checkpoint)
    model, model_cfg = restore_model(payload)
    dataset = load_dataset(args.data)
    if len(dataset) == 0:
        raise DataError(f"no sequences found under {args.data}")
    protocol = _dataset_protocol(args.protocol, dataset)
    _write_manifest(args.out, "eval", seed=None, extra={
        "checkpoint": str(args.checkpoint),
        "data": str(args.data),
        "protocol": protocol.name,
        "model_config": dataclasses.asdict(model_cfg),
    })

    gallery_seqs = dataset.gallery_pool(protocol)
    probe_seqs = dataset.probe_pool(protocol)
    if not gallery_seqs:
        raise DataError(f"protocol {protocol.name}: gallery is empty")
    if not probe_seqs:
        raise DataError(f"protocol {protocol.name}: probe set is empty")
    gallery, g_skip = extract_embeddings(gallery_seqs, model, log=print)
    probes, p_skip = extract_embeddings(probe_seqs, model, log=print)
    if g_skip or p_skip:
        print(f"skipped {g_skip} gallery / {p_skip} probe sequences "
              f"(too short)")
    out = Path(args.out)
    save_embeddings(out / "embeddings_gallery.npz", gallery)
    save_embeddings(out / "embeddings_probe.npz", probes)

    report = rank1_matrix(gallery, probes, protocol)
    emit_report(report, out)
    for cond in report.conditions:
        print(f"{cond} mean rank-1: {report.condition_mean(cond):.4f}")
    print(f"overall mean rank-1: {report.overall_mean():.4f}")
    return 0


def cmd_params(args) -> int:
    if args.config:
        model_cfg, _ = load_config(args.config)
    else:
        model_cfg = ModelConfig()
    model_cfg.validate()
    standard = count_parameters(
        GaitMM(dataclasses.replace(model_cfg, pme_mode="standard")))
    depthwise = count_parameters(
        GaitMM(dataclasses.replace(model_cfg, pme_mode="depthwise_separable")))
    modules = sorted(set(standard.per_module) | set(depthwise.per_module))
    width = max(len(m) for m in modules + ["module", "total"]) + 2
    print(f"{'module':<{width}}{'standard':>12}{'depthwise':>12}")
    for module in modules:
        std = standard.per_module.get(module, 0)
        dws = depthwise.per_module.get(module, 0)
        print(f"{module:<{width}}{std:>12}{dws:>12}")
    print(f"{'total':<{width}}{standard.total:>12}{depthwise.total:>12}")
    return 0


def cmd_ablation(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    dataset = load_dataset(args.data)
    if len(dataset) == 0:
        raise DataError(f"no sequences found under {args.data}")
    protocol = _dataset_protocol(args.protocol, dataset)
    pool = dataset.training_pool(protocol, train_cfg.min_train_frames)
    if not pool:
        raise DataError(f"training pool is empty for protocol {protocol.name}")
    _write_manifest(args.out, "ablation", config_file=args.config,
                    model_cfg=model_cfg, train_cfg=train_cfg,
                    seed=train_cfg.seed, extra={
                        "data": str(args.data),
                        "protocol": protocol.name,
                    })
    results = run_ablation(model_cfg, train_cfg, pool, args.out, log=print)

    lines = ["variant,final_total_loss,nm_mean,bg_mean,cl_mean,overall_mean"]
    for name, result in results.items():
        row = [name]
        final = result.final_report.total if result.final_report else float("nan")
        row.append(f"{final:.6f}")
        if args.no_eval:
            row.extend(["", "", "", ""])
        else:
            payload = load_checkpoint(result.checkpoint_path)
            model, _ = restore_model(payload)
            gallery, _ = extract_embeddings(dataset.gallery_pool(protocol), model)
            probes, _ = extract_embeddings(dataset.probe_pool(protocol), model)
            report = rank1_matrix(gallery, probes, protocol)
            emit_report(report, Path(args.out) / name)
            for cond in ("nm", "bg", "cl"):
                row.append(f"{report.condition_mean(cond):.6f}"
                           if cond in report.conditions else "")
            row.append(f"{report.overall_mean():.6f}")
            print(f"{name}: overall mean rank-1 {report.overall_mean():.4f}")
        lines.append(",".join(row))
    summary = Path(args.out) / "ablation_summary.csv"
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"ablation summary: {summary}")
    return 0


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitmm",
        description="Gait recognition: synthetic data, training, evaluation.")
    parser.add_argument("--version", action="version",
                        version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="render a synthetic corpus")
    p.add_argument("--out", required=True, help="corpus root directory")
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--views", type=int, default=len(CASIA_VIEWS),
                   help="number of views from the 0..180 grid")
    p.add_argument("--seqs-per-cond", type=int, default=None,
                   help="sequences per condition (default: 6 nm, 2 bg, 2 cl)")
    p.add_argument("--frames", type=int, default=36)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--data", required=True, help="corpus root")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--protocol", default="synth",
                   choices=list(PROTOCOL_NAMES))
    p.add_argument("--iterations", type=int, default=None,
                   help="override [train] iterations")
    p.add_argument("--seed", type=int, default=None,
                   help="override [train] seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-view rank-1 evaluation")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--protocol", default="synth",
                   choices=list(PROTOCOL_NAMES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("params", help="parameter-count table")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("ablation", help="train the 4 model variants")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", default="synth",
                   choices=list(PROTOCOL_NAMES))
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-eval", action="store_true",
                   help="skip rank-1 evaluation of each variant")
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_cap()
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except GaitmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
