"""Command-line entry points for the unlearning benchmark harness."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import torch

from .config import ExperimentConfig, config_hash, default_config, load_config
from .pipeline import (
    METAUNLEARN,
    SeedWorkspace,
    aggregate_reports,
    metaloss_stage,
    method_order,
    prepare_seed,
    read_report_csv,
    run_ablations,
    run_pipeline,
    run_seed,
    write_summary,
)

STAGE_COMMANDS = (
    "generate-data",
    "pretrain",
    "retrain",
    "train-metaloss",
    "unlearn",
    "evaluate",
    "ablate",
    "report",
    "run-all",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oneshot-unlearn",
        description="Identity unlearning benchmark: data, training, unlearning, evaluation.",
    )
    parser.add_argument("command", choices=STAGE_COMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="restrict to one seed")
    parser.add_argument("--out", type=Path, default=None, help="override the output directory")
    parser.add_argument("--method", type=str, default=None, help="method for unlearn/evaluate")
    parser.add_argument("--n-s", type=int, default=None, help="override the request size")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    if args.n_s is not None:
        cfg = replace(cfg, n_s=args.n_s)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    return cfg


def _stage_command(cfg: ExperimentConfig, command: str, method: str | None) -> int:
    torch.set_num_threads(1)
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(cfg)
    methods = None
    if method is not None:
        known = method_order(cfg)
        if method not in known:
            print(f"unknown method {method!r}; choose from {known}", file=sys.stderr)
            return 1
        methods = [method]
    for seed in cfg.seeds:
        ws = SeedWorkspace(root, seed, cfg_hash)
        if command == "generate-data":
            from .data import generate_dataset, load_dataset, save_dataset

            ws.run_stage(
                "dataset",
                {"dataset": "dataset.npz"},
                compute=lambda p: save_dataset(generate_dataset(cfg.generator, seed), p["dataset"]),
                load=lambda p: load_dataset(p["dataset"]),
            )
            continue
        arts = prepare_seed(cfg, seed, ws)
        if command in ("pretrain", "retrain"):
            continue  # prepare_seed already covers both stages
        metaloss_stage(cfg, seed, ws, arts)
        if command == "train-metaloss":
            continue
        run_seed(cfg, seed, root, methods=methods, with_reports=command == "evaluate")
    return 0


def _report_command(cfg: ExperimentConfig) -> int:
    root = Path(cfg.output_dir)
    per_seed: dict[int, dict] = {}
    for seed in cfg.seeds:
        seed_dir = root / f"seed_{seed}" / "reports"
        if not seed_dir.exists():
            continue
        methods = {}
        for method in method_order(cfg):
            path = seed_dir / f"{method}.csv"
            if path.exists():
                methods[method] = read_report_csv(path)
        if methods:
            per_seed[seed] = methods
    if not per_seed:
        print("no reports found; run `evaluate` or `run-all` first", file=sys.stderr)
        return 1
    summaries = aggregate_reports(cfg, per_seed)
    csv_path, md_path = write_summary(summaries, [], root)
    print(f"wrote {csv_path} and {md_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    cfg = resolve_config(args)

    if args.command == "run-all":
        result = run_pipeline(cfg)
        for seed, message in result.failures:
            print(f"seed {seed} failed: {message}", file=sys.stderr)
        print(f"summary: {result.summary_csv}")
        return 1 if result.failures else 0
    if args.command == "ablate":
        paths = run_ablations(cfg)
        for name, path in paths.items():
            print(f"{name}: {path}")
        return 0
    if args.command == "report":
        return _report_command(cfg)
    return _stage_command(cfg, args.command, args.method)


if __name__ == "__main__":
    sys.exit(main())
