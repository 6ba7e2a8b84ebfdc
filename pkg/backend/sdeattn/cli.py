"""
cli.py
~~~~~~
``sdeattn`` command line.

Subcommands
-----------
generate-data   build a generated dataset and store it as ``.npz``
train           train one (dataset, variant, rate, seed) and save a checkpoint
evaluate        score checkpoints on a dataset's test split
sweep           run the full cross product, then write tables and curves
report          rebuild tables and curves from an existing ``results.csv``

Configuration flags mirror experiment-file keys and override them;
``--set section.key=value`` reaches every key.

Usage example
-------------
    $ sdeattn sweep --config experiments/periodic.ini --workers 4
    $ sdeattn report --results runs/periodic-desk --style markdown
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from dotenv import load_dotenv

from .checkpoint import Checkpoint
from .config import ExperimentConfig, echo_config, load_config
from .constants import VARIANTS
from .data import save_cached
from .datasets import dataset_label, load_pools
from .errors import SdeAttentionError
from .metrics import MetricsReport
from .report import emit_summary, emit_table, write_report
from .results_store import read_results
from .run_logging import logged_call, setup_logging
from .sweep import Cell, cell_model_config, run_sweep
from .training import evaluate, train

LOG = logging.getLogger("cli")

# flag → "section.key"
FLAG_KEYS = {
    "task": "experiment.task",
    "datasets": "experiment.datasets",
    "out": "experiment.output_dir",
    "variants": "sweep.variants",
    "missing_rates": "sweep.missing_rates",
    "observed_rates": "sweep.observed_rates",
    "seeds": "sweep.seeds",
    "workers": "sweep.workers",
    "iterations": "train.iterations",
    "epochs": "train.epochs",
    "batch_size": "train.batch_size",
    "lr": "train.lr",
    "substeps": "model.substeps",
    "latent_dim": "model.latent_dim",
}


# ── Parsing ───────────────────────────────────────────────────────────────
def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="INI experiment file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override any config key (repeatable)",
    )
    p.add_argument("--task", choices=["classification", "interpolation"])
    p.add_argument("--datasets", help="comma list: periodic, frequency or train-file paths")
    p.add_argument("--variants", help=f"comma list from {', '.join(VARIANTS)}")
    p.add_argument("--missing-rates", dest="missing_rates")
    p.add_argument("--observed-rates", dest="observed_rates")
    p.add_argument("--seeds")
    p.add_argument("--workers", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--substeps", type=int)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--out", help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdeattn", description="SDE-RNN latent attention benchmarks")
    parser.add_argument("--log-level", default=None, help="overrides $LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _config_parent()

    gen = sub.add_parser("generate-data", parents=[common], help="build and store a generated dataset")
    gen.add_argument("--dataset", default="periodic", choices=["periodic", "frequency"])
    gen.add_argument("--file", type=Path, help="target .npz (default <out>/data/<dataset>.npz)")

    tr = sub.add_parser("train", parents=[common], help="train one model")
    tr.add_argument("--dataset", help="defaults to the first configured dataset")
    tr.add_argument("--variant", default="sde-rnn", choices=sorted(VARIANTS))
    tr.add_argument("--rate", type=float, help="missing (classification) or observed (interpolation) rate")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--checkpoint", type=Path, help="default <out>/checkpoints/<cell>.npz")

    ev = sub.add_parser("evaluate", parents=[common], help="evaluate checkpoints")
    ev.add_argument("checkpoints", nargs="+", type=Path)
    ev.add_argument("--dataset", help="defaults to the first configured dataset")
    ev.add_argument("--rate", type=float)
    ev.add_argument("--results", type=Path, help="also write the per-seed rows as CSV")

    sub.add_parser("sweep", parents=[common], help="run the configured sweep")

    rp = sub.add_parser("report", help="tables and curves from results.csv")
    rp.add_argument("--results", type=Path, required=True, help="results.csv or its directory")
    rp.add_argument("--out", type=Path, help="default: the results directory")
    rp.add_argument("--style", choices=["text", "markdown"], default="text")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict[str, str] = {}
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return load_config(args.config, overrides)


def _cell(cfg: ExperimentConfig, args: argparse.Namespace, variant: str) -> Cell:
    return Cell(
        dataset=args.dataset or cfg.datasets[0],
        variant=variant,
        rate=cfg.rates[0] if args.rate is None else args.rate,
        seed=cfg.seeds[0] if getattr(args, "seed", None) is None else args.seed,
    )


# ── Commands ──────────────────────────────────────────────────────────────
def cmd_generate_data(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    pools = load_pools(args.dataset, cfg.data)
    target = args.file or Path(cfg.output_dir) / "data" / f"{args.dataset}.npz"
    spec = {"dataset": args.dataset, "train_groups": len(pools.train), **cfg.data.to_dict()}
    save_cached(target, pools.train + pools.test, spec)
    print(f"{args.dataset}: {len(pools.train)} train / {len(pools.test)} test groups → {target}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    cell = _cell(cfg, args, args.variant)
    pools = load_pools(cell.dataset, cfg.data)
    out = Path(cfg.output_dir)
    echo_config(cfg, out)
    model_cfg = cell_model_config(cfg, cell, pools)
    run_cfg = cfg.run_config(cell.rate, cell.seed)
    ckpt, run = logged_call(
        f"train {cell.id}", train, model_cfg, pools.train, run_cfg, log_path=out / "logs" / f"{cell.id}.jsonl"
    )
    path = ckpt.save(args.checkpoint or out / "checkpoints" / f"{cell.id}.npz")
    final = run.losses[-1] if run.losses else float("nan")
    print(
        f"{cell.id}: {run.completed} iterations, final loss {final:.5f}, "
        f"diverged {run.diverged_count} → {path}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    checkpoints = [Checkpoint.load(p) for p in args.checkpoints]
    dataset = args.dataset or cfg.datasets[0]
    pools = load_pools(dataset, cfg.data)
    rate = cfg.rates[0] if args.rate is None else args.rate
    kinds = {kind: name for name, kind in VARIANTS.items()}
    rows = []
    for ckpt in checkpoints:
        variant = kinds[ckpt.config.attention]
        report = evaluate(
            ckpt,
            pools.test,
            cfg.task,
            cfg.run_config(rate, ckpt.config.seed),
            dataset=dataset_label(dataset),
            variant=variant,
        )
        rows += report.rows
    report = MetricsReport(rows)
    if args.results is not None:
        args.results.parent.mkdir(parents=True, exist_ok=True)
        report.frame().to_csv(args.results, index=False, lineterminator="\n")
    print(emit_table(report, "text"), end="")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    report = run_sweep(cfg)
    if not any(r.ok for r in report.rows):
        LOG.error("no cell succeeded; see %s/results.csv for the errors", cfg.output_dir)
        return 1
    write_report(report, Path(cfg.output_dir))
    print(emit_table(report, "text"), end="")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    report = read_results(args.results)
    out = args.out or (args.results if args.results.is_dir() else args.results.parent)
    write_report(report, out)
    print(emit_table(report, args.style) + "\n" + emit_summary(report, args.style), end="")
    return 0


COMMANDS = {
    "generate-data": cmd_generate_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (SdeAttentionError, FileNotFoundError) as exc:
        LOG.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
