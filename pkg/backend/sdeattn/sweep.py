"""
sweep.py
~~~~~~~~
Run the full cross product datasets × variants × rates × seeds.

* Every cell trains from scratch and is evaluated on the test pool.
* Cells run in a process pool when ``workers > 1``; the parent process is
  the only writer of ``cells/``, ``results.csv`` and ``timings.csv``.
* ``results.csv`` is rewritten after each finished cell, so an interrupted
  sweep leaves a consistent partial table behind.
* On restart, cells with a record in ``cells/`` are skipped.
* A failing cell is recorded with ``error="<Type>: <message>"`` and a NaN
  metric; the sweep carries on.

Output directory
----------------
    config.ini                resolved configuration echo
    cells/<cell>.json         per-cell record
    logs/<cell>.jsonl         per-iteration training log
    checkpoints/<cell>.npz    trained weights (``save_checkpoints``)
    results.csv, timings.csv
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Future, ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterator

from .config import ExperimentConfig, echo_config
from .constants import VARIANTS
from .datasets import DataConfig, DatasetPools, dataset_label, load_pools
from .metrics import MetricsReport, ResultRow
from .model import ModelConfig
from .results_store import ResultsStore
from .run_logging import logged_call
from .training import evaluate_checkpoint, train

LOG = logging.getLogger("sweep")


@dataclass(frozen=True)
class Cell:
    dataset: str
    variant: str
    rate: float
    seed: int

    @property
    def id(self) -> str:
        return f"{dataset_label(self.dataset)}__{self.variant}__r{self.rate:.4f}__s{self.seed}"

    @property
    def label(self) -> str:
        return f"cell {dataset_label(self.dataset)}/{self.variant} r{self.rate:.2f} s{self.seed}"


def cells(cfg: ExperimentConfig) -> list[Cell]:
    return [
        Cell(dataset, variant, float(rate), int(seed))
        for dataset in cfg.datasets
        for variant in cfg.variants
        for rate in cfg.rates
        for seed in cfg.seeds
    ]


# ── One cell (runs inside a worker) ───────────────────────────────────────
_POOLS: dict[tuple[str, DataConfig], DatasetPools] = {}


def _pools(name: str, data_cfg: DataConfig) -> DatasetPools:
    key = (name, data_cfg)
    if key not in _POOLS:
        _POOLS[key] = load_pools(name, data_cfg)
    return _POOLS[key]


def cell_model_config(cfg: ExperimentConfig, cell: Cell, pools: DatasetPools) -> ModelConfig:
    return replace(
        cfg.model,
        attention=VARIANTS[cell.variant],
        input_dim=pools.input_dim,
        seq_len=pools.seq_len,
        n_classes=pools.n_classes if cfg.task == "classification" else 0,
        seed=cell.seed,
    )


def run_cell(cfg: ExperimentConfig, cell: Cell, out_dir: Path) -> dict[str, Any]:
    """Train and evaluate one cell; return its JSON-ready record."""
    pools = _pools(cell.dataset, cfg.data)
    model_cfg = cell_model_config(cfg, cell, pools)
    run_cfg = cfg.run_config(cell.rate, cell.seed)
    ckpt, run = train(model_cfg, pools.train, run_cfg, log_path=Path(out_dir) / "logs" / f"{cell.id}.jsonl")
    t0 = time.perf_counter()
    result = evaluate_checkpoint(ckpt, pools.test, run_cfg)
    eval_ms = (time.perf_counter() - t0) * 1000.0
    if cfg.save_checkpoints:
        ckpt.save(Path(out_dir) / "checkpoints" / f"{cell.id}.npz")
    row = ResultRow(
        dataset=pools.name,
        variant=cell.variant,
        task=cfg.task,
        rate=cell.rate,
        seed=cell.seed,
        metric=result.metric,
        diverged=run.diverged_count + result.diverged,
        skipped_updates=run.skipped_updates,
        eval_batch_size=result.eval_batch_size,
    )
    return {
        "cell": cell.id,
        "row": row.to_dict(),
        "iterations": run.completed,
        "train_ms": round(run.wall_ms, 3),
        "eval_ms": round(eval_ms, 3),
    }


def _failed(cfg: ExperimentConfig, cell: Cell, exc: BaseException) -> dict[str, Any]:
    row = ResultRow(
        dataset=dataset_label(cell.dataset),
        variant=cell.variant,
        task=cfg.task,
        rate=cell.rate,
        seed=cell.seed,
        metric=math.nan,
        error=f"{type(exc).__name__}: {exc}",
    )
    run = getattr(exc, "run", None)
    return {
        "cell": cell.id,
        "row": row.to_dict(),
        "iterations": getattr(run, "completed", 0),
        "train_ms": round(getattr(run, "wall_ms", 0.0), 3),
        "eval_ms": 0.0,
    }


def safe_run_cell(cfg: ExperimentConfig, cell: Cell, out_dir: Path) -> dict[str, Any]:
    """:func:`run_cell` that turns any exception into an error record."""
    try:
        return logged_call(cell.label, run_cell, cfg, cell, out_dir)
    except Exception as exc:  # noqa: BLE001
        return _failed(cfg, cell, exc)


# ── Driver ────────────────────────────────────────────────────────────────
def _results(
    cfg: ExperimentConfig, pending: list[Cell], out_dir: Path, workers: int
) -> Iterator[dict[str, Any]]:
    if workers <= 1 or len(pending) <= 1:
        for cell in pending:
            yield safe_run_cell(cfg, cell, out_dir)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures: dict[Future, Cell] = {pool.submit(safe_run_cell, cfg, c, out_dir): c for c in pending}
        for fut in as_completed(futures):
            try:
                yield fut.result()
            except Exception as exc:  # noqa: BLE001 - worker process died
                yield _failed(cfg, futures[fut], exc)


def run_sweep(
    cfg: ExperimentConfig,
    out_dir: Path | None = None,
    *,
    workers: int | None = None,
    max_cells: int | None = None,
    on_cell: Callable[[dict[str, Any]], None] | None = None,
) -> MetricsReport:
    """
    Execute every missing cell of *cfg* and return the full report.

    ``max_cells`` stops after that many new cells (a controlled
    interruption); a later call resumes from the records on disk.
    """
    out = Path(out_dir or cfg.output_dir)
    echo_config(cfg, out)
    store = ResultsStore(out)
    grid = cells(cfg)
    wanted = {c.id for c in grid}
    records = {k: v for k, v in store.load_cells().items() if k in wanted}
    todo = [c for c in grid if c.id not in records]
    if max_cells is not None:
        todo = todo[:max_cells]
    LOG.info(
        "sweep %s: %d cells, %d done, %d to run → %s",
        cfg.name,
        len(grid),
        len(records),
        len(todo),
        out,
    )

    for record in _results(cfg, todo, out, workers or cfg.workers):
        store.save_cell(record)
        records[record["cell"]] = record
        store.write_results(store.report_of(records.values()))
        if record["row"]["error"]:
            LOG.warning("cell %s failed: %s", record["cell"], record["row"]["error"])
        if on_cell is not None:
            on_cell(record)

    report = store.report_of(records.values())
    store.write_results(report)
    store.write_timings(records.values())
    failed = sum(1 for r in report.rows if r.error)
    LOG.info("sweep %s finished: %d rows, %d failed", cfg.name, len(report), failed)
    return report


__all__ = ["Cell", "cells", "cell_model_config", "run_cell", "safe_run_cell", "run_sweep"]
