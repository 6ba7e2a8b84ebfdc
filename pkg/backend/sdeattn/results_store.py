"""
results_store.py
~~~~~~~~~~~~~~~~
On-disk state of a sweep, written by one process only.

Storage (under the sweep's output directory)
-------------------------------------------
    cells/<cell>.json     one record per finished cell (row + timings)
    results.csv           every per-seed row, sorted; no wall-clock columns
    timings.csv           wall-clock per cell, kept apart so results.csv is
                          byte-identical between runs

Wall-clock figures (``train_ms``, ``eval_ms``) and iteration counts live
only in timings.csv, never as results.csv columns; results.csv compares
byte-for-byte across repeated and resumed sweeps.  Join the two files on
``cell`` to put timings next to metrics.

A cell record that cannot be parsed is logged and treated as missing, so
the cell simply runs again on resume.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable

import pandas as pd

from .metrics import COLUMNS, MetricsReport, ResultRow

LOG = logging.getLogger("results_store")

RESULTS_FILE = "results.csv"
TIMINGS_FILE = "timings.csv"
TIMING_COLUMNS = ["cell", "dataset", "variant", "rate", "seed", "iterations", "train_ms", "eval_ms"]


class ResultsStore:
    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.cells_dir = self.root / "cells"
        self.cells_dir.mkdir(parents=True, exist_ok=True)

    # ── cell records ──────────────────────────────────────────────────────
    def cell_path(self, cell_id: str) -> Path:
        return self.cells_dir / f"{cell_id}.json"

    def save_cell(self, record: dict[str, Any]) -> Path:
        """Atomically write one cell record (tmp file + rename)."""
        path = self.cell_path(record["cell"])
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(record, indent=2, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)
        return path

    def load_cells(self) -> dict[str, dict[str, Any]]:
        records: dict[str, dict[str, Any]] = {}
        for path in sorted(self.cells_dir.glob("*.json")):
            try:
                record = json.loads(path.read_text(encoding="utf-8"))
                ResultRow.from_dict(record["row"])
            except Exception as exc:  # noqa: BLE001
                LOG.warning("[store] ignoring unreadable cell %s: %s", path.name, exc)
                continue
            records[record["cell"]] = record
        return records

    # ── tables ────────────────────────────────────────────────────────────
    @staticmethod
    def report_of(records: Iterable[dict[str, Any]]) -> MetricsReport:
        return MetricsReport(ResultRow.from_dict(r["row"]) for r in records)

    def write_results(self, report: MetricsReport) -> Path:
        path = self.root / RESULTS_FILE
        report.frame().to_csv(path, index=False, columns=COLUMNS, lineterminator="\n")
        return path

    def write_timings(self, records: Iterable[dict[str, Any]]) -> Path:
        rows = []
        for rec in sorted(records, key=lambda r: r["cell"]):
            row = rec["row"]
            rows.append(
                {
                    "cell": rec["cell"],
                    "dataset": row["dataset"],
                    "variant": row["variant"],
                    "rate": row["rate"],
                    "seed": row["seed"],
                    "iterations": rec.get("iterations", 0),
                    "train_ms": rec.get("train_ms", 0.0),
                    "eval_ms": rec.get("eval_ms", 0.0),
                }
            )
        path = self.root / TIMINGS_FILE
        pd.DataFrame(rows, columns=TIMING_COLUMNS).to_csv(path, index=False, lineterminator="\n")
        return path


def read_results(path: Path) -> MetricsReport:
    """Load a ``results.csv`` back into a :class:`MetricsReport`."""
    path = Path(path)
    if path.is_dir():
        path = path / RESULTS_FILE
    df = pd.read_csv(
        path,
        dtype={"dataset": str, "variant": str, "task": str, "error": str},
        keep_default_na=False,
        na_values=[""],
    )
    for col in ("dataset", "variant", "task"):
        df[col] = df[col].astype(str)
    df["metric"] = pd.to_numeric(df["metric"], errors="coerce")
    for col in ("seed", "diverged", "skipped_updates", "eval_batch_size"):
        if col in df:
            df[col] = df[col].astype(int)
    return MetricsReport.from_frame(df)


__all__ = ["ResultsStore", "read_results", "RESULTS_FILE", "TIMINGS_FILE"]
