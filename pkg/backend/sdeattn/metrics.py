"""
metrics.py
~~~~~~~~~~
Per-seed result rows and their ``mean (std)`` aggregation.

Aggregates are always recomputed from the rows (population std,
``ddof=0``); rows carrying an error string are kept for the record but
left out of every aggregate.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Iterable

import numpy as np
import pandas as pd

KEY_COLUMNS = ["dataset", "variant", "task", "rate"]


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    variant: str
    task: str
    rate: float
    seed: int
    metric: float
    diverged: int = 0
    skipped_updates: int = 0
    eval_batch_size: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and np.isfinite(self.metric)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResultRow":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


COLUMNS = [f.name for f in fields(ResultRow)]


class MetricsReport:
    """Immutable bag of :class:`ResultRow` with pandas views."""

    def __init__(self, rows: Iterable[ResultRow] = ()) -> None:
        self.rows: list[ResultRow] = sorted(
            rows, key=lambda r: (r.dataset, r.variant, r.task, r.rate, r.seed)
        )

    def __len__(self) -> int:
        return len(self.rows)

    def __bool__(self) -> bool:
        return bool(self.rows)

    @property
    def task(self) -> str:
        tasks = {r.task for r in self.rows}
        return tasks.pop() if len(tasks) == 1 else "mixed"

    @property
    def higher_is_better(self) -> bool:
        return self.task == "classification"

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=COLUMNS)

    def aggregate(self) -> pd.DataFrame:
        """One row per (dataset, variant, task, rate): mean, std, n, diverged."""
        df = self.frame()
        df = df[(df["error"] == "") & np.isfinite(df["metric"].astype(float))]
        if df.empty:
            return pd.DataFrame(columns=KEY_COLUMNS + ["mean", "std", "n", "diverged"])
        grouped = df.groupby(KEY_COLUMNS, sort=True)
        out = grouped["metric"].agg(
            mean="mean",
            std=lambda s: float(np.std(s.to_numpy(dtype=float), ddof=0)),
            n="count",
        )
        out["diverged"] = grouped["diverged"].sum()
        return out.reset_index()

    def values(self, dataset: str, variant: str, rate: float) -> list[float]:
        return [
            r.metric
            for r in self.rows
            if r.ok and r.dataset == dataset and r.variant == variant and np.isclose(r.rate, rate)
        ]

    @property
    def rates(self) -> list[float]:
        return sorted({r.rate for r in self.rows})

    @property
    def variants(self) -> list[str]:
        return sorted({r.variant for r in self.rows})

    @property
    def datasets(self) -> list[str]:
        return sorted({r.dataset for r in self.rows})

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "MetricsReport":
        df = df.copy()
        df["error"] = df["error"].fillna("").astype(str) if "error" in df else ""
        return cls(ResultRow.from_dict(rec) for rec in df.to_dict(orient="records"))


__all__ = ["ResultRow", "MetricsReport", "COLUMNS", "KEY_COLUMNS"]
