"""
report.py
~~~~~~~~~
Turn a :class:`MetricsReport` into tables and plot-ready curve files.

* Tables have one row per (dataset, rate) and one column per variant.
  Cells read ``mean (std)``.  Every cell within ``BEST_TIE_TOL`` of the
  row's best mean is marked (``*`` in text, bold in markdown).
* The CSV twin carries the same numbers long-form with ``%.8f``.
* Curves: ``curves/<dataset>.csv`` with ``rate`` and per-variant
  ``<variant>_mean`` / ``<variant>_std`` columns.
* The summary averages per-dataset means over datasets and adds a
  degradation column: metric at the lowest rate minus metric at the
  highest rate.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .constants import BEST_TIE_TOL
from .errors import ConfigError
from .metrics import MetricsReport

LOG = logging.getLogger("report")

STYLES = ("text", "markdown")


def _fmt(mean: float, std: float) -> str:
    return f"{mean:.4f} ({std:.4f})"


def best_mask(means: pd.Series, higher_is_better: bool, tol: float = BEST_TIE_TOL) -> pd.Series:
    """Mark every entry within *tol* of the best one; NaN never wins."""
    finite = means.dropna()
    if finite.empty:
        return pd.Series(False, index=means.index)
    best = finite.max() if higher_is_better else finite.min()
    return (means - best).abs().le(tol).fillna(False)


def table_frame(report: MetricsReport) -> pd.DataFrame:
    """Long-form aggregate with a ``best`` flag per (dataset, rate) row."""
    agg = report.aggregate()
    if agg.empty:
        return agg.assign(best=pd.Series(dtype=bool))
    flags = []
    for _, grp in agg.groupby(["dataset", "rate"], sort=True):
        flags.append(best_mask(grp["mean"], report.higher_is_better))
    agg["best"] = pd.concat(flags).reindex(agg.index)
    return agg.sort_values(["dataset", "rate", "variant"]).reset_index(drop=True)


def _render(header: list[str], body: list[list[str]], style: str) -> str:
    if style == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in body]
        return "\n".join(lines) + "\n"
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
    return "\n".join(lines) + "\n"


def emit_table(report: MetricsReport, style: str = "text") -> str:
    """
    Aligned ``mean (std)`` table, best-per-row marked.

    Raises:
        ConfigError: unknown *style* or an empty report.
    """
    if style not in STYLES:
        raise ConfigError(f"table style must be one of {STYLES}, got {style!r}")
    frame = table_frame(report)
    if frame.empty:
        raise ConfigError("nothing to tabulate: the report has no successful rows")
    variants = sorted(frame["variant"].unique())
    metric = "accuracy" if report.higher_is_better else "mse"
    header = ["dataset", "rate"] + variants
    body = []
    for (dataset, rate), grp in frame.groupby(["dataset", "rate"], sort=True):
        cells = {}
        for rec in grp.itertuples():
            text = _fmt(rec.mean, rec.std)
            if rec.best:
                text = f"**{text}**" if style == "markdown" else f"{text} *"
            cells[rec.variant] = text
        body.append([dataset, f"{rate:.2f}"] + [cells.get(v, "-") for v in variants])
    title = f"{report.task} {metric}, mean (std) over seeds"
    prefix = f"{title}\n\n" if style == "markdown" else f"{title}\n"
    return prefix + _render(header, body, style)


def write_table_csv(report: MetricsReport, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = table_frame(report)
    frame.to_csv(path, index=False, float_format="%.8f", lineterminator="\n")
    return path


def emit_curves(report: MetricsReport, out_dir: Path) -> list[Path]:
    """
    One CSV per dataset: ``rate`` then ``<variant>_mean`` / ``<variant>_std``.

    Raises:
        ConfigError: the report covers fewer than two rates.
    """
    frame = report.aggregate()
    if frame["rate"].nunique() < 2:
        raise ConfigError("curves need results at two or more rates")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for dataset, grp in frame.groupby("dataset", sort=True):
        wide = grp.pivot(index="rate", columns="variant", values=["mean", "std"]).sort_index()
        columns = {}
        for variant in sorted(grp["variant"].unique()):
            columns[f"{variant}_mean"] = wide[("mean", variant)]
            columns[f"{variant}_std"] = wide[("std", variant)]
        curve = pd.DataFrame(columns).reset_index()
        path = out_dir / f"{dataset}.csv"
        curve.to_csv(path, index=False, float_format="%.8f", lineterminator="\n")
        paths.append(path)
    LOG.info("wrote %d curve files → %s", len(paths), out_dir)
    return paths


def overall_summary(report: MetricsReport) -> pd.DataFrame:
    """
    Per (variant, rate): mean and population std of the per-dataset means,
    as ``<rate>`` / ``<rate>_std`` columns, plus per-variant degradation
    (mean at the lowest rate minus mean at the highest).
    """
    agg = report.aggregate()
    if agg.empty:
        return pd.DataFrame(columns=["variant", "degradation"])
    grouped = agg.groupby(["variant", "rate"])["mean"]
    mean = grouped.mean().unstack("rate").sort_index()
    std = grouped.agg(lambda s: float(np.std(s.to_numpy(dtype=float), ddof=0))).unstack("rate").sort_index()
    rates = sorted(mean.columns)
    summary = pd.DataFrame(index=mean.index)
    for r in rates:
        summary[f"{r:.2f}"] = mean[r]
        summary[f"{r:.2f}_std"] = std[r]
    lo, hi = f"{rates[0]:.2f}", f"{rates[-1]:.2f}"
    summary["degradation"] = summary[lo] - summary[hi] if len(rates) > 1 else np.nan
    return summary.reset_index()


def emit_summary(report: MetricsReport, style: str = "text") -> str:
    summary = overall_summary(report)
    header = list(summary.columns)
    body = [
        [str(row[0])] + ["-" if pd.isna(v) else f"{v:.4f}" for v in row[1:]]
        for row in summary.itertuples(index=False)
    ]
    title = f"{report.task} mean over datasets (_std: population std across datasets)"
    return title + "\n" + _render(header, body, style)


def write_report(report: MetricsReport, out_dir: Path) -> list[Path]:
    """Tables (text + markdown + CSV twin), summary and, when possible, curves."""
    out_dir = Path(out_dir)
    tables = out_dir / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    written = []
    for style, suffix in (("text", "txt"), ("markdown", "md")):
        path = tables / f"results.{suffix}"
        path.write_text(emit_table(report, style) + "\n" + emit_summary(report, style), encoding="utf-8")
        written.append(path)
    written.append(write_table_csv(report, tables / "results.csv"))
    if len(report.rates) >= 2:
        written += emit_curves(report, out_dir / "curves")
    else:
        LOG.info("single rate in report; skipping curves")
    return written


__all__ = [
    "STYLES",
    "best_mask",
    "table_frame",
    "emit_table",
    "write_table_csv",
    "emit_curves",
    "overall_summary",
    "emit_summary",
    "write_report",
]
