"""
tests/test_report.py
~~~~~~~~~~~~~~~~~~~~
Tables, best-cell marking, the CSV twin, curves and the summary.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from sdeattn.errors import ConfigError
from sdeattn.metrics import MetricsReport, ResultRow
from sdeattn.report import (
    best_mask,
    emit_curves,
    emit_summary,
    emit_table,
    overall_summary,
    table_frame,
    write_report,
    write_table_csv,
)


def _rows(task: str, values: dict[tuple[str, str, float], list[float]]) -> MetricsReport:
    rows = [
        ResultRow(dataset, variant, task, rate, seed, metric)
        for (dataset, variant, rate), metrics in values.items()
        for seed, metric in enumerate(metrics)
    ]
    return MetricsReport(rows)


@pytest.fixture
def classification():
    return _rows(
        "classification",
        {
            ("ecg", "sde-rnn", 0.0): [0.80, 0.90],
            ("ecg", "sde-pyr", 0.0): [0.90, 0.95],
            ("ecg", "sde-rnn", 0.6): [0.60, 0.70],
            ("ecg", "sde-pyr", 0.6): [0.70, 0.72],
            ("pen", "sde-rnn", 0.0): [0.50, 0.50],
            ("pen", "sde-pyr", 0.0): [0.40, 0.42],
            ("pen", "sde-rnn", 0.6): [0.30, 0.30],
            ("pen", "sde-pyr", 0.6): [0.20, 0.20],
        },
    )


def test_best_mask_direction_and_ties():
    means = pd.Series([0.2, 0.5, 0.5, np.nan])
    assert best_mask(means, higher_is_better=True).tolist() == [False, True, True, False]
    assert best_mask(means, higher_is_better=False).tolist() == [True, False, False, False]
    assert not best_mask(pd.Series([np.nan]), True).any()


def test_table_frame_flags_one_best_per_row(classification):
    frame = table_frame(classification)

    assert len(frame) == 8
    assert frame.groupby(["dataset", "rate"])["best"].sum().tolist() == [1, 1, 1, 1]
    best = frame[frame["best"]].set_index(["dataset", "rate"])["variant"].to_dict()
    assert best == {
        ("ecg", 0.0): "sde-pyr",
        ("ecg", 0.6): "sde-pyr",
        ("pen", 0.0): "sde-rnn",
        ("pen", 0.6): "sde-rnn",
    }


def test_text_table(classification):
    text = emit_table(classification)
    lines = text.splitlines()

    assert lines[0] == "classification accuracy, mean (std) over seeds"
    assert lines[1].split() == ["dataset", "rate", "sde-pyr", "sde-rnn"]
    assert "0.9250 (0.0250) *" in text
    assert "0.8500 (0.0500)" in text
    assert len(lines) == 3 + 4


def test_markdown_table_bolds_best(classification):
    md = emit_table(classification, "markdown")
    assert "**0.9250 (0.0250)**" in md
    assert "| dataset | rate | sde-pyr | sde-rnn |" in md


def test_single_cell_is_best():
    report = _rows("interpolation", {("periodic", "sde-rnn", 0.2): [0.1]})
    assert "0.1000 (0.0000) *" in emit_table(report)
    assert emit_table(report).startswith("interpolation mse")


def test_ties_are_all_marked():
    report = _rows(
        "interpolation",
        {("p", "sde-rnn", 0.2): [0.3], ("p", "sde-tvf-l", 0.2): [0.3], ("p", "sde-pyr", 0.2): [0.4]},
    )
    assert emit_table(report).count("*") == 2


def test_lower_mse_wins():
    report = _rows("interpolation", {("p", "sde-rnn", 0.2): [0.3], ("p", "sde-pyr", 0.2): [0.1]})
    frame = table_frame(report)
    assert frame.loc[frame["best"], "variant"].tolist() == ["sde-pyr"]


def test_missing_variant_cell_renders_dash():
    report = _rows("classification", {("a", "sde-rnn", 0.0): [0.5], ("b", "sde-pyr", 0.0): [0.6]})
    assert "-" in emit_table(report).splitlines()[3].split()


def test_empty_or_bad_style_raise(classification):
    with pytest.raises(ConfigError):
        emit_table(classification, "latex")
    with pytest.raises(ConfigError):
        emit_table(MetricsReport([ResultRow("d", "v", "classification", 0.0, 0, math.nan, error="X: y")]))


def test_csv_twin_matches_table_to_six_decimals(classification, tmp_path: Path):
    path = write_table_csv(classification, tmp_path / "t" / "results.csv")
    twin = pd.read_csv(path)
    agg = classification.aggregate()

    merged = twin.merge(agg, on=["dataset", "variant", "task", "rate"], suffixes=("_csv", ""))
    assert len(merged) == 8
    np.testing.assert_allclose(merged["mean_csv"], merged["mean"], atol=1e-6)
    np.testing.assert_allclose(merged["std_csv"], merged["std"], atol=1e-6)
    assert "0.92500000" in path.read_text(encoding="utf-8")


def test_curves_one_file_per_dataset(classification, tmp_path: Path):
    paths = emit_curves(classification, tmp_path / "curves")
    assert [p.name for p in paths] == ["ecg.csv", "pen.csv"]

    ecg = pd.read_csv(paths[0])
    assert list(ecg.columns) == ["rate", "sde-pyr_mean", "sde-pyr_std", "sde-rnn_mean", "sde-rnn_std"]
    assert ecg["rate"].tolist() == [0.0, 0.6]
    assert ecg["sde-rnn_mean"].tolist() == pytest.approx([0.85, 0.65])


def test_curves_need_two_rates(tmp_path: Path):
    report = _rows("classification", {("a", "sde-rnn", 0.0): [0.5]})
    with pytest.raises(ConfigError):
        emit_curves(report, tmp_path)


def test_summary_degradation(classification):
    summary = overall_summary(classification).set_index("variant")

    # rnn: (0.85 + 0.5) / 2 at 0.0, (0.65 + 0.3) / 2 at 0.6
    assert summary.loc["sde-rnn", "0.00"] == pytest.approx(0.675)
    assert summary.loc["sde-rnn", "degradation"] == pytest.approx(0.675 - 0.475)
    # population std of the per-dataset means: |0.85 - 0.5| / 2
    assert summary.loc["sde-rnn", "0.00_std"] == pytest.approx(0.175)
    assert summary.loc["sde-pyr", "0.60_std"] == pytest.approx(0.255)
    assert list(summary.columns) == ["0.00", "0.00_std", "0.60", "0.60_std", "degradation"]
    text = emit_summary(classification)
    assert "mean over datasets" in text
    assert "0.60_std" in text


def test_single_rate_summary_has_no_degradation():
    summary = overall_summary(_rows("classification", {("a", "sde-rnn", 0.0): [0.5]}))
    assert math.isnan(summary.loc[0, "degradation"])
    assert summary.loc[0, "0.00_std"] == 0.0


def test_write_report(classification, tmp_path: Path):
    written = write_report(classification, tmp_path)
    names = sorted(p.relative_to(tmp_path).as_posix() for p in written)

    assert names == [
        "curves/ecg.csv",
        "curves/pen.csv",
        "tables/results.csv",
        "tables/results.md",
        "tables/results.txt",
    ]
    assert "sde-pyr" in (tmp_path / "tables" / "results.txt").read_text(encoding="utf-8")
