"""
ucr_loader.py
~~~~~~~~~~~~~
Read UCR/UEA classification archives into :class:`TimeSeriesBatch` pairs.

Formats
-------
* **Repository text format** (``*.ts``): ``@directive value`` header lines,
  then ``@data``; each data line holds the dimensions separated by ``:``
  (values comma-separated inside a dimension) and the class label last.
  ``?`` marks a missing value.  ``#`` starts a comment line.
* **CSV fallback**: one row per series, no header: ``label, v…``, where the
  ``T·D`` values are channel-major (all of channel 0, then channel 1 …).
  Empty cells and ``?`` are missing.

Both splits are z-normalised per channel with train statistics computed
on the fully observed training data; missingness is applied afterwards by
the experiment code.  Timestamps are the regular indices rescaled to
``[0, 1]``.

Usage example
-------------
>>> train, test = load_dataset("data/BasicMotions/BasicMotions_TRAIN.ts")
>>> train.values.shape       # [T, N, D]
(100, 40, 6)
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .data import TimeSeriesBatch, apply_normalizer, fit_normalizer
from .errors import DataFormatError

LOG = logging.getLogger("ucr_loader")

_KNOWN_DIRECTIVES = {
    "problemname",
    "timestamps",
    "missing",
    "univariate",
    "dimensions",
    "equallength",
    "serieslength",
    "classlabel",
    "targetlabel",
    "data",
}


@dataclass
class RawSeries:
    """Unnormalised series as parsed from disk."""

    values: np.ndarray  # [N, D, T], NaN where missing
    labels: list[str]
    name: str = ""
    class_names: list[str] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


# ── Repository text format ────────────────────────────────────────────────
def _parse_value(token: str, path: Path, lineno: int) -> float:
    token = token.strip()
    if token in {"?", ""}:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: bad value {token!r}") from None


def parse_ts(path: Path) -> RawSeries:
    """Parse one ``.ts`` file (equal-length series with class labels)."""
    path = Path(path)
    header: dict[str, str] = {}
    rows: list[list[list[float]]] = []
    labels: list[str] = []
    in_data = False
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not in_data:
                if not line.startswith("@"):
                    raise DataFormatError(f"{path}:{lineno}: expected a @directive, got {line[:40]!r}")
                key, _, value = line[1:].partition(" ")
                key = key.lower()
                if key not in _KNOWN_DIRECTIVES:
                    raise DataFormatError(f"{path}:{lineno}: unknown directive @{key}")
                if key == "data":
                    in_data = True
                else:
                    header[key] = value.strip()
                continue
            *dims, label = line.split(":")
            if not dims:
                raise DataFormatError(f"{path}:{lineno}: series without a class label")
            rows.append([[_parse_value(tok, path, lineno) for tok in d.split(",")] for d in dims])
            labels.append(label.strip())

    if not in_data:
        raise DataFormatError(f"{path}: missing @data section")
    if header.get("timestamps", "false").lower() == "true":
        raise DataFormatError(f"{path}: timestamped series are not supported")
    class_spec = header.get("classlabel", "").split()
    if not class_spec or class_spec[0].lower() != "true":
        raise DataFormatError(f"{path}: @classLabel true <labels…> is required")
    class_names = class_spec[1:]
    if not rows:
        raise DataFormatError(f"{path}: no series after @data")

    n_dims = len(rows[0])
    length = len(rows[0][0])
    for i, row in enumerate(rows):
        if len(row) != n_dims or any(len(d) != length for d in row):
            raise DataFormatError(
                f"{path}: series {i} has inconsistent lengths "
                f"({[len(d) for d in row]}, expected {n_dims}×{length})"
            )
    if "dimensions" in header and int(header["dimensions"]) != n_dims:
        raise DataFormatError(f"{path}: @dimensions {header['dimensions']} but found {n_dims}")
    if "serieslength" in header and int(header["serieslength"]) != length:
        raise DataFormatError(f"{path}: @seriesLength {header['serieslength']} but found {length}")
    return RawSeries(
        values=np.asarray(rows, dtype=np.float64),
        labels=labels,
        name=header.get("problemname", path.stem),
        class_names=class_names,
    )


# ── CSV fallback ──────────────────────────────────────────────────────────
def read_csv_series(path: Path, dims: int = 1) -> RawSeries:
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            header=None,
            na_values=["?", ""],
            keep_default_na=False,
            dtype={0: str},
            float_precision="round_trip",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    width = frame.shape[1] - 1
    if width < 1 or width % dims:
        raise DataFormatError(f"{path}: {width} values per row is not a multiple of {dims} dims")
    try:
        values = frame.iloc[:, 1:].to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return RawSeries(
        values=values.reshape(len(frame), dims, width // dims),
        labels=[s.strip() for s in frame.iloc[:, 0].astype(str)],
        name=re.sub(r"_(TRAIN|TEST)$", "", path.stem, flags=re.IGNORECASE),
    )


def write_csv_series(path: Path, batch: TimeSeriesBatch, class_names: Sequence[str] | None = None) -> Path:
    """Write *batch* in the CSV fallback layout (missing entries left empty)."""
    if batch.labels is None:
        raise DataFormatError("CSV fallback needs labels")
    names = list(class_names) if class_names is not None else [str(i) for i in range(batch.labels.max() + 1)]
    # [T, N, D] → [N, D, T] → channel-major rows
    values = np.where(batch.mask > 0, batch.values, np.nan).transpose(1, 2, 0).reshape(batch.size, -1)
    frame = pd.DataFrame(values)
    frame.insert(0, "label", [names[k] for k in batch.labels])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, header=False, index=False, na_rep="")
    return path


# ── Assembly ──────────────────────────────────────────────────────────────
def _sort_key(name: str) -> tuple[int, float | str]:
    try:
        return (0, float(name))
    except ValueError:
        return (1, name)


def _encode(raw: RawSeries, class_names: list[str], path: Path) -> np.ndarray:
    index = {c: i for i, c in enumerate(class_names)}
    unknown = sorted({lab for lab in raw.labels if lab not in index})
    if unknown:
        raise DataFormatError(f"{path}: unknown class label(s) {unknown}")
    return np.array([index[lab] for lab in raw.labels], dtype=np.int64)


def to_batch(raw: RawSeries, labels: np.ndarray, split: str) -> TimeSeriesBatch:
    values = raw.values.transpose(2, 0, 1)  # [T, N, D]
    mask = (~np.isnan(values)).astype(np.float64)
    length = values.shape[0]
    ts = np.arange(length) / (length - 1) if length > 1 else np.zeros(1)
    return TimeSeriesBatch(
        values=np.nan_to_num(values, nan=0.0),
        timestamps=ts,
        mask=mask,
        labels=labels,
        meta={"dataset": raw.name, "split": split, "class_names": raw.class_names},
    )


def _sibling_test(train_path: Path) -> Path | None:
    stem = train_path.stem
    for pat, rep in (("_TRAIN", "_TEST"), ("_train", "_test")):
        if stem.endswith(pat):
            cand = train_path.with_name(stem[: -len(pat)] + rep + train_path.suffix)
            if cand.exists():
                return cand
    return None


def read_split(path: Path, fmt: str = "auto", dims: int = 1) -> RawSeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    fmt = fmt.lower()
    if fmt == "auto":
        fmt = "ts" if path.suffix.lower() == ".ts" else "csv"
    if fmt == "ts":
        return parse_ts(path)
    if fmt == "csv":
        return read_csv_series(path, dims)
    raise DataFormatError(f"unknown dataset format {fmt!r}")


def load_dataset(
    train_path: Path,
    test_path: Path | None = None,
    fmt: str = "auto",
    *,
    dims: int = 1,
    normalize: bool = True,
) -> tuple[TimeSeriesBatch, TimeSeriesBatch | None]:
    """
    Load a train split and its test split (``*_TEST`` sibling when not given).

    Returns:
        ``(train, test)``; *test* is ``None`` when no test file exists.

    Raises:
        DataFormatError: malformed header, inconsistent lengths, unknown
                         class label, train/test shape disagreement.
    """
    train_path = Path(train_path)
    test_path = Path(test_path) if test_path is not None else _sibling_test(train_path)
    train_raw = read_split(train_path, fmt, dims)
    class_names = train_raw.class_names or sorted(set(train_raw.labels), key=_sort_key)
    train_raw.class_names = class_names
    train = to_batch(train_raw, _encode(train_raw, class_names, train_path), "train")

    test = None
    if test_path is not None:
        test_raw = read_split(test_path, fmt, dims)
        test_raw.class_names = class_names
        if test_raw.shape[1:] != train_raw.shape[1:]:
            raise DataFormatError(
                f"{test_path}: shape {test_raw.shape[1:]} differs from train {train_raw.shape[1:]}"
            )
        test = to_batch(test_raw, _encode(test_raw, class_names, test_path), "test")

    if normalize:
        norm = fit_normalizer(train)
        train = apply_normalizer(train, norm)
        test = apply_normalizer(test, norm) if test is not None else None

    LOG.info(
        "loaded %s: train %d × %d × %d, test %s, %d classes",
        train_raw.name,
        train.size,
        train.length,
        train.dims,
        test.size if test is not None else "-",
        len(class_names),
    )
    return train, test


__all__ = [
    "RawSeries",
    "parse_ts",
    "read_csv_series",
    "write_csv_series",
    "read_split",
    "to_batch",
    "load_dataset",
]
