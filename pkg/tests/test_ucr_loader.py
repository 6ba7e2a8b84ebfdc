"""
tests/test_ucr_loader.py
~~~~~~~~~~~~~~~~~~~~~~~~
Repository ``.ts`` parsing against the fixture excerpt, the CSV fallback and
the error surface of :func:`load_dataset`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from sdeattn.data import TimeSeriesBatch
from sdeattn.errors import DataFormatError
from sdeattn.ucr_loader import load_dataset, parse_ts, read_csv_series, read_split, write_csv_series

FIXTURES = Path(__file__).parent / "fixtures"
TRAIN_TS = FIXTURES / "Tiny_TRAIN.ts"


def _write(path: Path, body: str) -> Path:
    path.write_text(body, encoding="utf-8")
    return path


HEADER = "@problemName Broken\n@timeStamps false\n@classLabel true a b\n@data\n"


# ── .ts format ────────────────────────────────────────────────────────────
def test_parse_ts_fixture():
    raw = parse_ts(TRAIN_TS)

    assert raw.name == "Tiny"
    assert raw.shape == (10, 2, 4)
    assert raw.class_names == ["up", "down"]
    assert raw.labels[:2] == ["up", "down"]
    assert np.isnan(raw.values[2, 1, 2])
    assert raw.values[0, 1, 3] == 1.3


def test_load_dataset_finds_test_sibling_and_normalises():
    train, test = load_dataset(TRAIN_TS)

    assert train.values.shape == (4, 10, 2)
    assert test.values.shape == (4, 4, 2)
    assert train.labels.tolist() == [0, 1] * 5
    assert test.labels.tolist() == [0, 1, 0, 1]
    np.testing.assert_allclose(train.timestamps, [0.0, 1 / 3, 2 / 3, 1.0])
    assert train.mask[2, 2, 1] == 0.0
    assert train.meta["class_names"] == ["up", "down"]

    observed = train.mask.sum(axis=(0, 1))
    mean = train.values.sum(axis=(0, 1)) / observed
    np.testing.assert_allclose(mean, 0.0, atol=1e-12)
    var = ((train.values - mean) ** 2 * train.mask).sum(axis=(0, 1)) / observed
    np.testing.assert_allclose(var, 1.0, rtol=1e-12)


def test_load_without_normalisation_keeps_raw_values():
    train, _ = load_dataset(TRAIN_TS, normalize=False)
    assert train.values[3, 0, 1] == 1.3


@pytest.mark.parametrize(
    "body",
    [
        "@problemName Broken\n@classLabel true a b\n0.1,0.2:a\n",
        "@problemName Broken\n@classLabel true a b\n@data\n",
        "@problemName Broken\n@bogus 1\n@data\n0.1:a\n",
        "@problemName Broken\n@timeStamps true\n@classLabel true a\n@data\n(0,1):a\n",
        "@problemName Broken\n@classLabel false\n@data\n0.1,0.2:a\n",
        HEADER + "0.1,0.2:a\n0.1,0.2,0.3:b\n",
        HEADER + "0.1,x:a\n",
    ],
)
def test_malformed_ts_rejected(tmp_path: Path, body: str):
    with pytest.raises(DataFormatError):
        parse_ts(_write(tmp_path / "Broken.ts", body))


def test_unknown_test_label_rejected(tmp_path: Path):
    train = _write(tmp_path / "X_TRAIN.ts", HEADER + "0.1,0.2:a\n0.3,0.4:b\n")
    _write(tmp_path / "X_TEST.ts", HEADER + "0.1,0.2:c\n")
    with pytest.raises(DataFormatError):
        load_dataset(train)


def test_shape_disagreement_rejected(tmp_path: Path):
    train = _write(tmp_path / "X_TRAIN.ts", HEADER + "0.1,0.2:a\n0.3,0.4:b\n")
    _write(tmp_path / "X_TEST.ts", HEADER + "0.1,0.2,0.3:a\n")
    with pytest.raises(DataFormatError):
        load_dataset(train)


def test_missing_test_split_is_none(tmp_path: Path):
    train = _write(tmp_path / "Solo.ts", HEADER + "0.1,0.2:a\n0.3,0.4:b\n")
    _, test = load_dataset(train)
    assert test is None


def test_missing_file_raises(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        read_split(tmp_path / "nope.ts")


def test_unknown_format_rejected():
    with pytest.raises(DataFormatError):
        read_split(TRAIN_TS, fmt="arff")


# ── CSV fallback ──────────────────────────────────────────────────────────
def test_csv_round_trip_is_exact(tmp_path: Path, rng):
    values = rng.normal(size=(5, 3, 2))
    mask = np.ones_like(values)
    mask[1, 0, 1] = 0.0
    batch = TimeSeriesBatch(values=values, timestamps=np.linspace(0, 1, 5), mask=mask, labels=[1, 0, 1])

    path = write_csv_series(tmp_path / "R_TRAIN.csv", batch, class_names=["no", "yes"])
    raw = read_csv_series(path, dims=2)

    assert raw.name == "R"
    assert raw.labels == ["yes", "no", "yes"]
    expected = np.where(mask > 0, values, np.nan).transpose(1, 2, 0)
    np.testing.assert_array_equal(raw.values, expected)


def test_csv_pair_loads_with_label_order(tmp_path: Path):
    (tmp_path / "C_TRAIN.csv").write_text("2,0.1,0.2,0.3\n10,0.3,0.2,0.1\n2,0.0,,0.2\n")
    (tmp_path / "C_TEST.csv").write_text("10,0.5,0.5,0.5\n")
    train, test = load_dataset(tmp_path / "C_TRAIN.csv", normalize=False)

    # numeric labels sort numerically
    assert train.meta["class_names"] == ["2", "10"]
    assert train.labels.tolist() == [0, 1, 0]
    assert test.labels.tolist() == [1]
    assert train.mask[1, 2, 0] == 0.0


def test_csv_width_must_divide_dims(tmp_path: Path):
    path = tmp_path / "W.csv"
    path.write_text("a,1,2,3\n")
    with pytest.raises(DataFormatError):
        read_csv_series(path, dims=2)


def test_csv_needs_labels(tmp_path: Path):
    batch = TimeSeriesBatch(values=np.zeros((2, 1, 1)), timestamps=[0.0, 1.0], mask=np.ones((2, 1, 1)))
    with pytest.raises(DataFormatError):
        write_csv_series(tmp_path / "n.csv", batch)
