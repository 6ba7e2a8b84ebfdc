"""
tests/test_run_logging.py
~~~~~~~~~~~~~~~~~~~~~~~~~
The one-line-per-unit-of-work wrapper, the JSONL run log and the logging
bootstrap.
"""

from __future__ import annotations

import io
import logging
from pathlib import Path

import pytest

from sdeattn.run_logging import FORMAT, RunLog, logged_call, read_run_log, setup_logging


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for h in list(root.handlers):
        if h not in handlers:
            root.removeHandler(h)
    root.setLevel(level)


def test_logged_call_ok(caplog):
    with caplog.at_level(logging.INFO, logger="runs"):
        result = logged_call("cell frequency/sde-rnn r0.00 s0", lambda x: x * 2, 21)

    assert result == 42
    assert "cell frequency/sde-rnn r0.00 s0 → ok" in caplog.text


def test_logged_call_failure_reraises(caplog):
    def boom():
        raise RuntimeError("solver exploded")

    with caplog.at_level(logging.WARNING, logger="runs"):
        with pytest.raises(RuntimeError):
            logged_call("train x", boom)

    record = caplog.records[-1]
    assert record.levelno == logging.WARNING
    assert record.getMessage().startswith("FAIL train x")
    assert "RuntimeError: solver exploded" in record.getMessage()


def test_logged_call_can_swallow():
    assert logged_call("train x", lambda: 1 / 0, reraise=False) is None


def test_run_log_writes_jsonl(tmp_path: Path):
    path = tmp_path / "nested" / "run.jsonl"
    with RunLog(path) as log:
        log.write(iteration=0, loss=1.5)
        log.write(iteration=1, loss=0.75)

    assert read_run_log(path) == [{"iteration": 0, "loss": 1.5}, {"iteration": 1, "loss": 0.75}]


def test_run_log_without_path_is_a_no_op():
    with RunLog(None) as log:
        log.write(iteration=0)
    assert log.path is None


def test_read_run_log_skips_bad_lines(tmp_path: Path, caplog):
    path = tmp_path / "run.jsonl"
    path.write_text('{"iteration": 0}\n{truncated\n\n{"iteration": 2}\n', encoding="utf-8")
    with caplog.at_level(logging.WARNING, logger="runs"):
        records = read_run_log(path)

    assert [r["iteration"] for r in records] == [0, 2]
    assert "[runlog]" in caplog.text and ":2 unreadable" in caplog.text


def test_setup_logging_replaces_its_handler(restore_root_logger):
    first, second = io.StringIO(), io.StringIO()
    setup_logging("debug", first)
    setup_logging("warning", second)
    logging.getLogger("sweep").warning("cell failed")

    ours = [h for h in logging.getLogger().handlers if getattr(h, "_sdeattn", False)]
    assert len(ours) == 1
    assert first.getvalue() == ""
    assert second.getvalue() == "WARNING:     sweep - cell failed\n"
    assert logging.getLogger().level == logging.WARNING
    assert FORMAT.startswith("%(levelname)s:")
