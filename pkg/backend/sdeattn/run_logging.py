"""
run_logging.py
~~~~~~~~~~~~~~
Logging bootstrap plus a tiny wrapper that prints **one concise log line**
per unit of work (a sweep cell, a training run) and a line-delimited JSON
writer for per-iteration training records.

Usage example
-------------
>>> from .run_logging import logged_call
>>> run = logged_call("train periodic/sde-rnn s0", train, cfg, pool, run_cfg)
INFO:     runs - train periodic/sde-rnn s0 → ok (8123 ms)
"""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, TextIO, TypeVar

LOG = logging.getLogger("runs")

FORMAT = "%(levelname)s:     %(name)s - %(message)s"

T = TypeVar("T")


def setup_logging(level: str | int | None = None, stream: TextIO | None = None) -> None:
    """
    Route every package logger to stdout with the house format.

    ``level`` defaults to ``$LOG_LEVEL`` (``info``).  Calling twice replaces
    the handler instead of stacking a second one.
    """
    level = level or os.getenv("LOG_LEVEL", "info")
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, "_sdeattn", False):
            root.removeHandler(h)
    handler = logging.StreamHandler(stream or sys.stdout)
    handler.setFormatter(logging.Formatter(FORMAT))
    handler._sdeattn = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)


def _serialise(obj: Any) -> str:
    """Best-effort JSON serialiser for logging."""
    try:
        return json.dumps(obj, sort_keys=True)
    except Exception:  # noqa: BLE001
        return str(obj)


def logged_call(
    label: str,
    fn: Callable[..., T],
    *args: Any,
    reraise: bool = True,
    **kwargs: Any,
) -> T | None:
    """
    Run ``fn(*args, **kwargs)`` **and** emit a concise log line.

    Parameters
    ----------
    label:
        Short human tag, e.g. ``"cell periodic/sde-pyr r0.30 s1"``.
    reraise:
        *True* ⇒ log ``FAIL …`` and propagate the exception.
        *False* ⇒ log ``FAIL …`` and return ``None``; the caller decides.
    """
    t0 = time.perf_counter()
    try:
        result = fn(*args, **kwargs)
    except Exception as exc:
        latency_ms = (time.perf_counter() - t0) * 1000.0
        LOG.warning("FAIL %s %.0f ms %s: %s", label, latency_ms, type(exc).__name__, exc)
        if reraise:
            raise
        return None
    latency_ms = (time.perf_counter() - t0) * 1000.0
    LOG.info("%s → ok (%.0f ms)", label, latency_ms)
    return result


class RunLog:
    """Append-only JSONL file; one record per training iteration."""

    def __init__(self, path: Path | None) -> None:
        self.path = Path(path) if path is not None else None
        self._fh: TextIO | None = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", encoding="utf-8")

    def write(self, **record: Any) -> None:
        if self._fh is not None:
            self._fh.write(_serialise(record) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "RunLog":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def read_run_log(path: Path) -> list[dict[str, Any]]:
    """Parse a JSONL run log; unreadable lines are skipped with a warning."""
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            LOG.warning("[runlog] %s:%d unreadable: %s", path, lineno, exc)
    return records


__all__ = ["setup_logging", "logged_call", "RunLog", "read_run_log", "FORMAT"]
