"""
errors.py
~~~~~~~~~
Exception hierarchy shared by every module.

Everything raised on purpose by this package derives from
:class:`SdeAttentionError`, so a sweep cell can catch one type and record
the message without swallowing genuine bugs (``TypeError`` & co).
"""

from __future__ import annotations

from typing import Any


class SdeAttentionError(Exception):
    """Root of the package's exception tree."""


class ShapeError(SdeAttentionError, ValueError):
    """Operand shapes are incompatible."""


class TapeError(SdeAttentionError):
    """Misuse of the gradient tape (non-scalar loss, double backward …)."""


class NonFiniteError(SdeAttentionError, FloatingPointError):
    """A forward op produced NaN/Inf while finiteness checks were enabled."""


class SolverError(SdeAttentionError, ValueError):
    """Bad solver input: non-monotone grid, path/grid mismatch, dt <= 0."""


class IntegrationDiverged(SdeAttentionError):
    """The latent state left the finite range during integration."""

    def __init__(self, message: str, rows: list[int] | None = None) -> None:
        super().__init__(message)
        self.rows = rows or []


class LossError(SdeAttentionError, ValueError):
    """A loss has nothing to average over."""


class DataFormatError(SdeAttentionError, ValueError):
    """A dataset file (or in-memory batch) violates its format."""


class ConfigError(SdeAttentionError, ValueError):
    """Unknown key, bad value or inconsistent experiment configuration."""


class TrainingAborted(SdeAttentionError):
    """Training stopped early; ``run`` carries the partial record."""

    def __init__(self, message: str, run: Any = None) -> None:
        super().__init__(message)
        self.run = run


__all__ = [
    "SdeAttentionError",
    "ShapeError",
    "TapeError",
    "NonFiniteError",
    "SolverError",
    "IntegrationDiverged",
    "LossError",
    "DataFormatError",
    "ConfigError",
    "TrainingAborted",
]
