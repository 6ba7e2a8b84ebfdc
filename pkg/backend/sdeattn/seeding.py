"""
seeding.py
~~~~~~~~~~
Derive independent, reproducible RNG streams from one master seed.

Streams are addressed by a tuple of keys: integers are used as-is,
strings are folded to 32 bits with CRC-32 so parameter names can serve as
keys.  ``numpy.random.SeedSequence`` with a ``spawn_key`` does the actual
splitting, which is why adding a new stream never shifts an old one.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"stream keys must be non-negative, got {part}")
    return int(part)


def seed_sequence(master: int, *keys: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=tuple(_key(k) for k in keys))


def stream(master: int, *keys: int | str) -> np.random.Generator:
    """Generator for the stream ``keys`` under ``master``."""
    return np.random.default_rng(seed_sequence(master, *keys))


def derive_seed(master: int, *keys: int | str) -> int:
    """A 64-bit integer seed for APIs that want a plain int."""
    state = seed_sequence(master, *keys).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


__all__ = ["seed_sequence", "stream", "derive_seed"]
