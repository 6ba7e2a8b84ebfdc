# backend/sdeattn/constants.py

"""
Global constants used across modules: experiment defaults and the
identifiers of the independent random streams derived from a master seed.
"""

from __future__ import annotations

from typing import Final

# ── Random streams ────────────────────────────────────────────────────────
# Each consumer draws from SeedSequence(master, spawn_key=(STREAM, ...)).
# Adding a new stream id never perturbs the existing ones.
STREAM_INIT: Final = 1  # parameter initialisation (one sub-key per name)
STREAM_SHUFFLE: Final = 2  # mini-batch sampling
STREAM_BROWNIAN: Final = 3  # Brownian paths (sub-key: pool, batch, iter)
STREAM_MCAR_TRAIN: Final = 4
STREAM_MCAR_TEST: Final = 5
STREAM_HOLDOUT: Final = 6  # interpolation conditioning subsets
STREAM_DATA: Final = 7  # synthetic dataset generation

# ── Model defaults ────────────────────────────────────────────────────────
LATENT_DIM: Final = 16
SDE_HIDDEN: Final = 50  # "50 units single layer MLP"
OUTPUT_HIDDEN: Final = 32
SUBSTEPS: Final = 5
ATTN_HEADS: Final = 2
SCHA_REDUCTION: Final = 2
STRIDE_BASE: Final = 2
MAX_PYRAMID_LEVELS: Final = 4
TVF_MAX_LEN: Final = 1024

# ── Optimiser / training defaults ─────────────────────────────────────────
LEARNING_RATE: Final = 1e-2
BETA1: Final = 0.9
BETA2: Final = 0.999
ADAM_EPS: Final = 1e-8
BATCH_SIZE: Final = 32
CLIP_NORM: Final = 5.0
ITERATIONS: Final = 100

# ── Sweep defaults ────────────────────────────────────────────────────────
MISSING_RATES: Final = (0.0, 0.3, 0.6, 0.9)
OBSERVED_RATES: Final = (0.1, 0.2, 0.3, 0.4)
SEEDS: Final = (0, 1, 2)
BEST_TIE_TOL: Final = 1e-9

VARIANTS: Final[dict[str, str]] = {
    "sde-rnn": "none",
    "sde-scha": "static-channel",
    "sde-tvf-l": "tvf-lstm",
    "sde-tvf-t": "tvf-transformer",
    "sde-pyr": "pyramidal",
}
"""Model roster → attention kind."""

ATTENTION_KINDS: Final = tuple(VARIANTS.values())

__all__ = [name for name in dir() if name.isupper()]
