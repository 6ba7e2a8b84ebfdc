"""
sdeattn
~~~~~~~
SDE-RNN sequence models with latent attention for irregular, partially
observed time series, plus the data, training and benchmark tooling
around them.
"""

from .checkpoint import Checkpoint
from .config import ExperimentConfig, echo_config, load_config
from .data import TimeSeriesBatch, apply_mcar, generate_periodic, hold_out_observation
from .datasets import DataConfig, load_pools
from .errors import SdeAttentionError
from .metrics import MetricsReport, ResultRow
from .model import ModelConfig, SdeRnnModel, forward
from .sweep import run_sweep
from .training import RunConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "DataConfig",
    "ExperimentConfig",
    "MetricsReport",
    "ModelConfig",
    "ResultRow",
    "RunConfig",
    "SdeAttentionError",
    "SdeRnnModel",
    "TimeSeriesBatch",
    "apply_mcar",
    "echo_config",
    "evaluate",
    "forward",
    "generate_periodic",
    "hold_out_observation",
    "load_config",
    "load_pools",
    "run_sweep",
    "train",
]
