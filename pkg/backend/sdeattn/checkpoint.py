"""
checkpoint.py
~~~~~~~~~~~~~
Model checkpoints as ``.npz`` containers.

Layout: one float64 array per named parameter (row-major, the array's
own shape) plus ``__config__``, a JSON echo of :class:`ModelConfig`.
"""

from __future__ import annotations

import json
import logging
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import ModelConfig, SdeRnnModel

LOG = logging.getLogger("checkpoint")

CONFIG_KEY = "__config__"


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict[str, np.ndarray]

    @classmethod
    def from_model(cls, model: SdeRnnModel) -> "Checkpoint":
        return cls(config=model.config, state=model.store.state_dict())

    def to_model(self) -> SdeRnnModel:
        model = SdeRnnModel.create(self.config)
        model.store.load_state_dict(self.state)
        return model

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {CONFIG_KEY: np.array(json.dumps(self.config.to_dict(), sort_keys=True))}
        arrays.update(self.state)
        with path.open("wb") as fh:
            np.savez(fh, **arrays)
        LOG.info("checkpoint → %s (%d tensors)", path, len(self.state))
        return path

    @classmethod
    def load(cls, path: Path) -> "Checkpoint":
        path = Path(path)
        try:
            with np.load(path, allow_pickle=False) as npz:
                config = ModelConfig(**json.loads(str(npz[CONFIG_KEY])))
                state = {k: npz[k].copy() for k in npz.files if k != CONFIG_KEY}
        except (KeyError, ValueError, zipfile.BadZipFile) as exc:
            raise DataFormatError(f"{path}: not a model checkpoint ({exc})") from None
        return cls(config=config, state=state)


__all__ = ["Checkpoint"]
