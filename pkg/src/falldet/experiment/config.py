"""Experiment configuration and the data-configuration/model compatibility table."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

from ..metrics import CONFIGURATIONS
from ..nnmodels import MODEL_NAMES, default_train_config
from ..treemodels import PRESETS, RFConfig, preset

TREE_MODELS = ("xgb-like", "cat-like", "knn", "rf")

COMPATIBLE = {
    "S": ("sensor-mlp", "xgb-like", "cat-like", "knn", "rf"),
    "C1": ("cam-cnn", "baseline-cnn"),
    "C2": ("cam-cnn", "baseline-cnn"),
    "C1+C2": ("dual-cam-cnn",),
    "S+C1+C2": ("fusion",),
}

DEFAULT_SEED = 42


class IncompatibleConfig(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One training run.

    ``data`` is the path of a FALD1 file or ``{"synth": {...SynthConfig fields}}``.
    ``train`` holds overrides for the model's training settings: TrainConfig
    fields for neural models, GBTConfig fields for the boosted presets, RFConfig
    fields for ``rf`` and ``{"k": ...}`` for ``knn``.
    """

    data: Union[str, dict]
    configuration: str
    model: str
    train: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    out: str = "runs/run"

    def __post_init__(self):
        if self.configuration not in CONFIGURATIONS:
            raise IncompatibleConfig(f"unknown data configuration {self.configuration!r}; choose from {CONFIGURATIONS}")
        known = set(MODEL_NAMES) | set(TREE_MODELS)
        if self.model not in known:
            raise IncompatibleConfig(f"unknown model {self.model!r}; choose from {sorted(known)}")
        if self.model not in COMPATIBLE[self.configuration]:
            allowed = [c for c, models in COMPATIBLE.items() if self.model in models]
            raise IncompatibleConfig(
                f"model {self.model!r} cannot run on data configuration {self.configuration!r} "
                f"(it needs {' or '.join(allowed)})"
            )
        if isinstance(self.data, dict) and set(self.data) != {"synth"}:
            raise ValueError('data must be a FALD1 path or {"synth": {...}}')
        self.train = dict(self.train or {})

    @property
    def is_neural(self) -> bool:
        return self.model in MODEL_NAMES

    def model_options(self) -> dict:
        """Builder options for neural models (camera choice for single-camera nets)."""
        if self.model in ("cam-cnn", "baseline-cnn"):
            return {"camera": "cam1" if self.configuration == "C1" else "cam2"}
        return {}

    def settings(self):
        """The typed training settings object for this model."""
        overrides = dict(self.train)
        if self.is_neural:
            overrides.setdefault("seed", self.seed)
            return default_train_config(self.model, **overrides)
        if self.model in PRESETS:
            overrides.setdefault("seed", self.seed)
            return preset(self.model, **overrides)
        if self.model == "rf":
            overrides.setdefault("seed", self.seed)
            return RFConfig(**overrides)
        k = int(overrides.pop("k", 5))
        if overrides:
            raise ValueError(f"knn accepts only 'k', got {sorted(overrides)}")
        return {"k": k}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        unknown = set(d) - {"data", "configuration", "model", "train", "seed", "out"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path
