"""Record containers.

Bulk data lives in column arrays (``SensorTable``, ``FrameSet``,
``SampleSet``); indexing one row yields the per-record view
(``SensorRecord``, ``FrameRecord``, ``AlignedSample``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple, Optional

import numpy as np

from .. import IMAGE_SIZE, N_CLASSES, N_SENSOR_FEATURES


@dataclass(frozen=True)
class ColumnManifest:
    time_column: str
    label_column: str
    feature_columns: tuple
    label_ids: tuple
    label_names: tuple = ()

    def __post_init__(self):
        if len(self.label_ids) != N_CLASSES or len(set(self.label_ids)) != N_CLASSES:
            raise ValueError(f"manifest must list {N_CLASSES} distinct label ids")

    @classmethod
    def load(cls, path=None) -> "ColumnManifest":
        if path is None:
            text = resources.files("falldet").joinpath("data/upfall_columns.json").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        d = json.loads(text)
        return cls(
            time_column=d["time_column"],
            label_column=d["label_column"],
            feature_columns=tuple(d["feature_columns"]),
            label_ids=tuple(int(i) for i in d["label_ids"]),
            label_names=tuple(d.get("label_names", ())),
        )

    def class_index(self, raw_ids) -> np.ndarray:
        """Map raw activity ids to contiguous class indices 0..11."""
        lookup = {raw: i for i, raw in enumerate(self.label_ids)}
        raw_ids = np.asarray(raw_ids)
        try:
            return np.array([lookup[int(r)] for r in raw_ids], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown activity id {exc.args[0]}") from None


class SensorRecord(NamedTuple):
    timestamp: float
    features: np.ndarray
    label: float  # raw activity id; NaN when missing


class FrameRecord(NamedTuple):
    timestamp: float
    camera_id: int
    pixels: np.ndarray


class AlignedSample(NamedTuple):
    sensor: np.ndarray
    cam1: np.ndarray
    cam2: np.ndarray
    label: int
    timestamp: float


@dataclass
class SensorTable:
    timestamps: np.ndarray  # (n,) float64 seconds
    features: np.ndarray  # (n, 28) float64
    labels: np.ndarray  # (n,) float64 raw ids, NaN if missing
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        features = np.asarray(self.features, dtype=np.float64)
        width = features.shape[-1] if features.ndim == 2 else N_SENSOR_FEATURES
        self.features = features.reshape(len(self.timestamps), width if features.size == 0 else -1)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if not (len(self.features) == len(self.labels) == len(self.timestamps)):
            raise ValueError("sensor columns have different lengths")

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return SensorRecord(float(self.timestamps[i]), self.features[i], float(self.labels[i]))
        return SensorTable(self.timestamps[i], self.features[i], self.labels[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def rows(self) -> np.ndarray:
        return np.column_stack([self.timestamps, self.features, self.labels])


@dataclass
class FrameSet:
    camera_id: int
    timestamps: np.ndarray  # (n,) float64, sorted
    images: np.ndarray  # (n, 32, 32) float, in [0, 1]

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, i):
        return FrameRecord(float(self.timestamps[i]), self.camera_id, self.images[i])


@dataclass
class SampleSet:
    """Aligned multimodal samples in column form."""

    sensor: np.ndarray  # (n, 28)
    cam1: np.ndarray  # (n, 32, 32)
    cam2: np.ndarray  # (n, 32, 32)
    labels: np.ndarray  # (n,) contiguous class indices
    timestamps: np.ndarray  # (n,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.labels)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.sensor = np.asarray(self.sensor).reshape(n, N_SENSOR_FEATURES)
        self.cam1 = np.asarray(self.cam1).reshape(n, IMAGE_SIZE, IMAGE_SIZE)
        self.cam2 = np.asarray(self.cam2).reshape(n, IMAGE_SIZE, IMAGE_SIZE)
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if len(self.timestamps) != n:
            raise ValueError("sample columns have different lengths")
        if n and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise ValueError("labels must be class indices in [0, 12)")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return AlignedSample(self.sensor[i], self.cam1[i], self.cam2[i], int(self.labels[i]), float(self.timestamps[i]))
        return self.subset(i)

    def subset(self, idx) -> "SampleSet":
        return SampleSet(
            self.sensor[idx], self.cam1[idx], self.cam2[idx],
            self.labels[idx], self.timestamps[idx], dict(self.meta),
        )

    def with_sensor(self, sensor) -> "SampleSet":
        return SampleSet(sensor, self.cam1, self.cam2, self.labels, self.timestamps, dict(self.meta))

    def inputs(self, name: str) -> np.ndarray:
        """Array for one model input role: ``sensor``, ``cam1`` or ``cam2``."""
        if name not in ("sensor", "cam1", "cam2"):
            raise KeyError(f"unknown input {name!r}")
        return getattr(self, name)

    @classmethod
    def concatenate(cls, sets) -> "SampleSet":
        sets = list(sets)
        return cls(
            np.concatenate([s.sensor for s in sets]),
            np.concatenate([s.cam1 for s in sets]),
            np.concatenate([s.cam2 for s in sets]),
            np.concatenate([s.labels for s in sets]),
            np.concatenate([s.timestamps for s in sets]),
        )


@dataclass
class DatasetSplit:
    train: SampleSet
    val: SampleSet
    test: SampleSet
    seed: int
    ratios: tuple = (0.6, 0.2, 0.2)

    def part(self, name: str) -> SampleSet:
        if name not in ("train", "val", "test"):
            raise KeyError(f"unknown split {name!r}")
        return getattr(self, name)


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    fitted_on: str = "train"

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> Optional["StandardizationStats"]:
        if d is None:
            return None
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64), d.get("fitted_on", "train"))
