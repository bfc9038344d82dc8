"""Seeded synthetic multimodal data for desk-scale runs.

Sensor features are class-conditional Gaussians. Each camera frame shows a
bright rectangle whose position and size depend on the class (camera 2 is
the horizontal mirror of camera 1) over a noisy background; with
probability ``blank_prob`` a frame shows background only, so each camera on
its own is an imperfect witness. Classes are recorded as separate trials
at 18 Hz with a pause in between, and frame clocks carry a few ms of jitter.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .. import IMAGE_SIZE, N_CLASSES, N_SENSOR_FEATURES
from .align import align
from .images import write_frames
from .records import ColumnManifest, FrameSet, SampleSet, SensorTable


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 50
    seed: int = 7
    sensor_sigma: float = 0.5
    mean_scale: float = 0.35
    blank_prob: float = 0.15
    pixel_noise: float = 0.1
    position_jitter: int = 1
    rate_hz: float = 18.0
    frame_jitter: float = 0.01
    trial_gap: float = 2.0
    start_time: float = 1_530_000_000.0

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")


class SynthData(NamedTuple):
    sensors: SensorTable
    frames_cam1: FrameSet
    frames_cam2: FrameSet


# (top, left, height, width) of the class rectangle on a 32x32 canvas.
_BOXES = [
    (2 + 10 * (c // 4), 1 + 8 * (c % 4), 6 + (c % 3), 4 + (c // 4) % 3)
    for c in range(N_CLASSES)
]


def class_means(cfg: SynthConfig) -> np.ndarray:
    """The (12, 28) sensor means used by :func:`synth_generate` for ``cfg``."""
    return np.random.default_rng(cfg.seed).normal(0.0, 1.0, (N_CLASSES, N_SENSOR_FEATURES)) * cfg.mean_scale


def _render(rng, cls, cfg, mirror):
    img = 0.2 + cfg.pixel_noise * rng.standard_normal((IMAGE_SIZE, IMAGE_SIZE))
    if rng.random() >= cfg.blank_prob:
        top, left, h, w = _BOXES[cls]
        j = cfg.position_jitter
        dy, dx = rng.integers(-j, j + 1, size=2) if j else (0, 0)
        top = int(np.clip(top + dy, 0, IMAGE_SIZE - h))
        left = int(np.clip(left + dx, 0, IMAGE_SIZE - w))
        img[top:top + h, left:left + w] += 0.6 + 0.1 * rng.random()
    img = np.clip(img, 0.0, 1.0)
    if mirror:
        img = img[:, ::-1]
    return np.rint(img * 255.0) / 255.0


def synth_generate(n_per_class: int = 50, seed: int = 7, cfg: SynthConfig | None = None,
                   manifest: ColumnManifest | None = None) -> SynthData:
    cfg = cfg or SynthConfig(n_per_class=n_per_class, seed=seed)
    manifest = manifest or ColumnManifest.load()
    means = class_means(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    n = cfg.n_per_class
    period = 1.0 / cfg.rate_hz

    times, feats, raw_labels = [], [], []
    ftimes = {1: [], 2: []}
    images = {1: [], 2: []}
    start = cfg.start_time
    for cls in range(N_CLASSES):
        steps = np.arange(n) * period
        times.append(start + steps)
        feats.append(means[cls] + cfg.sensor_sigma * rng.standard_normal((n, N_SENSOR_FEATURES)))
        raw_labels.append(np.full(n, manifest.label_ids[cls], dtype=np.float64))
        for cam in (1, 2):
            jitter = rng.uniform(-cfg.frame_jitter, cfg.frame_jitter, n)
            millis = np.rint((start + steps + jitter) * 1000.0)
            ftimes[cam].append(millis / 1000.0)
            images[cam].extend(_render(rng, cls, cfg, mirror=(cam == 2)) for _ in range(n))
        start += n * period + cfg.trial_gap

    sensors = SensorTable(np.concatenate(times), np.concatenate(feats), np.concatenate(raw_labels))
    frames = [
        FrameSet(cam, np.concatenate(ftimes[cam]), np.array(images[cam]))
        for cam in (1, 2)
    ]
    return SynthData(sensors, frames[0], frames[1])


def synth_samples(n_per_class: int = 50, seed: int = 7, cfg: SynthConfig | None = None) -> SampleSet:
    """Generated data already aligned into samples."""
    data = synth_generate(n_per_class, seed, cfg)
    return align(data.sensors, data.frames_cam1, data.frames_cam2)


def write_synth_dir(out_dir, data: SynthData, manifest: ColumnManifest | None = None) -> dict:
    """Write ``sensors.csv`` and ``cam1/``, ``cam2/`` PNG directories."""
    manifest = manifest or ColumnManifest.load()
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = out_dir / "sensors.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([manifest.time_column, *manifest.feature_columns, manifest.label_column])
        s = data.sensors
        for t, f, y in zip(s.timestamps, s.features, s.labels):
            writer.writerow([repr(float(t)), *(repr(float(v)) for v in f), str(int(y))])
    write_frames(out_dir / "cam1", data.frames_cam1)
    write_frames(out_dir / "cam2", data.frames_cam2)
    return {"csv": str(csv_path), "cam1": str(out_dir / "cam1"), "cam2": str(out_dir / "cam2")}
