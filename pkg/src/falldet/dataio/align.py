"""Nearest-timestamp pairing of sensor rows with camera frames."""
from __future__ import annotations

import logging

import numpy as np

from .records import ColumnManifest, FrameSet, SampleSet, SensorTable

log = logging.getLogger(__name__)

DEFAULT_MAX_GAP = 0.5


class EmptyStreamError(ValueError):
    pass


def nearest_indices(frame_times, query_times):
    """Index of the nearest frame for every query time, ties to the earlier frame.

    ``frame_times`` must be sorted ascending. Returns ``(index, gap)`` arrays.
    """
    frame_times = np.asarray(frame_times, dtype=np.float64)
    q = np.asarray(query_times, dtype=np.float64)
    if frame_times.size == 0:
        raise EmptyStreamError("frame stream is empty")
    if np.any(np.diff(frame_times) < 0):
        raise ValueError("frame timestamps must be sorted")
    right = np.clip(np.searchsorted(frame_times, q, side="left"), 0, len(frame_times) - 1)
    left = np.clip(right - 1, 0, len(frame_times) - 1)
    gap_left = np.abs(frame_times[left] - q)
    gap_right = np.abs(frame_times[right] - q)
    use_left = gap_left <= gap_right
    idx = np.where(use_left, left, right)
    return idx, np.where(use_left, gap_left, gap_right)


def align(
    sensors: SensorTable,
    frames_cam1: FrameSet,
    frames_cam2: FrameSet,
    max_gap: float = DEFAULT_MAX_GAP,
    manifest: ColumnManifest | None = None,
) -> SampleSet:
    """Pair each sensor row with the nearest frame of each camera.

    Rows farther than ``max_gap`` seconds from either camera are dropped;
    the count is logged and stored in ``meta["dropped_gap"]``.
    """
    if len(frames_cam1) == 0 or len(frames_cam2) == 0:
        empty = 1 if len(frames_cam1) == 0 else 2
        raise EmptyStreamError(f"camera {empty} has no frames")
    manifest = manifest or ColumnManifest.load()
    idx1, gap1 = nearest_indices(frames_cam1.timestamps, sensors.timestamps)
    idx2, gap2 = nearest_indices(frames_cam2.timestamps, sensors.timestamps)
    keep = (gap1 <= max_gap) & (gap2 <= max_gap)
    n_dropped = int((~keep).sum())
    if n_dropped:
        log.info("align: dropped %d sensor rows farther than %.3fs from a frame", n_dropped, max_gap)
    out = SampleSet(
        sensor=sensors.features[keep],
        cam1=frames_cam1.images[idx1[keep]],
        cam2=frames_cam2.images[idx2[keep]],
        labels=manifest.class_index(sensors.labels[keep]),
        timestamps=sensors.timestamps[keep],
    )
    out.meta["dropped_gap"] = n_dropped
    return out
