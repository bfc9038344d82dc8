"""FALD1 aligned-dataset binary format (little-endian).

Layout: magic ``b"FALD1"``, u32 sample count, then per sample
f32[28] sensor, f32[1024] cam1, f32[1024] cam2, u8 label, f64 timestamp.
"""
import struct

import numpy as np

from .. import IMAGE_SIZE, N_SENSOR_FEATURES
from .records import SampleSet

MAGIC = b"FALD1"

RECORD = np.dtype([
    ("sensor", "<f4", (N_SENSOR_FEATURES,)),
    ("cam1", "<f4", (IMAGE_SIZE * IMAGE_SIZE,)),
    ("cam2", "<f4", (IMAGE_SIZE * IMAGE_SIZE,)),
    ("label", "u1"),
    ("timestamp", "<f8"),
])


def write_aligned(path, samples: SampleSet) -> None:
    n = len(samples)
    rec = np.zeros(n, dtype=RECORD)
    rec["sensor"] = samples.sensor
    rec["cam1"] = samples.cam1.reshape(n, -1)
    rec["cam2"] = samples.cam2.reshape(n, -1)
    rec["label"] = samples.labels
    rec["timestamp"] = samples.timestamps
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", n))
        fh.write(rec.tobytes())


def read_aligned(path) -> SampleSet:
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC) + 4)
        if head[: len(MAGIC)] != MAGIC or len(head) < len(MAGIC) + 4:
            raise ValueError(f"{path}: not a FALD1 file")
        (n,) = struct.unpack("<I", head[len(MAGIC):])
        body = fh.read()
    if len(body) != n * RECORD.itemsize:
        raise ValueError(f"{path}: expected {n} records ({n * RECORD.itemsize} bytes), found {len(body)} bytes")
    rec = np.frombuffer(body, dtype=RECORD, count=n)
    return SampleSet(
        sensor=rec["sensor"].astype(np.float32),
        cam1=rec["cam1"].reshape(n, IMAGE_SIZE, IMAGE_SIZE).astype(np.float32),
        cam2=rec["cam2"].reshape(n, IMAGE_SIZE, IMAGE_SIZE).astype(np.float32),
        labels=rec["label"].astype(np.int64),
        timestamps=rec["timestamp"].astype(np.float64),
    )
