"""Checkpoint files: a JSON manifest plus an adjacent little-endian f32 blob.

The manifest lists every stored array (weights and batchnorm running
statistics) with its shape; the blob holds them back to back in manifest
order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..dataio.records import StandardizationStats
from .architectures import build
from .network import Network

FORMAT = "falldet-nn-checkpoint/1"


@dataclass
class Checkpoint:
    model_name: str
    options: dict
    seed: int
    arrays: list  # [(name, float32 array)]
    stats: Optional[StandardizationStats] = None
    history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_network(cls, net: Network, stats=None, history=None, meta=None) -> "Checkpoint":
        arrays = [(n, a.astype(np.float32)) for n, a in net.get_state()]
        return cls(net.spec.name, dict(net.spec.options), net.seed, arrays, stats, history or [], meta or {})

    def to_network(self) -> Network:
        net = Network(build(self.model_name, **self.options), seed=self.seed)
        net.set_state(self.arrays)
        return net

    def manifest(self, blob_name: str) -> dict:
        return {
            "format": FORMAT,
            "engine_version": __version__,
            "model": self.model_name,
            "options": self.options,
            "seed": self.seed,
            "weights_file": blob_name,
            "layers": [{"name": n, "shape": list(a.shape)} for n, a in self.arrays],
            "stats": self.stats.to_dict() if self.stats is not None else None,
            "history": self.history,
            "meta": self.meta,
        }

    def save(self, path) -> Path:
        """Write ``<path>`` (manifest) and ``<stem>.weights.bin`` next to it."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        blob = path.with_name(path.stem + ".weights.bin")
        with open(blob, "wb") as fh:
            for _, arr in self.arrays:
                fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        with open(path, "w") as fh:
            json.dump(self.manifest(blob.name), fh, indent=1)
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        with open(path) as fh:
            man = json.load(fh)
        if man.get("format") != FORMAT:
            raise ValueError(f"{path}: not a neural checkpoint manifest")
        raw = np.fromfile(path.parent / man["weights_file"], dtype="<f4")
        expected = sum(int(np.prod(l["shape"])) for l in man["layers"])
        if raw.size != expected:
            raise ValueError(f"{path}: weight blob has {raw.size} values, manifest expects {expected}")
        arrays, offset = [], 0
        for entry in man["layers"]:
            size = int(np.prod(entry["shape"]))
            arrays.append((entry["name"], raw[offset:offset + size].reshape(entry["shape"]).astype(np.float32)))
            offset += size
        return cls(man["model"], man["options"], man["seed"], arrays,
                   StandardizationStats.from_dict(man.get("stats")), man.get("history", []), man.get("meta", {}))


def predict(model, samples):
    """Class indices and probability rows from a checkpoint or a network."""
    net = model.to_network() if isinstance(model, Checkpoint) else model
    return net.predict(samples)
