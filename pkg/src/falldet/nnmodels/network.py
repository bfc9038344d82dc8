"""Runtime network built from a :class:`ModelSpec`."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..tensorcore.layers import ConcatLayer, LayerSpec, Sequential, ShapeError, softmax
from .architectures import ModelSpec

PREDICT_BATCH = 256


class Network:
    def __init__(self, spec: ModelSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.seed = seed
        self.dtype = dtype
        seeds = np.random.default_rng(seed).integers(0, 2**63, size=len(spec.branches) + 1)
        self.branches = [
            Sequential(list(b.layers), b.in_shape, int(s), dtype, prefix=f"{b.input}/")
            for b, s in zip(spec.branches, seeds)
        ]
        widths = [br.out_shape for br in self.branches]
        self.concat = None
        if len(self.branches) > 1:
            self.concat = ConcatLayer(LayerSpec("Concat"), "concat")
            head_in = self.concat.build_multi(widths)
        else:
            head_in = widths[0]
        self.head = Sequential(list(spec.head), head_in, int(seeds[-1]), dtype, prefix="head/")

    # -- inputs ---------------------------------------------------------------
    def input_arrays(self, inputs) -> list:
        """Arrays for each branch, reshaped to ``(N,) + in_shape``.

        ``inputs`` is a mapping from input role to array, or anything with an
        ``inputs(role)`` method (e.g. a SampleSet).
        """
        out = []
        for b in self.spec.branches:
            arr = inputs[b.input] if isinstance(inputs, Mapping) else inputs.inputs(b.input)
            arr = np.asarray(arr, dtype=self.dtype)
            n = arr.shape[0]
            if int(np.prod(arr.shape[1:])) != int(np.prod(b.in_shape)):
                raise ShapeError(f"{self.spec.name}: input {b.input!r} has per-sample shape "
                                 f"{arr.shape[1:]}, expected {b.in_shape}")
            out.append(arr.reshape((n,) + tuple(b.in_shape)))
        return out

    @staticmethod
    def _batch_len(xs) -> int:
        return xs[0].shape[0]

    # -- forward / backward -------------------------------------------------------
    def _logits_arrays(self, xs, train):
        feats = [br.logits(x, train) for br, x in zip(self.branches, xs)]
        joined = self.concat.forward(feats, train) if self.concat else feats[0]
        return self.head.logits(joined, train)

    def logits(self, inputs, train: bool = False) -> np.ndarray:
        xs = inputs if isinstance(inputs, list) else self.input_arrays(inputs)
        return self._logits_arrays(xs, train)

    def backward(self, dlogits):
        d = self.head.backward(dlogits)
        parts = self.concat.backward(d) if self.concat else [d]
        return [br.backward(p) for br, p in zip(self.branches, parts)]

    def predict_proba(self, inputs, batch_size: int = PREDICT_BATCH) -> np.ndarray:
        xs = self.input_arrays(inputs)
        n = self._batch_len(xs)
        out = np.empty((n, self.spec.n_classes), dtype=self.dtype)
        for lo in range(0, n, batch_size):
            sl = slice(lo, lo + batch_size)
            out[sl] = softmax(self._logits_arrays([x[sl] for x in xs], train=False))
        return out

    def predict(self, inputs, batch_size: int = PREDICT_BATCH):
        proba = self.predict_proba(inputs, batch_size)
        return proba.argmax(axis=1), proba

    # -- parameters -------------------------------------------------------------
    def all_layers(self) -> list:
        layers = [l for br in self.branches for l in br.layers]
        if self.concat:
            layers.append(self.concat)
        return layers + list(self.head.layers)

    def named_parameters(self):
        for layer in self.all_layers():
            yield from layer.named_parameters()

    def parameter_count(self) -> int:
        return int(sum(w.size for _, w, _ in self.named_parameters()))

    def zero_grad(self):
        for layer in self.all_layers():
            layer.zero_grad()

    def astype(self, dtype):
        for layer in self.all_layers():
            layer.astype(dtype)
        self.dtype = dtype
        return self

    def state_arrays(self) -> list:
        """Weights then buffers of every layer, in a fixed order: ``[(name, array)]``."""
        out = []
        for layer in self.all_layers():
            for k, v in layer.params.items():
                out.append((f"{layer.name}.{k}", v))
            for k, v in layer.buffers.items():
                out.append((f"{layer.name}.{k}", v))
        return out

    def get_state(self) -> list:
        return [(name, arr.copy()) for name, arr in self.state_arrays()]

    def set_state(self, state) -> None:
        by_layer = {l.name: l for l in self.all_layers()}
        expected = self.state_arrays()
        if [n for n, _ in state] != [n for n, _ in expected]:
            raise ValueError(f"{self.spec.name}: state names do not match the architecture")
        for (name, arr), (_, cur) in zip(state, expected):
            if tuple(np.shape(arr)) != cur.shape:
                raise ValueError(f"{name}: shape {np.shape(arr)} != {cur.shape}")
            layer_name, key = name.rsplit(".", 1)
            layer = by_layer[layer_name]
            store = layer.params if key in layer.params else layer.buffers
            store[key] = np.array(arr, dtype=cur.dtype).reshape(cur.shape)
