"""Layer specs and forward/backward implementations.

Every layer works on a batch: the first axis of every array is the sample
axis. Spatial layers are channels-first, ``(N, C, H, W)`` for 2-D and
``(N, C, L)`` for 1-D. Convolution is valid-padded with stride 1, pooling is
valid with stride equal to the pool size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# A Tensor is a dense float ndarray (float32 for training, float64 for checks).
Tensor = np.ndarray

LAYER_KINDS = (
    "Dense", "Conv2D", "Conv1D", "MaxPool2D", "MaxPool1D", "BatchNorm",
    "Dropout", "Flatten", "Concat", "ReLU", "Softmax",
)

_REQUIRED = {
    "Dense": ("units",),
    "Conv2D": ("filters", "kernel"),
    "Conv1D": ("filters", "kernel"),
    "MaxPool2D": ("pool",),
    "MaxPool1D": ("pool",),
}


class ShapeError(ValueError):
    """Input shape incompatible with a layer."""


class CacheError(RuntimeError):
    """Backward called without a matching train-mode forward."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: Optional[int] = None
    filters: Optional[int] = None
    kernel: Optional[int] = None
    pool: Optional[int] = None
    rate: Optional[float] = None
    eps: float = 1e-5
    momentum: float = 0.9

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        for name in _REQUIRED.get(self.kind, ()):
            value = getattr(self, name)
            if value is None:
                raise ValueError(f"{self.kind} requires parameter {name!r}")
            if int(value) != value or value < 1:
                raise ValueError(f"{self.kind}.{name} must be a positive integer, got {value!r}")
        if self.kind == "Dropout":
            if self.rate is None:
                raise ValueError("Dropout requires parameter 'rate'")
            if not 0.0 <= self.rate < 1.0:
                raise ValueError(f"Dropout rate must lie in [0, 1), got {self.rate}")
        if self.kind == "BatchNorm":
            if not self.eps > 0:
                raise ValueError("BatchNorm eps must be positive")
            if not 0.0 <= self.momentum < 1.0:
                raise ValueError("BatchNorm momentum must lie in [0, 1)")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in ("units", "filters", "kernel", "pool", "rate"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.kind == "BatchNorm":
            out["eps"] = self.eps
            out["momentum"] = self.momentum
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)

    def __str__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.kind}({args})"


# Convenience constructors, used by the architecture builders.
def Dense(units):
    return LayerSpec("Dense", units=units)


def Conv2D(filters, kernel):
    return LayerSpec("Conv2D", filters=filters, kernel=kernel)


def Conv1D(filters, kernel):
    return LayerSpec("Conv1D", filters=filters, kernel=kernel)


def MaxPool2D(pool):
    return LayerSpec("MaxPool2D", pool=pool)


def MaxPool1D(pool):
    return LayerSpec("MaxPool1D", pool=pool)


def BatchNorm(eps=1e-5, momentum=0.9):
    return LayerSpec("BatchNorm", eps=eps, momentum=momentum)


def Dropout(rate):
    return LayerSpec("Dropout", rate=rate)


def Flatten():
    return LayerSpec("Flatten")


def ReLU():
    return LayerSpec("ReLU")


def Softmax():
    return LayerSpec("Softmax")


def output_shape(spec: LayerSpec, in_shape: Sequence[int]) -> tuple:
    """Per-sample output shape of ``spec`` applied to per-sample ``in_shape``."""
    in_shape = tuple(int(s) for s in in_shape)
    kind = spec.kind
    if kind == "Dense":
        if len(in_shape) != 1:
            raise ShapeError(f"Dense expects a vector per sample, got {in_shape}")
        return (spec.units,)
    if kind == "Conv2D":
        if len(in_shape) != 3:
            raise ShapeError(f"Conv2D expects (C, H, W), got {in_shape}")
        _, h, w = in_shape
        k = spec.kernel
        if h < k or w < k:
            raise ShapeError(f"Conv2D kernel {k} larger than input {in_shape}")
        return (spec.filters, h - k + 1, w - k + 1)
    if kind == "Conv1D":
        if len(in_shape) != 2:
            raise ShapeError(f"Conv1D expects (C, L), got {in_shape}")
        _, length = in_shape
        if length < spec.kernel:
            raise ShapeError(f"Conv1D kernel {spec.kernel} larger than input {in_shape}")
        return (spec.filters, length - spec.kernel + 1)
    if kind == "MaxPool2D":
        if len(in_shape) != 3:
            raise ShapeError(f"MaxPool2D expects (C, H, W), got {in_shape}")
        c, h, w = in_shape
        p = spec.pool
        if h < p or w < p:
            raise ShapeError(f"MaxPool2D pool {p} larger than input {in_shape}")
        return (c, h // p, w // p)
    if kind == "MaxPool1D":
        if len(in_shape) != 2:
            raise ShapeError(f"MaxPool1D expects (C, L), got {in_shape}")
        c, length = in_shape
        if length < spec.pool:
            raise ShapeError(f"MaxPool1D pool {spec.pool} larger than input {in_shape}")
        return (c, length // spec.pool)
    if kind == "Flatten":
        return (int(np.prod(in_shape)),)
    if kind == "Softmax":
        if len(in_shape) != 1:
            raise ShapeError(f"Softmax expects a vector per sample, got {in_shape}")
        return in_shape
    if kind == "Concat":
        raise ShapeError("Concat takes several inputs; use concat_shape")
    return in_shape  # ReLU, BatchNorm, Dropout


def concat_shape(in_shapes: Sequence[Sequence[int]]) -> tuple:
    if any(len(s) != 1 for s in in_shapes):
        raise ShapeError(f"Concat expects flat vectors, got {list(map(tuple, in_shapes))}")
    return (sum(int(s[0]) for s in in_shapes),)


def glorot_uniform(rng: np.random.Generator, shape, fan_in, fan_out, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class holding weights, gradients and the forward cache."""

    trainable = False

    def __init__(self, spec: LayerSpec, name: str):
        self.spec = spec
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.in_shape: Optional[tuple] = None
        self.out_shape: Optional[tuple] = None
        self._cache = None

    def build(self, in_shape, rng: np.random.Generator, dtype=np.float32) -> tuple:
        self.in_shape = tuple(in_shape)
        self.out_shape = output_shape(self.spec, in_shape)
        return self.out_shape

    def _check_input(self, x: np.ndarray):
        if self.in_shape is not None and tuple(x.shape[1:]) != self.in_shape:
            raise ShapeError(
                f"layer {self.name} ({self.spec.kind}) expects per-sample shape "
                f"{self.in_shape}, got {tuple(x.shape[1:])}"
            )

    def _take_cache(self):
        if self._cache is None:
            raise CacheError(f"backward on {self.name} without a train-mode forward")
        cache, self._cache = self._cache, None
        return cache

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self):
        for g in self.grads.values():
            g[...] = 0

    def astype(self, dtype):
        for store in (self.params, self.grads, self.buffers):
            for k in store:
                store[k] = store[k].astype(dtype)
        return self

    def named_parameters(self) -> Iterator[tuple[str, np.ndarray, np.ndarray]]:
        for k, v in self.params.items():
            yield f"{self.name}.{k}", v, self.grads[k]

    def __repr__(self):
        return f"{type(self).__name__}({self.name}: {self.spec})"


class DenseLayer(Layer):
    trainable = True

    def build(self, in_shape, rng, dtype=np.float32):
        out = super().build(in_shape, rng, dtype)
        (fan_in,) = self.in_shape
        units = self.spec.units
        self.params = {
            "W": glorot_uniform(rng, (fan_in, units), fan_in, units, dtype),
            "b": np.zeros(units, dtype=dtype),
        }
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        return out

    def forward(self, x, train=False):
        if x.ndim != 2:
            raise ShapeError(f"layer {self.name} (Dense) expects (N, F), got {x.shape}")
        self._check_input(x)
        self._cache = x if train else None
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        x = self._take_cache()
        self.grads["W"] += x.T @ dout
        self.grads["b"] += dout.sum(axis=0)
        return dout @ self.params["W"].T


class Conv2DLayer(Layer):
    trainable = True

    def build(self, in_shape, rng, dtype=np.float32):
        out = super().build(in_shape, rng, dtype)
        c = self.in_shape[0]
        f, k = self.spec.filters, self.spec.kernel
        self.params = {
            "W": glorot_uniform(rng, (f, c, k, k), c * k * k, f * k * k, dtype),
            "b": np.zeros(f, dtype=dtype),
        }
        self.grads = {k_: np.zeros_like(v) for k_, v in self.params.items()}
        return out

    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError(f"layer {self.name} (Conv2D) expects (N, C, H, W), got {x.shape}")
        self._check_input(x)
        k = self.spec.kernel
        win = sliding_window_view(x, (k, k), axis=(2, 3))  # N, C, Ho, Wo, k, k
        out = np.tensordot(win, self.params["W"], axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + self.params["b"][None, :, None, None]
        self._cache = x if train else None
        return np.ascontiguousarray(out)

    def backward(self, dout):
        x = self._take_cache()
        k = self.spec.kernel
        win = sliding_window_view(x, (k, k), axis=(2, 3))
        self.grads["W"] += np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))
        self.grads["b"] += dout.sum(axis=(0, 2, 3))
        # Input gradient is a full correlation of dout with the flipped kernel.
        padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        dwin = sliding_window_view(padded, (k, k), axis=(2, 3))  # N, F, H, W, k, k
        flipped = self.params["W"][:, :, ::-1, ::-1]
        dx = np.tensordot(dwin, flipped, axes=([1, 4, 5], [0, 2, 3]))  # N, H, W, C
        return np.ascontiguousarray(dx.transpose(0, 3, 1, 2))


class Conv1DLayer(Layer):
    trainable = True

    def build(self, in_shape, rng, dtype=np.float32):
        out = super().build(in_shape, rng, dtype)
        c = self.in_shape[0]
        f, k = self.spec.filters, self.spec.kernel
        self.params = {
            "W": glorot_uniform(rng, (f, c, k), c * k, f * k, dtype),
            "b": np.zeros(f, dtype=dtype),
        }
        self.grads = {k_: np.zeros_like(v) for k_, v in self.params.items()}
        return out

    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeError(f"layer {self.name} (Conv1D) expects (N, C, L), got {x.shape}")
        self._check_input(x)
        k = self.spec.kernel
        win = sliding_window_view(x, k, axis=2)  # N, C, Lo, k
        out = np.tensordot(win, self.params["W"], axes=([1, 3], [1, 2]))  # N, Lo, F
        out = out.transpose(0, 2, 1) + self.params["b"][None, :, None]
        self._cache = x if train else None
        return np.ascontiguousarray(out)

    def backward(self, dout):
        x = self._take_cache()
        k = self.spec.kernel
        win = sliding_window_view(x, k, axis=2)
        self.grads["W"] += np.tensordot(dout, win, axes=([0, 2], [0, 2]))
        self.grads["b"] += dout.sum(axis=(0, 2))
        padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1)))
        dwin = sliding_window_view(padded, k, axis=2)  # N, F, L, k
        dx = np.tensordot(dwin, self.params["W"][:, :, ::-1], axes=([1, 3], [0, 2]))
        return np.ascontiguousarray(dx.transpose(0, 2, 1))


class MaxPool2DLayer(Layer):
    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError(f"layer {self.name} (MaxPool2D) expects (N, C, H, W), got {x.shape}")
        self._check_input(x)
        p = self.spec.pool
        n, c, h, w = x.shape
        ho, wo = h // p, w // p
        blocks = x[:, :, : ho * p, : wo * p].reshape(n, c, ho, p, wo, p)
        blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, p * p)
        arg = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, arg) if train else None
        return out

    def backward(self, dout):
        shape, arg = self._take_cache()
        p = self.spec.pool
        n, c, h, w = shape
        ho, wo = h // p, w // p
        blocks = np.zeros((n, c, ho, wo, p * p), dtype=dout.dtype)
        np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
        blocks = blocks.reshape(n, c, ho, wo, p, p).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(shape, dtype=dout.dtype)
        dx[:, :, : ho * p, : wo * p] = blocks.reshape(n, c, ho * p, wo * p)
        return dx


class MaxPool1DLayer(Layer):
    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeError(f"layer {self.name} (MaxPool1D) expects (N, C, L), got {x.shape}")
        self._check_input(x)
        p = self.spec.pool
        n, c, length = x.shape
        lo = length // p
        blocks = x[:, :, : lo * p].reshape(n, c, lo, p)
        arg = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, arg) if train else None
        return out

    def backward(self, dout):
        shape, arg = self._take_cache()
        p = self.spec.pool
        n, c, length = shape
        lo = length // p
        blocks = np.zeros((n, c, lo, p), dtype=dout.dtype)
        np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
        dx = np.zeros(shape, dtype=dout.dtype)
        dx[:, :, : lo * p] = blocks.reshape(n, c, lo * p)
        return dx


class BatchNormLayer(Layer):
    """Normalises over every axis except the channel/feature axis 1."""

    trainable = True

    def build(self, in_shape, rng, dtype=np.float32):
        out = super().build(in_shape, rng, dtype)
        c = self.in_shape[0]
        self.params = {"gamma": np.ones(c, dtype=dtype), "beta": np.zeros(c, dtype=dtype)}
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.buffers = {"running_mean": np.zeros(c, dtype=dtype), "running_var": np.ones(c, dtype=dtype)}
        return out

    def _bshape(self, x):
        return (1, x.shape[1]) + (1,) * (x.ndim - 2)

    def forward(self, x, train=False):
        self._check_input(x)
        axes = (0,) + tuple(range(2, x.ndim))
        bshape = self._bshape(x)
        gamma = self.params["gamma"].reshape(bshape)
        beta = self.params["beta"].reshape(bshape)
        if not train:
            self._cache = None
            mean = self.buffers["running_mean"].reshape(bshape)
            var = self.buffers["running_var"].reshape(bshape)
            return (x - mean) / np.sqrt(var + self.spec.eps) * gamma + beta
        if x.shape[0] < 2:
            raise ShapeError(f"layer {self.name} (BatchNorm) needs batch size >= 2 in train mode")
        mean = x.mean(axis=axes, keepdims=True)
        var = x.var(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.spec.eps)
        xhat = (x - mean) * inv_std
        m = self.spec.momentum
        self.buffers["running_mean"] = (m * self.buffers["running_mean"] + (1 - m) * mean.ravel()).astype(x.dtype)
        self.buffers["running_var"] = (m * self.buffers["running_var"] + (1 - m) * var.ravel()).astype(x.dtype)
        self._cache = (xhat, inv_std, axes, bshape)
        return xhat * gamma + beta

    def backward(self, dout):
        xhat, inv_std, axes, bshape = self._take_cache()
        count = dout.size // dout.shape[1]
        self.grads["gamma"] += (dout * xhat).sum(axis=axes)
        self.grads["beta"] += dout.sum(axis=axes)
        dxhat = dout * self.params["gamma"].reshape(bshape)
        return (inv_std / count) * (
            count * dxhat
            - dxhat.sum(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
        )


class DropoutLayer(Layer):
    """Inverted dropout; ``frozen`` reuses the last mask (gradient checking)."""

    def __init__(self, spec, name):
        super().__init__(spec, name)
        self.rng = np.random.default_rng(0)
        self.frozen = False
        self.mask: Optional[np.ndarray] = None

    def build(self, in_shape, rng, dtype=np.float32):
        out = super().build(in_shape, rng, dtype)
        self.rng = np.random.default_rng(rng.integers(2**63))
        return out

    def forward(self, x, train=False):
        self._check_input(x)
        if not train or self.spec.rate == 0.0:
            self._cache = None if not train else np.ones((), dtype=x.dtype)
            return x
        if not (self.frozen and self.mask is not None and self.mask.shape == x.shape):
            keep = self.rng.random(x.shape) >= self.spec.rate
            self.mask = (keep / (1.0 - self.spec.rate)).astype(x.dtype)
        self._cache = self.mask
        return x * self.mask

    def backward(self, dout):
        return dout * self._take_cache()


class FlattenLayer(Layer):
    def forward(self, x, train=False):
        self._check_input(x)
        self._cache = x.shape if train else None
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._take_cache())


class ReLULayer(Layer):
    def forward(self, x, train=False):
        self._check_input(x)
        self._cache = (x > 0) if train else None
        return np.maximum(x, 0)

    def backward(self, dout):
        return dout * self._take_cache()


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class SoftmaxLayer(Layer):
    def forward(self, x, train=False):
        if x.ndim != 2:
            raise ShapeError(f"layer {self.name} (Softmax) expects (N, K), got {x.shape}")
        self._check_input(x)
        s = softmax(x)
        self._cache = s if train else None
        return s

    def backward(self, dout):
        s = self._take_cache()
        return s * (dout - (dout * s).sum(axis=1, keepdims=True))


class ConcatLayer(Layer):
    """Joins flat per-branch features along axis 1."""

    def build_multi(self, in_shapes) -> tuple:
        self.in_shapes = [tuple(s) for s in in_shapes]
        self.out_shape = concat_shape(in_shapes)
        return self.out_shape

    def forward(self, xs, train=False):
        widths = [x.shape[1:] for x in xs]
        if getattr(self, "in_shapes", None) is not None and [tuple(w) for w in widths] != self.in_shapes:
            raise ShapeError(f"layer {self.name} (Concat) expects {self.in_shapes}, got {widths}")
        if any(x.ndim != 2 for x in xs):
            raise ShapeError(f"layer {self.name} (Concat) expects flat inputs, got {widths}")
        self._cache = [x.shape[1] for x in xs] if train else None
        return np.concatenate(xs, axis=1)

    def backward(self, dout):
        sizes = self._take_cache()
        return np.split(dout, np.cumsum(sizes)[:-1], axis=1)


_LAYER_CLASSES = {
    "Dense": DenseLayer,
    "Conv2D": Conv2DLayer,
    "Conv1D": Conv1DLayer,
    "MaxPool2D": MaxPool2DLayer,
    "MaxPool1D": MaxPool1DLayer,
    "BatchNorm": BatchNormLayer,
    "Dropout": DropoutLayer,
    "Flatten": FlattenLayer,
    "ReLU": ReLULayer,
    "Softmax": SoftmaxLayer,
    "Concat": ConcatLayer,
}


def make_layer(spec: LayerSpec, name: str) -> Layer:
    return _LAYER_CLASSES[spec.kind](spec, name)


@dataclass
class Sequential:
    """A plain chain of layers with a trailing Softmax treated as the output."""

    specs: list
    in_shape: tuple
    seed: int = 0
    dtype: type = np.float32
    prefix: str = ""
    layers: list = field(init=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        self.layers = []
        shape = tuple(self.in_shape)
        counts: dict[str, int] = {}
        for spec in self.specs:
            idx = counts.get(spec.kind, 0)
            counts[spec.kind] = idx + 1
            layer = make_layer(spec, f"{self.prefix}{spec.kind.lower()}_{idx}")
            shape = layer.build(shape, rng, self.dtype)
            self.layers.append(layer)
        self.out_shape = shape

    @property
    def body(self):
        if self.layers and self.layers[-1].spec.kind == "Softmax":
            return self.layers[:-1]
        return self.layers

    def logits(self, x, train=False):
        for layer in self.body:
            x = layer.forward(x, train)
        return x

    def forward(self, x, train=False):
        out = self.logits(x, train)
        if len(self.body) != len(self.layers):
            out = softmax(out)
        return out

    def backward(self, dout):
        for layer in reversed(self.body):
            dout = layer.backward(dout)
        return dout

    def all_layers(self):
        return list(self.layers)

    def named_parameters(self):
        for layer in self.layers:
            yield from layer.named_parameters()

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def astype(self, dtype):
        for layer in self.layers:
            layer.astype(dtype)
        self.dtype = dtype
        return self
