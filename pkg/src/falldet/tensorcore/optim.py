"""SGD and Adam with coupled L2 regularisation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


def _check_finite(name, grad):
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient(f"non-finite gradient in {name}")


@dataclass
class SGD:
    lr: float = 0.001
    l2: float = 0.0
    step_count: int = 0

    algorithm = "SGD"

    def step(self, model):
        """w <- w - lr * (g + l2 * w), then zero the gradients."""
        named = list(model.named_parameters())
        for name, _, g in named:
            _check_finite(name, g)
        for _, w, g in named:
            update = g + self.l2 * w if self.l2 else g
            w -= (self.lr * update).astype(w.dtype)
            g[...] = 0
        self.step_count += 1


@dataclass
class Adam:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    l2: float = 0.0
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    algorithm = "Adam"

    def step(self, model):
        named = list(model.named_parameters())
        for name, _, g in named:
            _check_finite(name, g)
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name, w, g in named:
            grad = g + self.l2 * w if self.l2 else g
            if name not in self.m:
                self.m[name] = np.zeros_like(w)
                self.v[name] = np.zeros_like(w)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            w -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(w.dtype)
            g[...] = 0


def make_optimizer(name: str, lr: float, l2: float = 0.0, **kwargs):
    name = name.lower()
    if name == "sgd":
        return SGD(lr=lr, l2=l2)
    if name == "adam":
        return Adam(lr=lr, l2=l2, **kwargs)
    raise ValueError(f"unknown optimizer {name!r}")
