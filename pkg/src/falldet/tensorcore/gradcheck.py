"""Central finite-difference gradient checks.

Models passed to :func:`grad_check` need ``logits(inputs, train)``,
``backward(dlogits)``, ``named_parameters()`` and ``all_layers()``; both
:class:`~falldet.tensorcore.layers.Sequential` and the multi-branch
networks in :mod:`falldet.nnmodels` qualify.
"""
from __future__ import annotations

import copy
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .layers import BatchNormLayer, ConcatLayer, DropoutLayer, Layer, MaxPool1DLayer, MaxPool2DLayer, ReLULayer
from .losses import softmax_cross_entropy

# Finite differences are evaluated on an extended-precision copy of the model
# so that roundoff (~eps * loss / h) stays far below the 1e-8 error floor.
ORACLE_DTYPE = np.longdouble


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst: str
    analytic: float
    numeric: float
    n_checked: int
    n_skipped: int = 0

    def __float__(self):
        return self.max_rel_error


def rel_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def _entries(size, max_entries, rng):
    if max_entries is None or size <= max_entries:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_entries, replace=False))


@contextmanager
def _frozen(layers):
    """Freeze dropout masks and restore batchnorm running stats afterwards."""
    saved = [(l, {k: v.copy() for k, v in l.buffers.items()}) for l in layers if isinstance(l, BatchNormLayer)]
    drops = [l for l in layers if isinstance(l, DropoutLayer)]
    for d in drops:
        d.frozen = True
        d.mask = None
    try:
        yield
    finally:
        for d in drops:
            d.frozen = False
        for layer, bufs in saved:
            layer.buffers = bufs


def _kinks(layers):
    """The piecewise decisions of the last train forward: ReLU gates and pooling winners."""
    out = []
    for layer in layers:
        if isinstance(layer, ReLULayer):
            out.append(layer._cache)
        elif isinstance(layer, (MaxPool1DLayer, MaxPool2DLayer)):
            out.append(layer._cache[1])
    return out


def _same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def _cast_inputs(inputs, dtype):
    if isinstance(inputs, dict):
        return {k: np.asarray(v, dtype=dtype) for k, v in inputs.items()}
    if isinstance(inputs, (list, tuple)):
        return [np.asarray(v, dtype=dtype) for v in inputs]
    return np.asarray(inputs, dtype=dtype)


def grad_check(model, inputs, labels, h=1e-5, max_entries=None, seed=0,
               oracle_dtype=ORACLE_DTYPE) -> GradCheckResult:
    """Compare backprop weight gradients of the cross-entropy loss with central differences.

    The analytic gradients come from ``model`` in float64. The numeric ones
    come from a copy of the model cast to ``oracle_dtype``. ``max_entries``
    caps how many entries of each weight tensor are probed (chosen at random
    with ``seed``); ``None`` probes all of them. Probes whose perturbation
    flips a ReLU gate or a max-pool winner are skipped and counted in
    ``n_skipped``.
    """
    for name, w, _ in model.named_parameters():
        if w.dtype != np.float64:
            raise ValueError(f"grad_check needs float64 weights; {name} is {w.dtype}")
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)

    with _frozen(model.all_layers()):
        model.zero_grad()
        _, dlogits = softmax_cross_entropy(model.logits(_cast_inputs(inputs, np.float64), train=True), labels)
        model.backward(dlogits)
        analytic = {name: g.copy() for name, _, g in model.named_parameters()}
        model.zero_grad()

        # the copy carries the frozen dropout masks drawn above
        oracle = copy.deepcopy(model).astype(oracle_dtype)
        oracle_inputs = _cast_inputs(inputs, oracle_dtype)

        def loss_at():
            return softmax_cross_entropy(oracle.logits(oracle_inputs, train=True), labels)[0]

        oracle_layers = oracle.all_layers()
        loss_at()
        base = [k.copy() for k in _kinks(oracle_layers)]

        worst = GradCheckResult(0.0, "", 0.0, 0.0, 0)
        count = skipped = 0
        for name, w, _ in oracle.named_parameters():
            flat = w.reshape(-1)
            for i in _entries(flat.size, max_entries, rng):
                old = flat[i]
                flat[i] = old + h
                plus = loss_at()
                crossed = not _same(base, _kinks(oracle_layers))
                flat[i] = old - h
                minus = loss_at()
                crossed = crossed or not _same(base, _kinks(oracle_layers))
                flat[i] = old
                if crossed:
                    # the probe straddles a ReLU/max-pool kink: no derivative to compare
                    skipped += 1
                    continue
                num = (plus - minus) / (2 * h)
                ana = analytic[name].reshape(-1)[i]
                err = float(rel_error(ana, num))
                count += 1
                if err > worst.max_rel_error:
                    worst = GradCheckResult(err, f"{name}[{i}]", float(ana), float(num), 0)
        model.zero_grad()
    worst.n_checked = count
    worst.n_skipped = skipped
    return worst


def check_layer(layer: Layer, inputs, h=1e-5, seed=0, oracle_dtype=ORACLE_DTYPE) -> GradCheckResult:
    """Gradient check of one built layer against the scalar ``sum(out * R)``.

    Checks both the input gradient(s) and every weight gradient. ``inputs``
    is one array, or a list of arrays for Concat.
    """
    rng = np.random.default_rng(seed)
    multi = isinstance(layer, ConcatLayer)
    xs = [np.array(x, dtype=np.float64) for x in (inputs if multi else [inputs])]

    def run(target, args, train=True):
        return target.forward(args if multi else args[0], train=train)

    with _frozen([layer]):
        out = run(layer, xs)
        weights = rng.standard_normal(out.shape)

        layer.zero_grad()
        run(layer, xs)
        dx = layer.backward(weights)
        dxs = dx if multi else [dx]
        analytic = {f"input{j}": g.copy() for j, g in enumerate(dxs)}
        for k, g in layer.grads.items():
            analytic[k] = g.copy()
        layer.zero_grad()

        oracle = copy.deepcopy(layer).astype(oracle_dtype)
        oxs = [x.astype(oracle_dtype) for x in xs]
        oweights = weights.astype(oracle_dtype)
        targets = {f"input{j}": x for j, x in enumerate(oxs)}
        targets.update(oracle.params)

        def objective():
            return np.sum(run(oracle, oxs) * oweights)

        objective()
        base = [k.copy() for k in _kinks([oracle])]
        worst = GradCheckResult(0.0, "", 0.0, 0.0, 0)
        count = skipped = 0
        for key, arr in targets.items():
            flat = arr.reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                plus = objective()
                crossed = not _same(base, _kinks([oracle]))
                flat[i] = old - h
                minus = objective()
                crossed = crossed or not _same(base, _kinks([oracle]))
                flat[i] = old
                if crossed:
                    skipped += 1
                    continue
                num = (plus - minus) / (2 * h)
                ana = analytic[key].reshape(-1)[i]
                err = float(rel_error(ana, num))
                count += 1
                if err > worst.max_rel_error:
                    worst = GradCheckResult(err, f"{layer.name}.{key}[{i}]", float(ana), float(num), 0)
    worst.n_checked = count
    worst.n_skipped = skipped
    return worst
