"""Mini-batch training with best-validation-F1 checkpoint selection."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..dataio.records import DatasetSplit, SampleSet
from ..metrics import evaluate
from ..tensorcore import make_optimizer, softmax_cross_entropy
from .checkpoint import Checkpoint
from .network import Network

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-3
    l2: float = 0.0
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 10
    select_metric: str = "f1"  # weighted F1 on the validation split
    seed: int = 42
    target_train_accuracy: Optional[float] = None

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (BatchNorm needs two samples)")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.select_metric not in ("f1", "accuracy", "loss"):
            raise ValueError(f"unknown select_metric {self.select_metric!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def baseline_train_config(**overrides) -> TrainConfig:
    """SGD preset for the baseline CNN: lr 0.001, L2 0.004, 5 epochs, batch 100."""
    cfg = dict(optimizer="sgd", lr=0.001, l2=0.004, max_epochs=5, batch_size=100, patience=5)
    cfg.update(overrides)
    return TrainConfig(**cfg)


def default_train_config(model_name: str, **overrides) -> TrainConfig:
    if model_name == "baseline-cnn":
        return baseline_train_config(**overrides)
    return TrainConfig(**overrides)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    cuts = list(range(0, n, batch_size))
    # a trailing batch of one would break BatchNorm; fold it into the previous one
    if len(cuts) > 1 and n - cuts[-1] < 2:
        cuts.pop()
    bounds = cuts[1:] + [n]
    return [order[lo:hi] for lo, hi in zip(cuts, bounds)]


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_accuracy: Optional[float] = None
    val_loss: Optional[float] = None
    val_accuracy: Optional[float] = None
    val_f1: Optional[float] = None


def _score(net, samples: SampleSet):
    labels, proba = net.predict(samples)
    rep = evaluate(samples.labels, labels)
    idx = np.arange(len(samples))
    loss = float(-np.mean(np.log(np.maximum(proba[idx, samples.labels].astype(np.float64), 1e-12))))
    return rep, loss


def train(net: Network, split, cfg: TrainConfig, stats=None, meta: Optional[dict] = None):
    """Train ``net`` in place; returns ``(checkpoint, history)``.

    ``split`` is a :class:`DatasetSplit` (validation drives checkpoint
    selection and early stopping) or a bare :class:`SampleSet` used for
    training only, in which case the final weights are kept.
    """
    if isinstance(split, DatasetSplit):
        train_set, val_set = split.train, split.val if len(split.val) else None
    else:
        train_set, val_set = split, None
    if len(train_set) < 2:
        raise ValueError("need at least 2 training samples")
    xs = net.input_arrays(train_set)
    y = train_set.labels
    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.l2)

    history: list[EpochRecord] = []
    best_score, best_state, best_epoch, stale = -math.inf, None, 0, 0
    net.zero_grad()
    for epoch in range(1, cfg.max_epochs + 1):
        total, seen = 0.0, 0
        for idx in _batches(len(y), cfg.batch_size, rng):
            logits = net.logits([x[idx] for x in xs], train=True)
            if not np.all(np.isfinite(logits)):
                raise TrainingDiverged(f"{net.spec.name}: non-finite logits in epoch {epoch}")
            loss, dlogits = softmax_cross_entropy(logits, y[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"{net.spec.name}: loss became {loss} in epoch {epoch}")
            net.backward(dlogits)
            opt.step(net)
            total += loss * len(idx)
            seen += len(idx)
        rec = EpochRecord(epoch, total / seen)

        if cfg.target_train_accuracy is not None:
            rec.train_accuracy = float(np.mean(net.predict(train_set)[0] == y))
        if val_set is not None:
            rep, vloss = _score(net, val_set)
            rec.val_loss, rec.val_accuracy, rec.val_f1 = vloss, rep.accuracy, rep.weighted["f1"]
            score = {"f1": rec.val_f1, "accuracy": rec.val_accuracy, "loss": -vloss}[cfg.select_metric]
            if score > best_score:
                best_score, best_state, best_epoch, stale = score, net.get_state(), epoch, 0
            else:
                stale += 1
        history.append(rec)
        log.info("%s epoch %d: loss %.4f val_f1 %s", net.spec.name, epoch, rec.loss, rec.val_f1)

        if cfg.target_train_accuracy is not None and rec.train_accuracy >= cfg.target_train_accuracy:
            break
        if val_set is not None and stale > cfg.patience:
            break

    if best_state is not None:
        net.set_state(best_state)
    info = {"best_epoch": best_epoch or len(history), "train_config": cfg.to_dict(), **(meta or {})}
    ckpt = Checkpoint.from_network(net, stats=stats, history=[asdict(h) for h in history], meta=info)
    return ckpt, history
