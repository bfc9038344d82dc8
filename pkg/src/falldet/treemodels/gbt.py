"""Second-order gradient boosting for softmax multiclass classification.

Each round computes softmax gradients ``g = p - y`` and diagonal Hessians
``h = p (1 - p)`` for every class and grows one regression tree per class by
exact greedy search over all thresholds, maximising

    gain = 1/2 [G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - (G_L+G_R)^2/(H_L+H_R+lam)]

with leaf weights ``-G/(H+lam)``. Class scores accumulate as
``base + lr * sum(tree outputs)``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import N_CLASSES
from ..tensorcore.layers import softmax
from .tree import DecisionTree, first_best, midpoint, sorted_columns

log = logging.getLogger(__name__)

FORMAT = "falldet-gbt/1"


@dataclass(frozen=True)
class GBTConfig:
    n_estimators: int = 100
    learning_rate: float = 0.5
    max_depth: int = 6
    min_samples_leaf: int = 1
    reg_lambda: float = 1.0
    preset: str = "xgb-like"
    seed: int = 42
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in [0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")


PRESETS = {
    "xgb-like": GBTConfig(n_estimators=100, learning_rate=0.5, max_depth=6, preset="xgb-like", seed=42),
    "cat-like": GBTConfig(n_estimators=500, learning_rate=0.25, max_depth=12, preset="cat-like", seed=42),
}


def preset(name: str, **overrides) -> GBTConfig:
    try:
        return replace(PRESETS[name], **overrides)
    except KeyError:
        raise ValueError(f"unknown GBT preset {name!r}; choose from {sorted(PRESETS)}") from None


def split_gain(GL, HL, GR, HR, lam):
    return 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - (GL + GR) ** 2 / (HL + HR + lam))


def best_split(X, g, h, lam, min_leaf):
    """Best ``(gain, feature, threshold)`` over all features; ``None`` if no valid split.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    m = len(g)
    if m < 2 * min_leaf:
        return None
    order, xs = sorted_columns(X)
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    G, H = g.sum(), h.sum()
    gains = split_gain(GL, HL, G - GL, H - HL, lam)
    n_left = np.arange(1, m)[:, None]
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
    gains = np.where(valid, gains, -np.inf)
    flat = gains.T.ravel()  # feature-major, so argmax breaks ties by feature then position
    best = first_best(flat)
    if best < 0:
        return None
    f, pos = divmod(best, m - 1)
    return float(flat[best]), f, midpoint(xs[pos, f], xs[pos + 1, f])


# gains at rounding-noise level do not justify a split
MIN_GAIN = 1e-12


def grow_tree(X, g, h, max_depth, lam, min_leaf) -> DecisionTree:
    tree = DecisionTree()

    def grow(idx, depth):
        gs, hs = g[idx], h[idx]
        leaf_value = float(-gs.sum() / (hs.sum() + lam))
        found = best_split(X[idx], gs, hs, lam, min_leaf) if depth < max_depth else None
        if found is None or found[0] <= MIN_GAIN:
            return tree.add_leaf(leaf_value)
        _, f, thr = found
        node = tree.add_split(f, thr)
        goes_left = X[idx, f] < thr
        tree.left[node] = grow(idx[goes_left], depth + 1)
        tree.right[node] = grow(idx[~goes_left], depth + 1)
        return node

    grow(np.arange(len(g)), 0)
    return tree


def tree_output(tree: DecisionTree, X) -> np.ndarray:
    return tree.leaf_values()[tree.apply(X)]


def log_loss(scores, y) -> float:
    z = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


@dataclass
class ForestModel:
    """Boosted ensemble: ``rounds[r]`` holds one tree per class."""

    config: GBTConfig
    n_features: int
    rounds: list = field(default_factory=list)
    scales: list = field(default_factory=list)  # per-round multiplier, normally the learning rate
    base_score: float = 0.0
    train_loss: list = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        scores = np.full((len(X), self.config.n_classes), self.base_score)
        for trees, scale in zip(self.rounds, self.scales):
            for k, tree in enumerate(trees):
                scores[:, k] += scale * tree_output(tree, X)
        return scores

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X):
        proba = self.predict_proba(X)
        return proba.argmax(axis=1), proba

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "config": asdict(self.config),
            "n_features": self.n_features,
            "base_score": self.base_score,
            "scales": self.scales,
            "train_loss": self.train_loss,
            "rounds": [[t.to_dict() for t in trees] for trees in self.rounds],
        }

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        if d.get("format") != FORMAT:
            raise ValueError("not a GBT model file")
        return cls(GBTConfig(**d["config"]), d["n_features"],
                   [[DecisionTree.from_dict(t) for t in trees] for trees in d["rounds"]],
                   list(d["scales"]), d["base_score"], list(d.get("train_loss", [])))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


MAX_BACKTRACK = 20


def gbt_fit(X, y, cfg: GBTConfig | None = None) -> ForestModel:
    """Fit a boosted softmax ensemble.

    Training log-loss never increases across rounds: a round that would
    raise it has its step halved until it does not (logged; with the
    presets this is rare).
    """
    cfg = cfg or PRESETS["xgb-like"]
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"X must be (n, d) matching y, got {X.shape} and {y.shape}")
    if np.isnan(X).any():
        raise ValueError("features contain NaN")
    if len(y) < 2:
        raise ValueError("need at least 2 samples")
    if len(y) < cfg.min_samples_leaf:
        raise ValueError(f"{len(y)} samples is fewer than min_samples_leaf={cfg.min_samples_leaf}")
    if y.min() < 0 or y.max() >= cfg.n_classes:
        raise ValueError(f"labels must lie in [0, {cfg.n_classes})")

    K = cfg.n_classes
    onehot = np.eye(K)[y]
    model = ForestModel(cfg, X.shape[1])
    scores = np.full((len(y), K), model.base_score)
    loss = log_loss(scores, y)
    model.train_loss.append(loss)
    for r in range(cfg.n_estimators):
        p = softmax(scores)
        grad = p - onehot
        hess = p * (1.0 - p)
        trees = [grow_tree(X, grad[:, k], hess[:, k], cfg.max_depth, cfg.reg_lambda, cfg.min_samples_leaf)
                 for k in range(K)]
        step = np.column_stack([tree_output(t, X) for t in trees])
        scale = cfg.learning_rate
        for _ in range(MAX_BACKTRACK):
            new_loss = log_loss(scores + scale * step, y)
            if new_loss <= loss:
                break
            scale /= 2.0
        else:
            scale, new_loss = 0.0, loss
        if scale != cfg.learning_rate:
            log.info("gbt round %d: step reduced to %g to keep log-loss nonincreasing", r, scale)
        scores = scores + scale * step
        loss = new_loss
        model.rounds.append(trees)
        model.scales.append(scale)
        model.train_loss.append(loss)
    return model


def gbt_predict(model: ForestModel, X):
    """Argmax labels and softmax probability rows."""
    return model.predict(X)
