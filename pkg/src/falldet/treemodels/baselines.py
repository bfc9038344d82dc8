"""Classical baselines: brute-force KNN and a bagged Gini random forest."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import N_CLASSES
from .tree import DecisionTree, first_best, midpoint, sorted_columns

RF_FORMAT = "falldet-rf/1"


def _check_features(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if np.isnan(X).any():
        raise ValueError(f"{name} contains NaN")
    return X


def vote(counts) -> np.ndarray:
    """Row-wise argmax of vote counts; ties go to the smallest class index."""
    return np.argmax(counts, axis=1)


def knn_predict(X_train, y_train, X_query, k: int = 5, n_classes: int = N_CLASSES) -> np.ndarray:
    """Majority label of the ``k`` Euclidean-nearest training rows.

    Equal distances are ordered by training index; equal votes go to the
    smallest class index.
    """
    X_train = _check_features(X_train, "X_train")
    X_query = _check_features(X_query, "X_query")
    y_train = np.asarray(y_train, dtype=np.int64)
    n = len(X_train)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if X_query.shape[1] != X_train.shape[1]:
        raise ValueError("query width does not match training width")
    out = np.empty(len(X_query), dtype=np.int64)
    for start in range(0, len(X_query), 512):
        q = X_query[start:start + 512]
        d2 = ((q[:, None, :] - X_train[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        labels = y_train[nearest]
        counts = np.zeros((len(q), n_classes), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(len(q)), k), labels.ravel()), 1)
        out[start:start + 512] = vote(counts)
    return out


def gini(counts) -> np.ndarray:
    """Gini impurity of class-count rows (last axis = classes)."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / total[..., None]
        out = 1.0 - (p**2).sum(axis=-1)
    return np.where(total > 0, out, 0.0)


def best_gini_split(X, y, features, n_classes, min_leaf=1):
    """Best ``(impurity_drop, feature, threshold)`` over ``features``, or ``None``.

    The drop is parent impurity minus the size-weighted child impurity.
    """
    m = len(y)
    if m < 2 * min_leaf:
        return None
    sub = X[:, features]
    order, xs = sorted_columns(sub)
    onehot = np.eye(n_classes)[y]
    left = np.cumsum(onehot[order], axis=0)[:-1]  # (m-1, f, K)
    total = onehot.sum(axis=0)
    right = total - left
    n_left = np.arange(1, m)[:, None]
    child = (n_left * gini(left) + (m - n_left) * gini(right)) / m
    drop = gini(total) - child
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
    drop = np.where(valid, drop, -np.inf)
    flat = drop.T.ravel()
    best = first_best(flat)
    if best < 0:
        return None
    j, pos = divmod(best, m - 1)
    return float(flat[best]), int(features[j]), midpoint(xs[pos, j], xs[pos + 1, j])


def grow_gini_tree(X, y, rng, n_classes, max_features=None, min_samples_split=2,
                   min_samples_leaf=1, max_depth=None) -> DecisionTree:
    """Fully grown CART tree; leaves store class counts.

    At each node ``max_features`` candidate features are drawn without
    replacement. If none of them admits a split, the remaining features are
    tried in random order until one does, so the node only becomes a leaf
    when it is pure or constant in every feature.
    """
    d = X.shape[1]
    max_features = d if max_features is None else max(1, min(max_features, d))
    tree = DecisionTree()

    def grow(idx, depth):
        ys = y[idx]
        counts = np.bincount(ys, minlength=n_classes)
        stop = (len(idx) < min_samples_split or (counts > 0).sum() <= 1
                or (max_depth is not None and depth >= max_depth))
        found = None
        if not stop:
            perm = rng.permutation(d)
            for start in range(0, d, max_features):
                found = best_gini_split(X[idx], ys, np.sort(perm[:start + max_features]), n_classes, min_samples_leaf)
                if found is not None:
                    break
        if found is None:
            return tree.add_leaf(counts.tolist())
        _, f, thr = found
        node = tree.add_split(f, thr)
        goes_left = X[idx, f] < thr
        tree.left[node] = grow(idx[goes_left], depth + 1)
        tree.right[node] = grow(idx[~goes_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return tree


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 10
    bootstrap: bool = True
    max_features: int | None = None  # None: int(sqrt(d))
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 42
    n_classes: int = N_CLASSES


@dataclass
class RandomForest:
    config: RFConfig
    n_features: int
    trees: list = field(default_factory=list)

    def votes(self, X) -> np.ndarray:
        X = _check_features(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        counts = np.zeros((len(X), self.config.n_classes), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            leaf_counts = tree.leaf_values()[tree.apply(X)]
            counts[rows, vote(leaf_counts)] += 1
        return counts

    def predict_proba(self, X) -> np.ndarray:
        counts = self.votes(X)
        return counts / max(len(self.trees), 1)

    def predict(self, X):
        counts = self.votes(X)
        return vote(counts), counts / max(len(self.trees), 1)

    def to_dict(self) -> dict:
        return {"format": RF_FORMAT, "config": asdict(self.config), "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d) -> "RandomForest":
        if d.get("format") != RF_FORMAT:
            raise ValueError("not a random forest model file")
        return cls(RFConfig(**d["config"]), d["n_features"], [DecisionTree.from_dict(t) for t in d["trees"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "RandomForest":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def rf_fit(X, y, n_trees: int = 10, bootstrap: bool = True, seed: int = 42,
           cfg: RFConfig | None = None) -> RandomForest:
    cfg = cfg or RFConfig(n_trees=n_trees, bootstrap=bootstrap, seed=seed)
    X = _check_features(X)
    y = np.asarray(y, dtype=np.int64)
    if len(X) < 2 or len(X) != len(y):
        raise ValueError("need at least 2 samples with matching labels")
    d = X.shape[1]
    max_features = cfg.max_features or max(1, int(np.sqrt(d)))
    rng = np.random.default_rng(cfg.seed)
    forest = RandomForest(cfg, d)
    for _ in range(cfg.n_trees):
        idx = rng.integers(0, len(X), len(X)) if cfg.bootstrap else np.arange(len(X))
        forest.trees.append(grow_gini_tree(X[idx], y[idx], rng, cfg.n_classes, max_features,
                                           cfg.min_samples_split, cfg.min_samples_leaf))
    return forest


def rf_predict(model: RandomForest, X):
    """Majority-vote labels and vote-share rows."""
    return model.predict(X)
