"""Array-backed binary decision trees.

Node ``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
``x[feature] < threshold`` go to ``left[i]`` and the rest to ``right[i]``.
Thresholds are midpoints between adjacent distinct training values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DecisionTree:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)  # leaf payload: float (GBT) or class counts (RF)

    def add_leaf(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def add_split(self, feature: int, threshold: float) -> int:
        node = self.add_leaf(None)
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        return node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self, node: int = 0) -> int:
        if self.feature[node] == -1:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        active = feature[node] != -1
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, feature[cur]] < threshold[cur]
            node[rows] = np.where(go_left, left[cur], right[cur])
            active = feature[node] != -1
        return node

    def leaf_values(self) -> np.ndarray:
        """Node payloads as an array; split nodes get zeros."""
        leaf = next(v for v, f in zip(self.value, self.feature) if f == -1)
        blank = np.zeros_like(np.asarray(leaf, dtype=np.float64))
        return np.array([blank if v is None else v for v in self.value], dtype=np.float64)

    def to_dict(self) -> dict:
        value = [v.tolist() if isinstance(v, np.ndarray) else v for v in self.value]
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "value": value}

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        return cls(list(d["feature"]), list(d["threshold"]), list(d["left"]), list(d["right"]), list(d["value"]))


def midpoint(lo: float, hi: float) -> float:
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: fall back to the upper value so that lo < thr <= hi
    return mid if lo < mid else hi


def sorted_columns(X):
    """Per-feature stable sort of ``X`` (rows = samples)."""
    order = np.argsort(X, axis=0, kind="stable")
    return order, np.take_along_axis(X, order, axis=0)


def first_best(scores, rtol: float = 1e-9) -> int:
    """Index of the first score within ``rtol`` of the maximum, or -1 if none is finite.

    Candidates whose exact scores tie can differ by a few ulps after
    cumulative sums; the tolerance keeps the tie-break on position.
    """
    top = np.max(scores) if len(scores) else -np.inf
    if not np.isfinite(top):
        return -1
    return int(np.argmax(scores >= top - rtol * max(abs(top), 1e-12)))
