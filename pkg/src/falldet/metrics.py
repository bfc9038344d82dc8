"""Confusion matrix and accuracy / precision / recall / F1."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import N_CLASSES

CONFIGURATIONS = ("S", "C1", "C2", "C1+C2", "S+C1+C2")


def confusion(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"{name} has labels outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true.astype(np.int64), y_pred.astype(np.int64)), 1)
    return cm


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass
class EvalReport:
    accuracy: float
    precision: list
    recall: list
    f1: list
    support: list
    macro: dict
    weighted: dict
    average: str = "weighted"
    configuration: Optional[str] = None
    confusion: list = field(default_factory=list)
    zero_support_warning: bool = False

    @property
    def headline(self) -> dict:
        """Accuracy plus precision/recall/F1 under the report's averaging mode."""
        agg = self.weighted if self.average == "weighted" else self.macro
        return {"accuracy": self.accuracy, **agg}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        return cls(**d)


def report(cm, average: str = "weighted", configuration: Optional[str] = None) -> EvalReport:
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.size == 0:
        raise ValueError(f"confusion matrix must be square and nonempty, got {cm.shape}")
    total = cm.sum()
    if total == 0:
        raise ValueError("confusion matrix has no samples")
    if average not in ("macro", "weighted"):
        raise ValueError(f"average must be 'macro' or 'weighted', got {average!r}")
    if configuration is not None and configuration not in CONFIGURATIONS:
        raise ValueError(f"unknown data configuration {configuration!r}")

    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision = _safe_div(tp, predicted)
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    weights = support / total

    return EvalReport(
        accuracy=float(tp.sum() / total),
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        support=support.tolist(),
        macro={
            "precision": float(precision.mean()),
            "recall": float(recall.mean()),
            "f1": float(f1.mean()),
        },
        weighted={
            "precision": float(weights @ precision),
            "recall": float(weights @ recall),
            "f1": float(weights @ f1),
        },
        average=average,
        configuration=configuration,
        confusion=cm.tolist(),
        zero_support_warning=bool((support == 0).any()),
    )


def evaluate(y_true, y_pred, average="weighted", configuration=None, n_classes=N_CLASSES) -> EvalReport:
    return report(confusion(y_true, y_pred, n_classes), average, configuration)


def render_table(rows, title: str = "") -> str:
    """Plain-text table of (data, model, accuracy, precision, recall, F1) in percent."""
    header = ("Data", "Model", "Accuracy", "Precision", "Recall", "F1-Score")
    body = [
        (data, model, *(f"{100 * v:.2f}" for v in values))
        for data, model, *values in rows
    ]
    widths = [max(len(str(r[i])) for r in [header, *body]) for i in range(len(header))]
    line = "+".join("-" * (w + 2) for w in widths)
    fmt = lambda r: "|".join(f" {str(c):<{w}} " for c, w in zip(r, widths))
    out = [title] if title else []
    out += [line, fmt(header), line, *(fmt(r) for r in body), line]
    return "\n".join(out)
