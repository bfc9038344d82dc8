"""Declarative specs for the five neural architectures.

A model is one layer chain per input branch, a concatenation of the
flattened branch outputs, and a shared head ending in a 12-way softmax.
Builders take reduced input sizes so the same structure can be gradient
checked on small tensors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .. import IMAGE_SIZE, N_CLASSES, N_SENSOR_FEATURES
from ..tensorcore import layers as L
from ..tensorcore.layers import LayerSpec, concat_shape

MODEL_NAMES = ("sensor-mlp", "cam-cnn", "dual-cam-cnn", "fusion", "baseline-cnn")
INPUT_ROLES = ("sensor", "cam1", "cam2")


@dataclass(frozen=True)
class Branch:
    input: str  # one of INPUT_ROLES
    in_shape: tuple
    layers: tuple

    def out_shape(self) -> tuple:
        shape = tuple(self.in_shape)
        for spec in self.layers:
            shape = L.output_shape(spec, shape)
        return shape


@dataclass(frozen=True)
class ModelSpec:
    name: str
    branches: tuple
    head: tuple
    n_classes: int = N_CLASSES
    options: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.branches:
            raise ValueError("a model needs at least one input branch")
        shapes = [b.out_shape() for b in self.branches]
        shape = concat_shape(shapes) if len(shapes) > 1 else shapes[0]
        for spec in self.head:
            shape = L.output_shape(spec, shape)
        if not self.head or self.head[-1].kind != "Softmax" or shape != (self.n_classes,):
            raise ValueError(f"{self.name}: head must end in a {self.n_classes}-way Softmax, got {shape}")

    @property
    def inputs(self) -> tuple:
        return tuple(b.input for b in self.branches)

    def concat_width(self) -> int:
        return sum(b.out_shape()[0] for b in self.branches)

    def describe(self) -> str:
        lines = [f"{self.name}"]
        for b in self.branches:
            chain = " -> ".join(str(s) for s in b.layers) or "(identity)"
            lines.append(f"  [{b.input} {b.in_shape}] {chain} => {b.out_shape()}")
        lines.append("  head: " + " -> ".join(str(s) for s in self.head))
        return "\n".join(lines)


def _cam_branch(role: str, size: int) -> Branch:
    """Conv 15@3x3 (ReLU) -> MaxPool 2 -> BatchNorm -> Flatten."""
    return Branch(role, (1, size, size), (
        L.Conv2D(15, 3), L.ReLU(), L.MaxPool2D(2), L.BatchNorm(), L.Flatten(),
    ))


def build_sensor_mlp(n_features: int = N_SENSOR_FEATURES) -> ModelSpec:
    head = (
        L.Dense(2000), L.ReLU(), L.BatchNorm(),
        L.Dense(600), L.ReLU(), L.BatchNorm(),
        L.Dropout(0.2),
        L.Dense(N_CLASSES), L.Softmax(),
    )
    return ModelSpec("sensor-mlp", (Branch("sensor", (n_features,), ()),), head,
                     options={"n_features": n_features})


def build_cam_cnn(camera: str = "cam1", size: int = IMAGE_SIZE) -> ModelSpec:
    if camera not in ("cam1", "cam2"):
        raise ValueError(f"camera must be 'cam1' or 'cam2', got {camera!r}")
    branch = Branch(camera, (1, size, size), (
        L.Conv2D(16, 3), L.ReLU(), L.BatchNorm(), L.MaxPool2D(2), L.Flatten(),
    ))
    head = (L.Dense(200), L.ReLU(), L.Dropout(0.2), L.Dense(N_CLASSES), L.Softmax())
    return ModelSpec("cam-cnn", (branch,), head, options={"camera": camera, "size": size})


def build_dual_cam_cnn(size: int = IMAGE_SIZE) -> ModelSpec:
    head = (
        L.Dense(400), L.ReLU(), L.Dense(200), L.ReLU(),
        L.Dropout(0.2), L.Dense(N_CLASSES), L.Softmax(),
    )
    return ModelSpec("dual-cam-cnn", (_cam_branch("cam1", size), _cam_branch("cam2", size)), head,
                     options={"size": size})


def build_fusion(size: int = IMAGE_SIZE, n_features: int = N_SENSOR_FEATURES) -> ModelSpec:
    sensor = Branch("sensor", (1, n_features), (
        L.Conv1D(10, 3), L.ReLU(), L.MaxPool1D(2), L.BatchNorm(), L.Flatten(),
    ))
    head = (
        L.Dense(600), L.ReLU(), L.Dense(1200), L.ReLU(),
        L.Dropout(0.2), L.Dense(N_CLASSES), L.Softmax(),
    )
    return ModelSpec("fusion", (_cam_branch("cam1", size), _cam_branch("cam2", size), sensor), head,
                     options={"size": size, "n_features": n_features})


def build_baseline_cnn(camera: str = "cam1", size: int = IMAGE_SIZE) -> ModelSpec:
    if camera not in ("cam1", "cam2"):
        raise ValueError(f"camera must be 'cam1' or 'cam2', got {camera!r}")
    branch = Branch(camera, (1, size, size), (
        L.Conv2D(8, 3), L.ReLU(), L.MaxPool2D(2),
        L.Conv2D(16, 3), L.ReLU(), L.MaxPool2D(2),
        L.Conv2D(32, 3), L.ReLU(), L.MaxPool2D(2),
        L.Flatten(),
    ))
    head = (L.Dense(N_CLASSES), L.Softmax())
    return ModelSpec("baseline-cnn", (branch,), head, options={"camera": camera, "size": size})


BUILDERS = {
    "sensor-mlp": build_sensor_mlp,
    "cam-cnn": build_cam_cnn,
    "dual-cam-cnn": build_dual_cam_cnn,
    "fusion": build_fusion,
    "baseline-cnn": build_baseline_cnn,
}


def build(name: str, **options) -> ModelSpec:
    try:
        return BUILDERS[name](**options)
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {MODEL_NAMES}") from None
