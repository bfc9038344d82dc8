"""Sensor MLP, single/dual camera CNNs, fusion network and baseline CNN."""

from .architectures import (
    BUILDERS,
    MODEL_NAMES,
    Branch,
    ModelSpec,
    build,
    build_baseline_cnn,
    build_cam_cnn,
    build_dual_cam_cnn,
    build_fusion,
    build_sensor_mlp,
)
from .checkpoint import Checkpoint, predict
from .network import Network
from .training import (
    EpochRecord,
    TrainConfig,
    TrainingDiverged,
    baseline_train_config,
    default_train_config,
    train,
)

__all__ = [
    "BUILDERS", "MODEL_NAMES", "Branch", "Checkpoint", "EpochRecord", "ModelSpec", "Network",
    "TrainConfig", "TrainingDiverged", "baseline_train_config", "build", "build_baseline_cnn",
    "build_cam_cnn", "build_dual_cam_cnn", "build_fusion", "build_sensor_mlp",
    "default_train_config", "predict", "train",
]
