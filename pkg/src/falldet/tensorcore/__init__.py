"""Small numpy neural engine: layers with hand-written backward passes,
cross-entropy, SGD/Adam, and finite-difference gradient checking."""

from .gradcheck import GradCheckResult, check_layer, grad_check, rel_error
from .layers import (
    LAYER_KINDS,
    BatchNorm,
    CacheError,
    Conv1D,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    LayerSpec,
    MaxPool1D,
    MaxPool2D,
    ReLU,
    Sequential,
    ShapeError,
    Softmax,
    Tensor,
    concat_shape,
    make_layer,
    output_shape,
    softmax,
)
from .losses import softmax_cross_entropy
from .optim import SGD, Adam, NonFiniteGradient, make_optimizer

__all__ = [
    "LAYER_KINDS", "Adam", "BatchNorm", "CacheError", "Conv1D", "Conv2D", "Dense",
    "Dropout", "Flatten", "GradCheckResult", "Layer", "LayerSpec", "MaxPool1D",
    "MaxPool2D", "NonFiniteGradient", "ReLU", "SGD", "Sequential", "ShapeError",
    "Softmax", "Tensor", "check_layer", "concat_shape", "grad_check", "make_layer",
    "make_optimizer", "output_shape", "rel_error", "softmax", "softmax_cross_entropy",
]
