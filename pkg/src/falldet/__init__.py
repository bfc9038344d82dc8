"""Multimodal fall detection: sensor/camera preprocessing, from-scratch
neural networks, boosted trees and classification metrics."""

__version__ = "0.1.0"

N_CLASSES = 12
N_SENSOR_FEATURES = 28
IMAGE_SIZE = 32
