"""Experiment configuration, runner and command line interface."""

from .config import COMPATIBLE, TREE_MODELS, ExperimentConfig, IncompatibleConfig
from .runner import (
    KnnModel,
    RunRecord,
    TrainedModel,
    compare,
    evaluate_model,
    load_data,
    report_rows,
    run,
    run_repeats,
    standardized_split,
)

__all__ = [
    "COMPATIBLE", "TREE_MODELS", "ExperimentConfig", "IncompatibleConfig", "KnnModel", "RunRecord",
    "TrainedModel", "compare", "evaluate_model", "load_data", "report_rows", "run", "run_repeats",
    "standardized_split",
]
