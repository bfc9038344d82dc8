from .baselines import (
    RFConfig,
    RandomForest,
    best_gini_split,
    gini,
    grow_gini_tree,
    knn_predict,
    rf_fit,
    rf_predict,
)
from .gbt import (
    PRESETS,
    ForestModel,
    GBTConfig,
    best_split,
    gbt_fit,
    gbt_predict,
    grow_tree,
    log_loss,
    preset,
    split_gain,
)
from .tree import DecisionTree

__all__ = [
    "DecisionTree", "ForestModel", "GBTConfig", "PRESETS", "RFConfig", "RandomForest",
    "best_gini_split", "best_split", "gbt_fit", "gbt_predict", "gini", "grow_gini_tree",
    "grow_tree", "knn_predict", "log_loss", "preset", "rf_fit", "rf_predict", "split_gain",
]
