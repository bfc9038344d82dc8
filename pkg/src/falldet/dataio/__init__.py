"""Sensor/camera ingest, cleaning, alignment, preprocessing and splitting."""

from .align import DEFAULT_MAX_GAP, EmptyStreamError, align, nearest_indices
from .fald import read_aligned, write_aligned
from .images import load_frames, preprocess_frame, resize, resize_32, scale_pixels, to_grayscale
from .records import (
    AlignedSample,
    ColumnManifest,
    DatasetSplit,
    FrameRecord,
    FrameSet,
    SampleSet,
    SensorRecord,
    SensorTable,
    StandardizationStats,
)
from .sensors import (
    CSVParseError,
    MissingColumnError,
    apply_standardization,
    clean,
    fit_standardization,
    load_consolidated_csv,
)
from .split import split
from .synth import SynthConfig, SynthData, class_means, synth_generate, synth_samples, write_synth_dir

__all__ = [
    "DEFAULT_MAX_GAP", "AlignedSample", "ColumnManifest", "CSVParseError", "DatasetSplit",
    "EmptyStreamError", "FrameRecord", "FrameSet", "MissingColumnError", "SampleSet",
    "SensorRecord", "SensorTable", "StandardizationStats", "SynthConfig", "SynthData",
    "align", "apply_standardization", "class_means", "clean", "fit_standardization",
    "load_consolidated_csv", "load_frames", "nearest_indices", "preprocess_frame",
    "read_aligned", "resize", "resize_32", "scale_pixels", "split", "synth_generate",
    "synth_samples", "to_grayscale", "write_aligned", "write_synth_dir",
]
