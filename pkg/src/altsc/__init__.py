"""Adaptive law-based transformation for time series classification."""

__version__ = "0.1.0"

from .api import ALT
from .classify import KNN, Evaluation, LinearDiscriminant, evaluate, knn_predict, lda_fit
from .dataset import (
    Split,
    SplitMix64,
    SplitSpec,
    TimeSeriesDataset,
    load_csv,
    load_ts,
    stratified_split,
    write_csv,
    write_ts,
)
from .errors import AltError, ModelFormatError, NumericalError, ParseError, ValidationError
from .lawcore import WindowConfig, compute_shapelet, make_configs, series_shapelets
from .model import ShapeletBank, load_model, save_model, train_bank
from .transform import (
    ExtractionMethod,
    FeatureTable,
    feature_names,
    read_features,
    transform_instance,
    transform_set,
    write_features,
)

__all__ = [
    "ALT", "AltError", "Evaluation", "ExtractionMethod", "FeatureTable", "KNN", "LinearDiscriminant",
    "ModelFormatError", "NumericalError", "ParseError", "ShapeletBank", "Split", "SplitMix64", "SplitSpec",
    "TimeSeriesDataset", "ValidationError", "WindowConfig", "compute_shapelet", "evaluate", "feature_names",
    "knn_predict", "lda_fit", "load_csv", "load_model", "load_ts", "make_configs", "read_features",
    "save_model", "series_shapelets", "stratified_split", "train_bank", "transform_instance", "transform_set",
    "write_csv", "write_features", "write_ts",
]
