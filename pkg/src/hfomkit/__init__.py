"""Fingerprint quality classification and hybrid orientation map toolkit."""

from .dataset import Dataset
from .features import FeatureVector, LabeledSample, extract_features
from .learners import GradientBoosting, RandomForest, evaluate
from .ucflem import UcflemClassifier, UcflemConfig, classify_dataset

__all__ = [
    "Dataset",
    "FeatureVector",
    "LabeledSample",
    "extract_features",
    "RandomForest",
    "GradientBoosting",
    "evaluate",
    "UcflemClassifier",
    "UcflemConfig",
    "classify_dataset",
]

__version__ = "0.1.0"
