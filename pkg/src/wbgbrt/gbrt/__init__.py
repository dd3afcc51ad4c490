"""Gradient-boosted regression trees with a compiled or numpy kernel backend."""

from ._backend import BACKEND, BACKENDS
from .engine import FeatureMatrix, feature_importance, fit, grow_tree, predict
from .model import BoostedModel, BoostParams, RegressionTree

__all__ = [
    "BACKEND",
    "BACKENDS",
    "BoostParams",
    "BoostedModel",
    "FeatureMatrix",
    "RegressionTree",
    "feature_importance",
    "fit",
    "grow_tree",
    "predict",
]
