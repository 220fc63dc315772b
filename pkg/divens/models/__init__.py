"""Classifiers and ensembles."""

from ._classifier import Classifier
from .ensemble import (
    Ensemble,
    EnsembleOutput,
    argmax_lowest,
    predict_ensemble,
    predict_member,
)
from .mlp import BoundParams, Mlp, MlpConfig, ModelParams

__all__ = [
    "Classifier",
    "Mlp",
    "MlpConfig",
    "ModelParams",
    "BoundParams",
    "Ensemble",
    "EnsembleOutput",
    "predict_member",
    "predict_ensemble",
    "argmax_lowest",
]
