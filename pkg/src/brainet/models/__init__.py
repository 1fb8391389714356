"""Classifier families behind one probabilistic-prediction contract."""

from .base import (
    DEFAULT_GRIDS,
    DEFAULT_HYPERPARAMETERS,
    MODEL_KINDS,
    ModelConfig,
    TrainedModel,
    TrainingReport,
    load_model,
    predict_margin,
    predict_proba,
    save_model,
    sigmoid,
)
from .elastic_net import train_logistic_elastic_net
from .gbt import train_gbt
from .grid_search import HyperparameterGrid, grid_search_cv, train_model
from .mlp import train_mlp

__all__ = [
    "DEFAULT_GRIDS",
    "DEFAULT_HYPERPARAMETERS",
    "MODEL_KINDS",
    "ModelConfig",
    "TrainedModel",
    "TrainingReport",
    "HyperparameterGrid",
    "grid_search_cv",
    "train_model",
    "train_logistic_elastic_net",
    "train_gbt",
    "train_mlp",
    "load_model",
    "save_model",
    "predict_margin",
    "predict_proba",
    "sigmoid",
]
