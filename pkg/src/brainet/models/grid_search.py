"""Grid search over hyperparameters with stratified k-fold validation,
selecting on mean micro-F1."""

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..metrics import compute_metrics, stratified_kfold
from .base import ModelConfig, predict_proba

TRAINERS = {}


def _trainers():
    # populated lazily to keep module import light
    if not TRAINERS:
        from .elastic_net import train_logistic_elastic_net
        from .gbt import train_gbt
        from .mlp import train_mlp

        TRAINERS.update(
            {
                "elastic_net_logistic": lambda m, hp, seed: train_logistic_elastic_net(
                    m, lam=hp["lambda"], l1_ratio=hp["l1_ratio"], seed=seed
                ),
                "gradient_boosted_trees": lambda m, hp, seed: train_gbt(
                    m, rounds=hp["rounds"], max_depth=hp["max_depth"], learning_rate=hp["learning_rate"], seed=seed
                ),
                "shallow_mlp": lambda m, hp, seed: train_mlp(
                    m, hidden_units=hp["hidden_units"], epochs=hp["epochs"], step=hp["step"], seed=seed
                ),
            }
        )
    return TRAINERS


@dataclass(frozen=True)
class HyperparameterGrid:
    axes: dict  # name -> list of values

    def __post_init__(self):
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ConfigError("hyperparameter grid must have a nonempty Cartesian product")

    def points(self):
        """Grid points in axis-major order (first axis varies slowest)."""
        names = list(self.axes)
        for combo in itertools.product(*(self.axes[n] for n in names)):
            yield dict(zip(names, combo))


def train_model(matrix, config: ModelConfig):
    """Train any model kind from its config."""
    return _trainers()[config.kind](matrix, config.hyperparameters, config.seed)


def _subset(matrix, idx):
    from ..preprocess import BiomarkerMatrix

    return BiomarkerMatrix(
        feature_names=matrix.feature_names,
        values=matrix.values[idx],
        labels=matrix.labels[idx],
        normalization=None,
    )


def grid_search_cv(matrix, kind: str, grid: HyperparameterGrid, folds: int, seed: int) -> ModelConfig:
    """Pick the grid point with the best mean validation micro-F1.

    Folds are stratified and seeded; ties keep the earliest grid point in
    axis-major order.
    """
    if folds < 2:
        raise DataError("grid_search_cv: folds must be >= 2")
    if matrix.values.shape[0] < folds:
        raise DataError("grid_search_cv: fewer samples than folds")
    splits = stratified_kfold(matrix.labels, folds, seed)
    fold_data = [(_subset(matrix, tr), _subset(matrix, va)) for tr, va in splits]
    best_config = None
    best_score = -np.inf
    for point in grid.points():
        config = ModelConfig(kind=kind, hyperparameters=point, seed=seed)
        scores = []
        for train_part, val_part in fold_data:
            model = train_model(train_part, config)
            report = compute_metrics(val_part.labels, predict_proba(model, val_part))
            scores.append(report.micro_f1)
        mean_score = float(np.mean(scores))
        if mean_score > best_score:
            best_score = mean_score
            best_config = config
    return best_config
