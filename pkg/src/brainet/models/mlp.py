"""Single-hidden-layer perceptron: rectifier units, sigmoid output, mean
logistic loss, full-batch gradient descent with 0.9 momentum.

Hidden and output weights start from seeded uniform(-r, r) with
r = sqrt(6/(fan_in + fan_out)); biases start at zero.
"""

import math

import numpy as np

from ..errors import DataError, NumericError
from .base import ModelConfig, TrainedModel, TrainingReport, logistic_loss, sigmoid

MOMENTUM = 0.9


def init_parameters(n_features: int, hidden_units: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    r1 = math.sqrt(6.0 / (n_features + hidden_units))
    r2 = math.sqrt(6.0 / (hidden_units + 1))
    return {
        "w_hidden": rng.uniform(-r1, r1, size=(n_features, hidden_units)),
        "b_hidden": np.zeros(hidden_units),
        "w_out": rng.uniform(-r2, r2, size=hidden_units),
        "b_out": np.zeros(1),
    }


def loss_and_gradients(parameters: dict, X: np.ndarray, y: np.ndarray):
    """Mean logistic loss and its gradient for every parameter tensor."""
    with np.errstate(over="ignore", invalid="ignore"):
        pre = X @ parameters["w_hidden"] + parameters["b_hidden"]
        hidden = np.maximum(pre, 0.0)
        z = hidden @ parameters["w_out"] + parameters["b_out"][0]
        loss = logistic_loss(z, y)
        n = X.shape[0]
        dz = (sigmoid(z) - y) / n
        d_hidden = np.outer(dz, parameters["w_out"]) * (pre > 0.0)
        grads = {
            "w_hidden": X.T @ d_hidden,
            "b_hidden": d_hidden.sum(axis=0),
            "w_out": hidden.T @ dz,
            "b_out": np.array([dz.sum()]),
        }
    return loss, grads


def train_mlp(matrix, hidden_units: int, epochs: int, step: float, seed: int = 0) -> TrainedModel:
    if hidden_units < 1:
        raise DataError("hidden_units must be >= 1")
    if epochs < 1:
        raise DataError("epochs must be >= 1")
    if step <= 0:
        raise DataError("step must be positive")
    X = matrix.values
    y = np.asarray(matrix.labels, dtype=float)
    if len(np.unique(matrix.labels)) < 2:
        raise DataError("single-class labels: both classes required")
    params = init_parameters(X.shape[1], hidden_units, seed)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    loss = math.inf
    for epoch in range(1, epochs + 1):
        loss, grads = loss_and_gradients(params, X, y)
        if not math.isfinite(loss):
            raise NumericError(f"divergence at epoch {epoch}")
        for key in params:
            velocity[key] = MOMENTUM * velocity[key] - step * grads[key]
            params[key] = params[key] + velocity[key]
    final_loss, _ = loss_and_gradients(params, X, y)
    if not math.isfinite(final_loss):
        raise NumericError(f"divergence at epoch {epochs}")
    config = ModelConfig(
        kind="shallow_mlp",
        hyperparameters={"hidden_units": hidden_units, "epochs": epochs, "step": step},
        seed=seed,
    )
    return TrainedModel(
        config=config,
        parameters=params,
        feature_names=tuple(matrix.feature_names),
        training_report=TrainingReport(converged=True, iterations=epochs, final_loss=final_loss),
    )


def margin(parameters, values: np.ndarray) -> np.ndarray:
    hidden = np.maximum(values @ parameters["w_hidden"] + parameters["b_hidden"], 0.0)
    return hidden @ parameters["w_out"] + parameters["b_out"][0]
