"""Shared model types: configuration, the trained-model contract, and
JSON persistence for all three classifier families."""

import json
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError

MODEL_KINDS = ("elastic_net_logistic", "gradient_boosted_trees", "shallow_mlp")

SCHEMA_VERSION = 1

DEFAULT_HYPERPARAMETERS = {
    "elastic_net_logistic": {"lambda": 0.01, "l1_ratio": 0.5},
    "gradient_boosted_trees": {"rounds": 100, "max_depth": 3, "learning_rate": 0.1},
    "shallow_mlp": {"hidden_units": 32, "epochs": 500, "step": 0.1},
}

DEFAULT_GRIDS = {
    "elastic_net_logistic": {"lambda": [0.001, 0.01, 0.1], "l1_ratio": [0.2, 0.5, 0.8]},
    "gradient_boosted_trees": {"rounds": [50, 100], "max_depth": [2, 3], "learning_rate": [0.1, 0.3]},
    "shallow_mlp": {"hidden_units": [16, 32], "step": [0.01, 0.1]},
}


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    hyperparameters: dict
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        merged = dict(DEFAULT_HYPERPARAMETERS[self.kind])
        merged.update(self.hyperparameters)
        unknown = set(merged) - set(DEFAULT_HYPERPARAMETERS[self.kind])
        if unknown:
            raise ConfigError(f"unknown hyperparameters for {self.kind}: {sorted(unknown)}")
        object.__setattr__(self, "hyperparameters", merged)


@dataclass(frozen=True)
class TrainingReport:
    converged: bool
    iterations: int
    final_loss: float


@dataclass(frozen=True)
class TrainedModel:
    config: ModelConfig
    parameters: dict
    feature_names: tuple[str, ...]
    training_report: TrainingReport


def sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(z, y):
    """Mean negative log-likelihood for margins z and 0/1 labels y."""
    # log(1 + e^z) - y*z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _as_values(model: TrainedModel, X) -> np.ndarray:
    values = X.values if hasattr(X, "values") and hasattr(X, "feature_names") else np.asarray(X, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[1] != len(model.feature_names):
        raise DataError(
            f"feature width mismatch: model expects {len(model.feature_names)}, got {values.shape[1]}"
        )
    return values


def predict_margin(model: TrainedModel, X) -> np.ndarray:
    """Raw decision value (log-odds scale) per row."""
    from . import elastic_net, gbt, mlp

    values = _as_values(model, X)
    if model.config.kind == "elastic_net_logistic":
        return elastic_net.margin(model.parameters, values)
    if model.config.kind == "gradient_boosted_trees":
        return gbt.margin(model.parameters, values)
    return mlp.margin(model.parameters, values)


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    """P(case) per row; P(control) is the complement."""
    return sigmoid(predict_margin(model, X))


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=float).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": model.config.kind,
        "hyperparameters": _encode(model.config.hyperparameters),
        "seed": model.config.seed,
        "feature_names": list(model.feature_names),
        "parameters": _encode(model.parameters),
        "training_report": {
            "converged": model.training_report.converged,
            "iterations": model.training_report.iterations,
            "final_loss": model.training_report.final_loss,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported model schema version {version!r}")
    report = doc["training_report"]
    return TrainedModel(
        config=ModelConfig(kind=doc["kind"], hyperparameters=_decode(doc["hyperparameters"]), seed=doc["seed"]),
        parameters=_decode(doc["parameters"]),
        feature_names=tuple(doc["feature_names"]),
        training_report=TrainingReport(
            converged=report["converged"],
            iterations=report["iterations"],
            final_loss=report["final_loss"],
        ),
    )
