"""Bootstrapped train/evaluate/explain harness.

Each iteration reseeds the stratified train-test split, optionally re-runs
grid-search cross-validation on the training part, fits every model kind,
scores the test part, and computes Shapley attributions there. Iterations
are independent and may run in parallel; results are reduced in iteration
order so the output never depends on the worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attribution import AttributionMatrix, attribute_test_rows
from .errors import BrainetError, DataError
from .metrics import MetricReport, SplitSpec, compute_metrics, stratified_split
from .models import ModelConfig, predict_proba
from .models.grid_search import HyperparameterGrid, grid_search_cv, train_model
from .preprocess import BiomarkerMatrix

# re-exported evaluation surface
__all__ = [
    "AttributionSettings",
    "BootstrapResult",
    "SplitSpec",
    "MetricReport",
    "bootstrap_run",
    "compute_metrics",
    "stratified_split",
]


@dataclass(frozen=True)
class AttributionSettings:
    estimator: str = "exact"  # "exact" or "sampled"
    n_coalitions: int | None = None
    background_size: int = 100


@dataclass(frozen=True)
class BootstrapResult:
    metrics: dict  # kind -> list of MetricReport, one per iteration
    attributions: dict  # kind -> list of AttributionMatrix
    chosen_configs: dict  # kind -> list of ModelConfig


def _take_rows(matrix: BiomarkerMatrix, idx) -> BiomarkerMatrix:
    return BiomarkerMatrix(
        feature_names=matrix.feature_names,
        values=matrix.values[idx],
        labels=matrix.labels[idx],
        normalization=None,
    )


def _run_iteration(matrix, configs, spec, grids, attribution, iteration):
    train_idx, test_idx = stratified_split(matrix.labels, spec, iteration)
    train_part = _take_rows(matrix, train_idx)
    test_part = _take_rows(matrix, test_idx)
    out = {}
    for config in configs:
        kind = config.kind
        try:
            chosen = config
            if grids and kind in grids:
                best = grid_search_cv(train_part, kind, grids[kind], spec.folds, spec.iteration_seed(iteration))
                chosen = ModelConfig(kind=kind, hyperparameters=best.hyperparameters,
                                     seed=config.seed + iteration)
            else:
                chosen = ModelConfig(kind=kind, hyperparameters=config.hyperparameters,
                                     seed=config.seed + iteration)
            model = train_model(train_part, chosen)
            report = compute_metrics(test_part.labels, predict_proba(model, test_part))
            attr = None
            if attribution is not None:
                rng = np.random.default_rng(spec.iteration_seed(iteration))
                size = min(attribution.background_size, train_part.values.shape[0])
                background = train_part.values[rng.choice(train_part.values.shape[0], size=size, replace=False)]
                attr = attribute_test_rows(
                    model,
                    test_part.values,
                    background,
                    estimator=attribution.estimator,
                    n_coalitions=attribution.n_coalitions,
                    seed=chosen.seed,
                    bootstrap_index=iteration,
                    feature_names=matrix.feature_names,
                )
            out[kind] = (report, attr, chosen)
        except BrainetError as exc:
            raise type(exc)(f"iteration {iteration} ({kind}): {exc}") from exc
    return iteration, out


def bootstrap_run(
    matrix: BiomarkerMatrix,
    configs,
    spec: SplitSpec,
    grids: dict | None = None,
    attribution: AttributionSettings | None = None,
    hoist_grid_search: bool = False,
    jobs: int = 1,
) -> BootstrapResult:
    """Run B seeded iterations of split / tune / fit / score / attribute.

    `grids` maps a model kind to its HyperparameterGrid; with
    hoist_grid_search=True the search runs once on the first iteration's
    training part instead of inside every iteration.
    """
    configs = list(configs)
    if not configs:
        raise DataError("bootstrap_run: need at least one model config")
    kinds = [c.kind for c in configs]
    if len(set(kinds)) != len(kinds):
        raise DataError("bootstrap_run: duplicate model kinds")
    if hoist_grid_search and grids:
        train_idx, _ = stratified_split(matrix.labels, spec, 0)
        train_part = _take_rows(matrix, train_idx)
        fixed = []
        for config in configs:
            if config.kind in grids:
                best = grid_search_cv(train_part, config.kind, grids[config.kind], spec.folds, spec.base_seed)
                fixed.append(ModelConfig(kind=config.kind, hyperparameters=best.hyperparameters, seed=config.seed))
            else:
                fixed.append(config)
        configs = fixed
        grids = None

    iterations = range(spec.bootstrap_iterations)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_iteration, matrix, configs, spec, grids, attribution, b) for b in iterations
            ]
            results = [f.result() for f in futures]
    else:
        results = [_run_iteration(matrix, configs, spec, grids, attribution, b) for b in iterations]
    results.sort(key=lambda item: item[0])

    metrics = {kind: [] for kind in kinds}
    attributions = {kind: [] for kind in kinds}
    chosen_configs = {kind: [] for kind in kinds}
    for _, per_kind in results:
        for kind in kinds:
            report, attr, chosen = per_kind[kind]
            metrics[kind].append(report)
            if attr is not None:
                attributions[kind].append(attr)
            chosen_configs[kind].append(chosen)
    return BootstrapResult(metrics=metrics, attributions=attributions, chosen_configs=chosen_configs)
