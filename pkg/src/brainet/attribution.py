"""Shapley-value attribution and cross-model importance pooling.

One model-agnostic estimator pair serves all classifier families: exact
coalition enumeration for small feature counts, and a kernel-weighted
least-squares estimator over sampled coalitions with the efficiency
constraint (attributions sum to prediction minus base) enforced exactly.
A coalition value v(S) is the model output with in-coalition features
taken from the explained row and the rest replaced, row by row, by a
background sample, averaged over the background.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .models import predict_proba

EXACT_ENUMERATION_LIMIT = 20
_BATCH_ROWS = 200_000


@dataclass(frozen=True)
class AttributionMatrix:
    values: np.ndarray  # T x p Shapley values
    base_value: float
    model_kind: str
    bootstrap_index: int
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DataError("attribution values must be T x p")


@dataclass(frozen=True)
class ImportanceAggregate:
    scores: np.ndarray  # p nonnegative reals
    t_total: int
    n_bootstraps: int
    n_models: int


@dataclass(frozen=True)
class SelectionConfig:
    top_n: int = 30
    exclusion_patterns: tuple[str, ...] = ()


def _predict_fn(model):
    if callable(model):
        return model
    return lambda rows: predict_proba(model, rows)


def _coalition_values(predict, x, background, masks):
    """v(S) for each coalition mask: mean prediction over the background
    with in-coalition columns replaced by the explained row."""
    bg = np.asarray(background, dtype=float)
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise DataError("background must be a nonempty B x p matrix")
    b, p = bg.shape
    values = np.empty(len(masks))
    chunk = max(1, _BATCH_ROWS // b)
    for start in range(0, len(masks), chunk):
        batch = masks[start : start + chunk]
        rows = np.repeat(bg[None, :, :], len(batch), axis=0)
        for i, mask in enumerate(batch):
            rows[i][:, mask] = x[mask]
        preds = predict(rows.reshape(-1, p))
        values[start : start + len(batch)] = np.asarray(preds).reshape(len(batch), b).mean(axis=1)
    return values


def _mask_arrays(p, subsets):
    out = np.zeros((len(subsets), p), dtype=bool)
    for i, bits in enumerate(subsets):
        for j in range(p):
            if bits >> j & 1:
                out[i, j] = True
    return out


def exact_shapley(model, x, background):
    """Exact Shapley values by coalition enumeration.

    Returns (phi, base) with phi summing to f(x) - base. Enumeration is
    capped at 20 features.
    """
    x = np.asarray(x, dtype=float)
    p = x.shape[0]
    if p > EXACT_ENUMERATION_LIMIT:
        raise DataError(f"exact_shapley: {p} features exceeds enumeration bound {EXACT_ENUMERATION_LIMIT}")
    predict = _predict_fn(model)
    subsets = list(range(1 << p))
    v = _coalition_values(predict, x, background, _mask_arrays(p, subsets))
    fact = [math.factorial(i) for i in range(p + 1)]
    weight_by_size = [fact[s] * fact[p - s - 1] / fact[p] for s in range(p)]
    phi = np.zeros(p)
    for mask in range(1 << p):
        size = mask.bit_count()
        for j in range(p):
            bit = 1 << j
            if mask & bit:
                continue
            phi[j] += weight_by_size[size] * (v[mask | bit] - v[mask])
    return phi, float(v[0])


def _kernel_weight(p, size):
    return (p - 1) / (math.comb(p, size) * size * (p - size))


def sampled_shapley(model, x, background, n_coalitions: int, seed: int = 0):
    """Kernel-weighted least-squares Shapley estimate.

    Coalitions are seeded samples from the kernel size distribution; when
    the budget covers every proper nonempty coalition the full enumeration
    is used and the estimate matches the exact values. The efficiency
    constraint is eliminated by substitution, so it holds exactly for any
    budget.
    """
    x = np.asarray(x, dtype=float)
    p = x.shape[0]
    if n_coalitions < 2 * p:
        raise DataError(f"sampled_shapley: need at least {2 * p} coalitions for {p} features")
    predict = _predict_fn(model)
    total_proper = (1 << p) - 2
    if p == 1:
        base = float(np.mean(predict(np.asarray(background, dtype=float))))
        fx = float(predict(x[None, :])[0])
        return np.array([fx - base]), base

    if n_coalitions >= total_proper:
        subsets = list(range(1, (1 << p) - 1))
        weights = np.array([_kernel_weight(p, s.bit_count()) for s in subsets])
    else:
        rng = np.random.default_rng(seed)
        sizes = np.arange(1, p)
        size_probs = np.array([(p - 1) / (s * (p - s)) for s in sizes], dtype=float)
        size_probs /= size_probs.sum()
        counts: dict[int, float] = {}
        drawn_sizes = rng.choice(sizes, size=n_coalitions, p=size_probs)
        for s in drawn_sizes:
            members = rng.choice(p, size=int(s), replace=False)
            bits = 0
            for j in members:
                bits |= 1 << int(j)
            counts[bits] = counts.get(bits, 0.0) + 1.0
        subsets = sorted(counts)
        weights = np.array([counts[bits] for bits in subsets])

    masks = _mask_arrays(p, subsets)
    v = _coalition_values(predict, x, background, masks)
    base = float(np.mean(predict(np.asarray(background, dtype=float))))
    fx = float(predict(x[None, :])[0])
    delta = fx - base

    z = masks.astype(float)
    # eliminate phi_last via the efficiency constraint sum(phi) = delta
    a = z[:, :-1] - z[:, -1:]
    rhs = v - base - z[:, -1] * delta
    aw = a * weights[:, None]
    gram = aw.T @ a
    try:
        phi_head = np.linalg.solve(gram, aw.T @ rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError("degenerate design: sampled coalitions do not span the features") from exc
    phi = np.empty(p)
    phi[:-1] = phi_head
    phi[-1] = delta - phi_head.sum()
    return phi, base


def attribute_test_rows(model, rows, background, estimator: str = "exact", n_coalitions: int | None = None,
                        seed: int = 0, bootstrap_index: int = 0, feature_names=()) -> AttributionMatrix:
    """Shapley values for every row of a test block, as one matrix."""
    rows = np.asarray(rows, dtype=float)
    p = rows.shape[1]
    values = np.empty((rows.shape[0], p))
    base = 0.0
    for i, x in enumerate(rows):
        if estimator == "exact":
            phi, base = exact_shapley(model, x, background)
        elif estimator == "sampled":
            budget = n_coalitions if n_coalitions is not None else 2 * p
            phi, base = sampled_shapley(model, x, background, budget, seed=seed + i)
        else:
            raise DataError(f"unknown estimator {estimator!r}")
        values[i] = phi
    kind = model.config.kind if hasattr(model, "config") else "callable"
    return AttributionMatrix(
        values=values,
        base_value=base,
        model_kind=kind,
        bootstrap_index=bootstrap_index,
        feature_names=tuple(feature_names),
    )


def aggregate_importance(runs) -> ImportanceAggregate:
    """Pool |Shapley| scores over every (sample, bootstrap, model) triple.

    Every sample-level score weights equally: the pooled score is the mean
    of absolute values over the total score count, summed with math.fsum so
    the result does not depend on run order.
    """
    runs = list(runs)
    if not runs:
        raise DataError("aggregate_importance: empty run list")
    p = runs[0].values.shape[1]
    for run in runs:
        if run.values.shape[1] != p:
            raise DataError("aggregate_importance: runs disagree on feature count")
    total_rows = sum(run.values.shape[0] for run in runs)
    scores = np.empty(p)
    for j in range(p):
        scores[j] = math.fsum(float(v) for run in runs for v in np.abs(run.values[:, j]))
    scores /= total_rows
    return ImportanceAggregate(
        scores=scores,
        t_total=total_rows,
        n_bootstraps=len({run.bootstrap_index for run in runs}),
        n_models=len({run.model_kind for run in runs}),
    )


def select_pool(per_model_scores, feature_names, cfg: SelectionConfig):
    """Union of each model's top-N features minus excluded names.

    Ties inside a model's ranking break toward the lower feature index; the
    pooled list is ordered by the best cross-model score, descending.
    Exclusion patterns are regular expressions matched with re.search.
    """
    per_model_scores = list(per_model_scores)
    if not per_model_scores:
        raise DataError("select_pool: need at least one model's scores")
    names = list(feature_names)
    p = len(names)
    if cfg.top_n < 1 or cfg.top_n > p:
        raise DataError(f"select_pool: top_n must be in [1, {p}]")
    pool_idx: set[int] = set()
    per_model_top = {}
    for k, agg in enumerate(per_model_scores):
        if agg.scores.shape[0] != p:
            raise DataError("select_pool: score length does not match feature names")
        order = sorted(range(p), key=lambda j: (-agg.scores[j], j))
        top = order[: cfg.top_n]
        per_model_top[k] = [names[j] for j in top]
        pool_idx.update(top)
    patterns = [re.compile(pat) for pat in cfg.exclusion_patterns]
    excluded = sorted(
        (names[j] for j in pool_idx if any(pat.search(names[j]) for pat in patterns))
    )
    kept = [j for j in pool_idx if names[j] not in set(excluded)]
    if not kept:
        raise DataError("empty pool: every candidate matched an exclusion pattern")
    best = {j: max(agg.scores[j] for agg in per_model_scores) for j in kept}
    ordered = sorted(kept, key=lambda j: (-best[j], j))
    return [names[j] for j in ordered], per_model_top, excluded
