"""Gradient-boosted trees on logistic loss with second-order leaf weights.

Exact greedy split search over sorted feature values; split gain is
0.5*[GL^2/(HL+reg) + GR^2/(HR+reg) - (GL+GR)^2/(HL+HR+reg)]. The best
nonnegative-gain split is taken (ties: lower feature index, then lower
threshold), so symmetric zero-gain splits still partition the node.
No row or column subsampling: training is deterministic.
"""

import numpy as np

from ..errors import DataError
from .base import ModelConfig, TrainedModel, TrainingReport, logistic_loss, sigmoid

LEAF_REGULARIZATION = 1.0


def _leaf_weight(g_sum: float, h_sum: float) -> float:
    return -g_sum / (h_sum + LEAF_REGULARIZATION)


def _best_split(X, g, h, rows, feature_count):
    """Best (gain, feature, threshold) over all features, or None."""
    best = None
    g_tot = float(g[rows].sum())
    h_tot = float(h[rows].sum())
    parent = g_tot * g_tot / (h_tot + LEAF_REGULARIZATION)
    for j in range(feature_count):
        col = X[rows, j]
        order = np.argsort(col, kind="stable")
        sorted_vals = col[order]
        if sorted_vals[0] == sorted_vals[-1]:
            continue
        g_sorted = g[rows][order]
        h_sorted = h[rows][order]
        g_prefix = np.cumsum(g_sorted)
        h_prefix = np.cumsum(h_sorted)
        # candidate cut after position i when the value strictly increases
        cuts = np.nonzero(sorted_vals[1:] > sorted_vals[:-1])[0]
        gl = g_prefix[cuts]
        hl = h_prefix[cuts]
        gr = g_tot - gl
        hr = h_tot - hl
        gains = 0.5 * (
            gl * gl / (hl + LEAF_REGULARIZATION)
            + gr * gr / (hr + LEAF_REGULARIZATION)
            - parent
        )
        idx = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[idx])
        if gain < 0.0:
            # even the best cut on this feature loses to the parent leaf
            continue
        threshold = 0.5 * (sorted_vals[cuts[idx]] + sorted_vals[cuts[idx] + 1])
        if best is None or gain > best[0]:
            best = (gain, j, float(threshold))
    return best


def _build_tree(X, g, h, rows, max_depth):
    """Grow one regression tree; returns a flat node list."""
    nodes = []

    def grow(rows, depth):
        node_id = len(nodes)
        nodes.append(None)
        g_sum = float(g[rows].sum())
        h_sum = float(h[rows].sum())
        split = _best_split(X, g, h, rows, X.shape[1]) if depth < max_depth and rows.size >= 2 else None
        if split is None:
            nodes[node_id] = {"leaf": _leaf_weight(g_sum, h_sum)}
            return node_id
        _, feature, threshold = split
        mask = X[rows, feature] < threshold
        left = grow(rows[mask], depth + 1)
        right = grow(rows[~mask], depth + 1)
        nodes[node_id] = {"feature": feature, "threshold": threshold, "left": left, "right": right}
        return node_id

    grow(rows, 0)
    return nodes


def _eval_tree(nodes, values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    out = np.zeros(n)
    stack = [(0, np.arange(n))]
    while stack:
        node_id, rows = stack.pop()
        if rows.size == 0:
            continue
        node = nodes[node_id]
        if "leaf" in node:
            out[rows] = node["leaf"]
            continue
        mask = values[rows, node["feature"]] < node["threshold"]
        stack.append((node["left"], rows[mask]))
        stack.append((node["right"], rows[~mask]))
    return out


def train_gbt(matrix, rounds: int, max_depth: int, learning_rate: float, seed: int = 0) -> TrainedModel:
    """Boost `rounds` trees of depth <= max_depth; max_depth=0 yields the
    prior-log-odds stump. The per-round training loss is recorded."""
    if rounds < 1:
        raise DataError("rounds must be >= 1")
    if max_depth < 0:
        raise DataError("max_depth must be >= 0")
    if not 0.0 < learning_rate <= 1.0:
        raise DataError("learning_rate must be in (0, 1]")
    X = matrix.values
    y = np.asarray(matrix.labels, dtype=float)
    if len(np.unique(matrix.labels)) < 2:
        raise DataError("single-class labels: both classes required")
    n = X.shape[0]
    prior = float(np.mean(y))
    base_score = float(np.log(prior / (1.0 - prior)))
    z = np.full(n, base_score)
    trees = []
    losses = [logistic_loss(z, y)]
    all_rows = np.arange(n)
    for _ in range(rounds):
        p = sigmoid(z)
        g = p - y
        h = p * (1.0 - p)
        nodes = _build_tree(X, g, h, all_rows, max_depth)
        z = z + learning_rate * _eval_tree(nodes, X)
        trees.append(nodes)
        losses.append(logistic_loss(z, y))
    config = ModelConfig(
        kind="gradient_boosted_trees",
        hyperparameters={"rounds": rounds, "max_depth": max_depth, "learning_rate": learning_rate},
        seed=seed,
    )
    return TrainedModel(
        config=config,
        parameters={
            "base_score": base_score,
            "learning_rate": learning_rate,
            "trees": trees,
            "round_losses": losses,
        },
        feature_names=tuple(matrix.feature_names),
        training_report=TrainingReport(converged=True, iterations=rounds, final_loss=losses[-1]),
    )


def margin(parameters, values: np.ndarray) -> np.ndarray:
    z = np.full(values.shape[0], parameters["base_score"], dtype=float)
    rate = parameters["learning_rate"]
    for nodes in parameters["trees"]:
        z += rate * _eval_tree(nodes, values)
    return z
