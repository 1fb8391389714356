"""Stratified splitting and the classification metric suite.

For single-label binary classification micro-F1 equals accuracy; the
report carries both names so downstream tables can quote either.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    folds: int = 5
    bootstrap_iterations: int = 20
    base_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must be in (0, 1)")
        if self.folds < 2:
            raise DataError("folds must be >= 2")
        if self.bootstrap_iterations < 1:
            raise DataError("bootstrap_iterations must be >= 1")

    def iteration_seed(self, iteration: int) -> int:
        return self.base_seed + iteration


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    micro_f1: float
    sensitivity: float
    specificity: float
    auc: float
    confusion: tuple  # ((tn, fp), (fn, tp))


def _class_test_counts(class_sizes: dict, test_fraction: float) -> dict:
    """Largest-remainder allocation of the test quota across classes."""
    total = sum(class_sizes.values())
    target = int(np.floor(total * test_fraction + 0.5))
    quotas = {c: size * test_fraction for c, size in class_sizes.items()}
    counts = {c: int(np.floor(q)) for c, q in quotas.items()}
    leftover = target - sum(counts.values())
    order = sorted(class_sizes, key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in order[:leftover]:
        counts[c] += 1
    return counts


def stratified_split(labels, spec: SplitSpec, iteration: int):
    """Seeded per-class proportional train/test split; returns sorted index arrays."""
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise DataError("stratified_split: both classes required")
    sizes = {c: int((labels == c).sum()) for c in classes}
    if min(sizes.values()) < 2:
        raise DataError("class too small to stratify")
    counts = _class_test_counts(sizes, spec.test_fraction)
    rng = np.random.default_rng(spec.iteration_seed(iteration))
    test = []
    train = []
    for c in classes:
        idx = np.nonzero(labels == c)[0]
        perm = rng.permutation(idx)
        test.append(perm[: counts[c]])
        train.append(perm[counts[c] :])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_kfold(labels, folds: int, seed: int):
    """Seeded stratified k-fold assignment; yields (train, validation) pairs."""
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.shape[0], dtype=int)
    for c in classes:
        idx = np.nonzero(labels == c)[0]
        if idx.size < folds:
            raise DataError(f"unstratifiable: class {c} has {idx.size} samples for {folds} folds")
        perm = rng.permutation(idx)
        assignment[perm] = np.arange(perm.size) % folds
    splits = []
    for f in range(folds):
        val = np.sort(np.nonzero(assignment == f)[0])
        train = np.sort(np.nonzero(assignment != f)[0])
        splits.append((train, val))
    return splits


def roc_auc(y_true, y_prob):
    """ROC curve and rank-statistic AUC (ties count one half).

    Returns (points, auc) where points are (fpr, tpr) pairs from a sweep
    over the unique scores, descending, starting at (0, 0).
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(y_prob, dtype=float)
    if y_true.shape[0] != scores.shape[0] or y_true.shape[0] == 0:
        raise DataError("roc_auc: invalid input lengths")
    pos = y_true == 1
    n_pos = int(pos.sum())
    n_neg = int(y_true.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc_auc: both classes required")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.shape[0], dtype=float)
    i = 0
    sorted_scores = scores[order]
    while i < scores.shape[0]:
        j = i
        while j + 1 < scores.shape[0] and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = midrank
        i = j + 1
    auc = (float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    points = [(0.0, 0.0)]
    for t in np.unique(scores)[::-1]:
        predicted = scores >= t
        tpr = float((predicted & pos).sum()) / n_pos
        fpr = float((predicted & ~pos).sum()) / n_neg
        points.append((fpr, tpr))
    return points, float(auc)


def compute_metrics(y_true, y_prob, threshold: float = 0.5) -> MetricReport:
    """Confusion-matrix metrics at a probability threshold (predict case at >= t)."""
    y_true = np.asarray(y_true)
    y_prob = np.asarray(y_prob, dtype=float)
    if y_true.shape[0] == 0:
        raise DataError("compute_metrics: empty input")
    if y_true.shape[0] != y_prob.shape[0]:
        raise DataError("compute_metrics: length mismatch")
    if np.any((y_prob < 0) | (y_prob > 1)):
        raise DataError("compute_metrics: probabilities outside [0, 1]")
    pred = y_prob >= threshold
    actual = y_true == 1
    tp = int((pred & actual).sum())
    tn = int((~pred & ~actual).sum())
    fp = int((pred & ~actual).sum())
    fn = int((~pred & actual).sum())
    total = tp + tn + fp + fn
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    specificity = tn / (tn + fp) if tn + fp > 0 else 0.0
    auc = roc_auc(y_true, y_prob)[1] if 0 < actual.sum() < total else 0.0
    return MetricReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        micro_f1=accuracy,  # micro-F1 == accuracy for binary single-label
        sensitivity=recall,
        specificity=specificity,
        auc=auc,
        confusion=((tn, fp), (fn, tp)),
    )
