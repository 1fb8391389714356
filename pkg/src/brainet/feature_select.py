"""Discretized mutual information and greedy quotient-form mRMR ranking.

Relevance of a candidate set is the mean label MI over its members;
redundancy is the mean pairwise MI over all ordered member pairs,
self-information terms included (divide by |S|^2). The greedy step
maximizes relevance/redundancy over candidates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

REDUNDANCY_FLOOR = 1e-12


@dataclass(frozen=True)
class DiscreteSeries:
    codes: np.ndarray  # ints in [0, bins)
    bins: int

    def __post_init__(self):
        if self.bins < 1:
            raise DataError("bins must be positive")
        if self.codes.size and int(self.codes.max()) >= self.bins:
            raise DataError("code out of range")


@dataclass(frozen=True)
class MrmrResult:
    order: tuple[int, ...]
    gains: tuple[float, ...]
    relevance_cache: tuple[float, ...]  # label MI per feature, all features
    redundancy_trace: tuple[float, ...]  # redundancy of the selected set per step


def discretize(values, bins: int) -> DiscreteSeries:
    """Equal-frequency binning by rank; ties resolved by original index."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < bins:
        raise DataError(f"discretize: need at least {bins} values, got {n}")
    order = np.lexsort((np.arange(n), values))  # stable (value, index) sort
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n)
    codes = (ranks * bins) // n
    return DiscreteSeries(codes=codes, bins=bins)


def mutual_information(x: DiscreteSeries, y: DiscreteSeries) -> float:
    """Plug-in mutual information in nats; zero-probability terms contribute 0."""
    if x.codes.shape[0] != y.codes.shape[0]:
        raise DataError("mutual_information: length mismatch")
    n = x.codes.shape[0]
    joint = np.zeros((x.bins, y.bins))
    np.add.at(joint, (x.codes, y.codes), 1.0)
    joint /= n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mi = 0.0
    for i, j in zip(*np.nonzero(joint)):
        p = float(joint[i, j])
        mi += p * math.log(p / float(px[i] * py[j]))
    return max(0.0, mi)


def entropy(x: DiscreteSeries) -> float:
    """Empirical Shannon entropy in nats."""
    counts = np.bincount(x.codes, minlength=x.bins).astype(float)
    p = counts[counts > 0] / x.codes.shape[0]
    return float(-(p * np.log(p)).sum())


def _set_scores(members, relevance, pair_mi):
    """Relevance and redundancy of a candidate set per the quotient criterion."""
    size = len(members)
    v = sum(relevance[i] for i in members) / size
    w = sum(pair_mi(i, j) for i in members for j in members) / (size * size)
    return v, w


def mrmr_select(matrix, m: int, bins: int = 10, include_diagonal: bool = True) -> MrmrResult:
    """Greedy mRMR over a BiomarkerMatrix: pick m features maximizing
    relevance/redundancy; the first pick is the most label-informative
    feature. Ties break toward the lower feature index.

    include_diagonal=False drops the self-information terms from the
    redundancy sum (normalization unchanged); the default follows the
    quotient criterion as stated.
    """
    p = matrix.values.shape[1]
    if m < 1:
        raise DataError("mrmr_select: m must be >= 1")
    if m > p:
        raise DataError(f"mrmr_select: m={m} exceeds feature count {p}")
    label = DiscreteSeries(codes=np.asarray(matrix.labels, dtype=np.int64), bins=2)
    series = [discretize(matrix.values[:, j], bins) for j in range(p)]
    relevance = [mutual_information(label, s) for s in series]

    mi_cache: dict[tuple[int, int], float] = {}

    def pair_mi(i: int, j: int) -> float:
        if not include_diagonal and i == j:
            return 0.0
        key = (i, j) if i <= j else (j, i)
        if key not in mi_cache:
            mi_cache[key] = mutual_information(series[key[0]], series[key[1]])
        return mi_cache[key]

    selected: list[int] = []
    gains: list[float] = []
    trace: list[float] = []
    remaining = list(range(p))
    while len(selected) < m:
        best_j = None
        best_gain = -math.inf
        best_w = 0.0
        for j in remaining:
            if not selected:
                gain, w = relevance[j], pair_mi(j, j) / 1.0
            else:
                v, w = _set_scores(selected + [j], relevance, pair_mi)
                gain = v if w < REDUNDANCY_FLOOR else v / w
            if gain > best_gain:
                best_j, best_gain, best_w = j, gain, w
        selected.append(best_j)
        gains.append(best_gain)
        trace.append(best_w)
        remaining.remove(best_j)
    return MrmrResult(
        order=tuple(selected),
        gains=tuple(gains),
        relevance_cache=tuple(relevance),
        redundancy_trace=tuple(trace),
    )
