import numpy as np
import pytest

from brainet.preprocess import BiomarkerMatrix


def make_matrix(values, labels, names=None):
    values = np.asarray(values, dtype=float)
    if names is None:
        names = tuple(f"f{i}" for i in range(values.shape[1]))
    return BiomarkerMatrix(
        feature_names=tuple(names),
        values=values,
        labels=np.asarray(labels, dtype=int),
    )


@pytest.fixture
def toy_matrix():
    """Small informative dataset: feature 0 drives the label, 1-2 are noise."""
    rng = np.random.default_rng(1234)
    n = 80
    f0 = rng.standard_normal(n)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-3.0 * f0))).astype(int)
    values = np.column_stack([f0, rng.standard_normal(n), rng.standard_normal(n)])
    return make_matrix(values, y, names=("signal", "noise_a", "noise_b"))
