import math

import numpy as np
import pytest

from brainet.errors import DataError, NumericError
from brainet.stats import (
    anova_oneway,
    correlation_matrix,
    fit_logistic_newton,
    logistic_coefficient_pvalues,
    pearson,
)
from conftest import make_matrix


def reference_pearson(x, y):
    """Textbook product-moment form: (n*Sxy - Sx*Sy) / sqrt((n*Sxx - Sx^2)(n*Syy - Sy^2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    sx, sy = x.sum(), y.sum()
    num = n * (x * y).sum() - sx * sy
    den = math.sqrt((n * (x * x).sum() - sx * sx) * (n * (y * y).sum() - sy * sy))
    return num / den


class TestPearson:
    def test_perfect_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == 1.0

    def test_hand_case(self):
        assert pearson([1, 2, 3], [1, 3, 2]) == 0.5

    def test_sign_flip(self):
        x = np.array([0.3, -1.2, 2.5, 0.9])
        assert pearson(x, -x) == -1.0

    def test_constant_input_rejected(self):
        with pytest.raises(DataError, match="undefined correlation"):
            pearson([5, 5, 5], [1, 2, 3])

    def test_matches_product_moment_identity(self):
        rng = np.random.default_rng(55)
        for _ in range(300):
            n = int(rng.integers(2, 40))
            x = rng.standard_normal(n)
            y = rng.standard_normal(n)
            assert pearson(x, y) == pytest.approx(reference_pearson(x, y), abs=1e-12)


class TestCorrelationMatrix:
    def test_single_feature(self):
        m = make_matrix([[1.0], [2.0], [3.0]], [0, 1, 0])
        corr = correlation_matrix(m, ["f0"])
        assert corr.r.shape == (1, 1) and corr.r[0, 0] == 1.0

    def test_duplicated_feature(self):
        m = make_matrix([[1.0, 1.0], [2.0, 2.0], [4.0, 4.0]], [0, 1, 0])
        corr = correlation_matrix(m)
        assert corr.r[0, 1] == 1.0

    def test_independent_noise_near_zero(self):
        rng = np.random.default_rng(99)
        m = make_matrix(rng.standard_normal((10_000, 3)), rng.integers(0, 2, 10_000))
        corr = correlation_matrix(m)
        off = corr.r[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) < 0.05)

    def test_symmetric_unit_diagonal_bounded(self):
        rng = np.random.default_rng(4)
        m = make_matrix(rng.standard_normal((50, 6)), rng.integers(0, 2, 50))
        corr = correlation_matrix(m)
        assert np.array_equal(corr.r, corr.r.T)
        assert np.all(np.diag(corr.r) == 1.0)
        assert np.all((corr.r >= -1.0) & (corr.r <= 1.0))

    def test_affine_invariance_positive_scale(self):
        rng = np.random.default_rng(21)
        values = rng.standard_normal((200, 4))
        m1 = make_matrix(values, rng.integers(0, 2, 200))
        m2 = make_matrix(values * np.array([2.0, 0.5, 7.0, 1.3]) + np.array([1.0, -3.0, 0.0, 42.0]),
                         m1.labels)
        r1 = correlation_matrix(m1).r
        r2 = correlation_matrix(m2).r
        assert np.max(np.abs(r1 - r2)) < 1e-12

    def test_constant_column_rejected(self):
        m = make_matrix([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]], [0, 1, 0])
        with pytest.raises(DataError, match="undefined correlation"):
            correlation_matrix(m)


class TestAnova:
    def test_identical_groups(self):
        res = anova_oneway([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
        assert res.f_stat == 0.0
        assert res.p_value == 1.0

    def test_hand_case(self):
        res = anova_oneway([[1, 2, 3], [2, 3, 4]])
        assert res.f_stat == pytest.approx(1.5, abs=1e-9)
        assert (res.df_between, res.df_within) == (1, 4)

    def test_shifted_group_significant(self):
        res = anova_oneway([[1.0, 2.0, 1.5, 2.2], [40.0, 41.0, 40.5, 39.5]])
        assert res.p_value < 0.05

    def test_scale_invariance_of_f(self):
        rng = np.random.default_rng(13)
        groups = [rng.standard_normal(12), rng.standard_normal(9) + 0.4]
        base = anova_oneway(groups)
        scaled = anova_oneway([g * 10.0 for g in groups])
        assert scaled.f_stat == pytest.approx(base.f_stat, abs=1e-9)

    def test_small_group_rejected(self):
        with pytest.raises(DataError):
            anova_oneway([[1.0], [2.0, 3.0]])

    def test_p_monotone_in_f(self):
        from brainet.special import f_sf

        ps = [f_sf(f, 2, 30) for f in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(ps, ps[1:]))


class TestLogisticPvalues:
    def test_strong_feature_significant(self):
        rng = np.random.default_rng(3)
        n = 400
        x = rng.standard_normal(n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-4.0 * x))).astype(int)
        m = make_matrix(np.column_stack([x, rng.standard_normal(n)]), y, names=("hit", "noise"))
        p = logistic_coefficient_pvalues(m)
        assert p["hit"] < 0.001

    def test_covariate_adjustment_raises_p(self):
        # feature is a noisy copy of the driver covariate: significant alone,
        # not once the covariate joins the model
        rng = np.random.default_rng(8)
        n = 600
        age = rng.standard_normal(n)
        feature = age + 0.6 * rng.standard_normal(n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-2.0 * age))).astype(int)
        m = make_matrix(np.column_stack([feature, age]), y, names=("igfbp2", "age"))
        unadjusted = logistic_coefficient_pvalues(m)["igfbp2"]
        adjusted = logistic_coefficient_pvalues(m, covariates=("age",))["igfbp2"]
        assert adjusted > unadjusted
        assert unadjusted < 0.05

    def test_complete_separation_detected(self):
        x = np.array([-2.0, -1.5, -1.0, 1.0, 1.5, 2.0])
        y = np.array([0, 0, 0, 1, 1, 1])
        m = make_matrix(x[:, None], y, names=("sep",))
        with pytest.raises(NumericError, match="separation"):
            logistic_coefficient_pvalues(m)

    def test_newton_matches_closed_intercept(self):
        # intercept-only fit recovers the prior log odds
        y = np.array([1.0] * 30 + [0.0] * 10)
        beta, _ = fit_logistic_newton(np.ones((40, 1)), y)
        assert beta[0] == pytest.approx(math.log(3.0), abs=1e-8)
