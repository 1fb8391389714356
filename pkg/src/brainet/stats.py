"""Correlation, one-way ANOVA, and logistic Wald tests.

The correlation coefficient is computed in the raw-sums form used for the
graph edge weights: numerator sum(x*y) - (1/n)sum(x)sum(y), denominator
sqrt(V(x)V(y)) with V(v) = (1/n)[n*sum(v^2) - sum(v)^2]. This is
algebraically the product-moment coefficient; the test suite checks the
identity against the textbook formulation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .special import f_sf, normal_two_sided_p

NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
SEPARATION_COEF_BOUND = 1e3


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    r: np.ndarray  # p x p, symmetric, unit diagonal

    def __post_init__(self):
        if self.r.shape != (len(self.names), len(self.names)):
            raise DataError("correlation matrix shape does not match names")


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float


def pearson(x, y) -> float:
    """Correlation of two equal-length vectors, raw-sums form."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if y.shape[0] != n:
        raise DataError("pearson: length mismatch")
    if n < 2:
        raise DataError("pearson: need at least 2 observations")
    sx = float(np.sum(x))
    sy = float(np.sum(y))
    sxy = float(np.sum(x * y))
    var_x = (n * float(np.sum(x * x)) - sx * sx) / n
    var_y = (n * float(np.sum(y * y)) - sy * sy) / n
    if var_x <= 0.0 or var_y <= 0.0:
        raise DataError("undefined correlation: constant input")
    r = (sxy - sx * sy / n) / np.sqrt(var_x * var_y)
    # guard against eps-level excursions outside [-1, 1]
    return float(min(1.0, max(-1.0, r)))


def correlation_matrix(matrix, subset=None) -> CorrelationMatrix:
    """Pairwise correlations over a named feature subset of a BiomarkerMatrix."""
    names = list(matrix.feature_names) if subset is None else list(subset)
    if not names:
        raise DataError("correlation_matrix: empty feature subset")
    index = {name: i for i, name in enumerate(matrix.feature_names)}
    missing = [name for name in names if name not in index]
    if missing:
        raise DataError(f"correlation_matrix: unknown features {missing}")
    cols = [matrix.values[:, index[name]] for name in names]
    p = len(names)
    r = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            try:
                rij = pearson(cols[i], cols[j])
            except DataError as exc:
                raise DataError(f"correlation_matrix: {exc} (pair {names[i]!r}, {names[j]!r})") from exc
            r[i, j] = rij
            r[j, i] = rij
    return CorrelationMatrix(names=tuple(names), r=r)


def anova_oneway(groups) -> AnovaResult:
    """One-way F test comparing group means."""
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if len(arrays) < 2:
        raise DataError("anova_oneway: need at least 2 groups")
    for g in arrays:
        if g.shape[0] < 2:
            raise DataError("anova_oneway: each group needs at least 2 values")
    n_total = sum(g.shape[0] for g in arrays)
    df_between = len(arrays) - 1
    df_within = n_total - len(arrays)
    if df_within < 1:
        raise DataError("anova_oneway: no within-group degrees of freedom")
    grand = sum(float(np.sum(g)) for g in arrays) / n_total
    ssb = sum(g.shape[0] * (float(np.mean(g)) - grand) ** 2 for g in arrays)
    ssw = sum(float(np.sum((g - np.mean(g)) ** 2)) for g in arrays)
    if ssw == 0.0:
        # degenerate variance split; F pinned to 0 when between-variance is 0 too
        f_stat = 0.0 if ssb == 0.0 else float("inf")
    else:
        f_stat = (ssb / df_between) / (ssw / df_within)
    return AnovaResult(
        f_stat=f_stat,
        df_between=df_between,
        df_within=df_within,
        p_value=f_sf(f_stat, df_between, df_within),
    )


def fit_logistic_newton(design: np.ndarray, y: np.ndarray):
    """Unpenalized logistic fit by Newton-Raphson.

    Returns (beta, covariance) where covariance is the inverse observed
    information at the optimum. Raises NumericError on detected separation
    or non-convergence.
    """
    n, k = design.shape
    beta = np.zeros(k)
    for _ in range(NEWTON_MAX_ITER):
        z = design @ beta
        p = 1.0 / (1.0 + np.exp(-z))
        w = p * (1.0 - p)
        grad = design.T @ (y - p)
        info = (design * w[:, None]).T @ design
        try:
            delta = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericError("complete separation: singular information matrix") from exc
        beta = beta + delta
        if np.max(np.abs(beta)) > SEPARATION_COEF_BOUND:
            raise NumericError("complete separation: coefficients diverging")
        if np.max(np.abs(delta)) < NEWTON_TOL:
            z = design @ beta
            p = 1.0 / (1.0 + np.exp(-z))
            w = p * (1.0 - p)
            info = (design * w[:, None]).T @ design
            try:
                cov = np.linalg.inv(info)
            except np.linalg.LinAlgError as exc:
                raise NumericError("complete separation: singular information matrix") from exc
            return beta, cov
    raise NumericError("complete separation: Newton iterations did not converge")


def logistic_coefficient_pvalues(matrix, covariates=()) -> dict:
    """Wald p-value of each feature in a logistic model of the label.

    Each feature is fit in its own model (intercept + feature + the named
    covariate columns); the returned map covers every feature that is not
    itself a covariate. Supplying e.g. an age column as covariate adjusts
    every per-feature test for age.
    """
    index = {name: i for i, name in enumerate(matrix.feature_names)}
    for name in covariates:
        if name not in index:
            raise DataError(f"logistic_coefficient_pvalues: unknown covariate {name!r}")
    y = np.asarray(matrix.labels, dtype=float)
    n = matrix.values.shape[0]
    cov_block = (
        matrix.values[:, [index[name] for name in covariates]]
        if covariates
        else np.empty((n, 0))
    )
    pvalues = {}
    for name in matrix.feature_names:
        if name in covariates:
            continue
        design = np.column_stack([np.ones(n), matrix.values[:, index[name]], cov_block])
        beta, cov = fit_logistic_newton(design, y)
        se = np.sqrt(cov[1, 1])
        z = beta[1] / se
        pvalues[name] = normal_two_sided_p(float(z))
    return pvalues
