"""Special functions backing the statistical tests.

Self-contained implementations (no table lookups): the regularized
incomplete beta function via a modified Lentz continued fraction, and
normal/F tail probabilities built on it and on math.erfc.
"""

import math

from .errors import NumericError

_MAX_ITER = 500
_FPMIN = 1e-300
_EPS = 1e-16


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta integral (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise NumericError("betainc_reg requires a > 0 and b > 0")
    if x < 0.0 or x > 1.0:
        raise NumericError("betainc_reg requires x in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - log_beta(a, b))
    # use the fraction on the side where it converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def f_sf(f_stat: float, df_num: int, df_den: int) -> float:
    """Upper tail P(F >= f_stat) of the F distribution."""
    if df_num < 1 or df_den < 1:
        raise NumericError("F distribution requires positive degrees of freedom")
    if math.isinf(f_stat):
        return 0.0
    if f_stat <= 0.0:
        return 1.0
    x = df_den / (df_den + df_num * f_stat)
    return betainc_reg(df_den / 2.0, df_num / 2.0, x)


def normal_sf(z: float) -> float:
    """Upper tail P(Z >= z) of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def normal_two_sided_p(z: float) -> float:
    """Two-sided p-value for a standard-normal test statistic."""
    return math.erfc(abs(z) / math.sqrt(2.0))
