import math

import numpy as np
import pytest
import scipy.special as sp
import scipy.stats

from brainet.errors import NumericError
from brainet.special import betainc_reg, f_sf, normal_sf, normal_two_sided_p


def test_betainc_edges():
    assert betainc_reg(2.0, 3.0, 0.0) == 0.0
    assert betainc_reg(2.0, 3.0, 1.0) == 1.0
    with pytest.raises(NumericError):
        betainc_reg(-1.0, 2.0, 0.5)
    with pytest.raises(NumericError):
        betainc_reg(1.0, 2.0, 1.5)


def test_betainc_matches_scipy_to_1e12():
    rng = np.random.default_rng(202401)
    for _ in range(3000):
        a = rng.uniform(0.2, 120.0)
        b = rng.uniform(0.2, 120.0)
        x = rng.random()
        assert betainc_reg(a, b, x) == pytest.approx(sp.betainc(a, b, x), abs=1e-12)


def test_f_tail_matches_scipy():
    rng = np.random.default_rng(7)
    for _ in range(500):
        d1 = int(rng.integers(1, 40))
        d2 = int(rng.integers(1, 200))
        f = float(rng.uniform(0.0, 12.0))
        assert f_sf(f, d1, d2) == pytest.approx(scipy.stats.f.sf(f, d1, d2), abs=1e-12)
    assert f_sf(0.0, 3, 10) == 1.0
    assert f_sf(math.inf, 3, 10) == 0.0


def test_normal_tails():
    for z in (-4.0, -1.0, 0.0, 0.5, 3.0, 8.0):
        assert normal_sf(z) == pytest.approx(scipy.stats.norm.sf(z), rel=1e-12, abs=1e-300)
    assert normal_two_sided_p(0.0) == 1.0
    assert normal_two_sided_p(1.959963984540054) == pytest.approx(0.05, abs=1e-12)
