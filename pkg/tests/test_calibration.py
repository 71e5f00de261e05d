import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localdiff.calibration import (CalibrationConstants, bernstein_quantile, correction, delta_mn, gamma_log,
                                   r_psi)
from localdiff.verify import check_bernstein_quantile, standardized_sums


def delta_fraction(m, n):
    """Exact rational delta(m, n) from the binomial sum."""
    p = Fraction(m, n)
    total = sum(math.comb(n, s) * p**s * (1 - p) ** (n - s) * min(Fraction(s, m), Fraction(n - s, n - m))
                for s in range(n + 1))
    return 1 / total


def delta_mp(m, n):
    with mpmath.workdps(50):
        p = mpmath.mpf(m) / n
        total = mpmath.fsum(mpmath.binomial(n, s) * p**s * (1 - p) ** (n - s) * min(mpmath.mpf(s) / m, mpmath.mpf(n - s) / (n - m))
                            for s in range(n + 1))
        return float(1 / total)


def test_delta_hand_values():
    assert delta_mn(1, 2) == 2.0
    assert delta_mn(2, 4) == 1.6
    assert delta_fraction(2, 4) == Fraction(8, 5)


def test_delta_50_100_mad_identity():
    n = 100
    mad = sum(Fraction(math.comb(n, s), 2**n) * abs(s - 50) for s in range(n + 1))
    expected = float(1 / (1 - mad / 50))
    assert delta_mn(50, 100) == pytest.approx(expected, abs=1e-12)
    assert abs(delta_mn(50, 100) - 1.0865) <= 1e-3


@pytest.mark.parametrize("n", [2, 3, 7, 20, 61, 128, 200])
def test_delta_matches_extended_precision(n):
    for m in range(1, n):
        assert abs(delta_mn(m, n) - delta_mp(m, n)) <= 1e-12


def test_delta_bounds_and_symmetry_all_small_n():
    for n in range(2, 201):
        for m in range(1, n):
            d = delta_mn(m, n)
            assert d >= 1.0
            assert d == delta_mn(n - m, n)


def test_delta_large_n_stable():
    d = delta_mn(300_000, 1_000_000)
    assert 1.0 < d < 1.01


def test_delta_domain():
    with pytest.raises(ValueError):
        delta_mn(0, 5)


@pytest.mark.parametrize("m,n,expected", [(2, 4, 2 / 3), (1, 4, 2 / math.sqrt(3)), (30, 60, 2 / 3)])
def test_r_psi(m, n, expected):
    assert r_psi(m, n, 1.0) == pytest.approx(expected, rel=1e-15)


def test_gamma_log():
    assert gamma_log(0.3) == pytest.approx(1.2039728043259361, rel=1e-15)
    assert gamma_log(1.0) == 0.0
    assert gamma_log(1.05) == 0.0
    with pytest.raises(ValueError):
        gamma_log(0.0)


def test_constants_relation():
    c = CalibrationConstants.compute(7, 19)
    assert c.r_n == c.r_psi / math.sqrt(19)
    assert c.delta == CalibrationConstants.compute(12, 19).delta


def test_correction_example():
    c = CalibrationConstants.compute(2, 4)
    g = 1 / math.sqrt(3)
    big = math.log(3)
    term1 = 3 * (1 / 3) * 1.6 * big / g
    term2 = 1.6 * math.sqrt(2 * big)
    # the quoted four-digit term 3.0447 is rounded up from 3.04456
    assert term1 == pytest.approx(3.0447, abs=2e-4)
    assert term2 == pytest.approx(2.3717, abs=1e-4)
    assert correction(g, c) == pytest.approx(term1 + term2, rel=1e-14)
    assert correction(g, c) == pytest.approx(5.4163, abs=1e-4)
    assert correction(1.0, c) == 0.0


def test_correction_linear_in_delta_without_bernstein_term():
    g = math.sqrt(0.3)
    for delta in (1.0, 2.0, 4.0):
        c = CalibrationConstants(2, 4, delta, 0.0, 0.0)
        assert correction(g, c) == pytest.approx(delta * math.sqrt(2 * 1.2039728043259361), rel=1e-14)


@given(st.integers(2, 300).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))))
@settings(max_examples=50)
def test_correction_nonincreasing(nm):
    n, m = nm
    c = CalibrationConstants.compute(m, n)
    g = np.linspace(1e-3, 1.0, 400)
    v = correction(g, c)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 1e-12)


def test_correction_domain():
    with pytest.raises(ValueError):
        correction(0.0, CalibrationConstants.compute(2, 4))


def test_bernstein_quantile_basic():
    c = CalibrationConstants.compute(3, 10)
    assert bernstein_quantile(0.0, 0.4, c) == 0.0
    flat = CalibrationConstants(3, 10, c.delta, c.r_psi, c.r_n, psi_sup=0.0)
    assert bernstein_quantile(1.7, 0.4, flat) == pytest.approx(math.sqrt(2 * c.delta**2 * 1.7), rel=1e-15)
    eta = np.linspace(0, 10, 101)
    assert np.all(np.diff(bernstein_quantile(eta, 0.4, c)) > 0)
    with pytest.raises(ValueError):
        bernstein_quantile(-1.0, 0.4, c)
    with pytest.raises(ValueError):
        bernstein_quantile(1.0, 0.0, c)


def test_bernstein_quantile_hand_instance_tail():
    c = CalibrationConstants.compute(2, 4)
    g = 1 / math.sqrt(3)
    t = bernstein_quantile(math.log(3), g, c)
    s = np.abs(standardized_sums([1, 1, 0, 0], 2, 4))
    assert np.count_nonzero(s > t) / s.size <= 2 * g**2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12))
def test_bernstein_quantile_tail_enumeration(seed, n):
    r = np.random.default_rng(seed)
    m = int(r.integers(1, n))
    w = r.random(n)
    w[0] = 1.0
    if np.ptp(w) < 1e-6:
        return
    rep = check_bernstein_quantile(w, m, n, np.arange(1, 17) / 4)
    assert rep.violations == 0
