import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localdiff.calibration import delta_mn
from localdiff.classify import (LabeledPoints, bernstein_ratio, build_classify_scan, classify_bernstein_quantile,
                                classify_correction, classify_stat, classify_test)
from localdiff.core import DataError, DegenerateError, KernelSpec
from localdiff.multiscale import kernel_weights, local_std
from localdiff.permutation import PermutationConfig, all_labelings


def test_classify_stat_examples():
    w = np.array([1, 1, 0, 0.0])
    g = local_std(w, 4)
    assert classify_stat(w, [1, 1, 0, 0], 0.5, g, 4) == pytest.approx(math.sqrt(3), rel=1e-14)
    assert classify_stat(w, [1, 0, 1, 0], 0.5, g, 4) == 0.0
    w2 = np.array([1, 0.6, 0.2, 0.0])
    y = [1, 0, 1, 1]
    base = classify_stat(w2, y, 0.3, local_std(w2, 4), 4)
    assert classify_stat(3 * w2, y, 0.3, local_std(3 * w2, 4), 4) == pytest.approx(base, rel=1e-14)
    with pytest.raises(DegenerateError):
        classify_stat(w, y, 0.5, 0.0, 4)


def test_classify_correction_examples():
    assert classify_correction(1.0, 0.4, 50) == 0.0
    expected = math.sqrt(3) * math.log(3) / 2 + math.sqrt(2 * math.log(3))
    assert classify_correction(1 / math.sqrt(3), 0.5, 4) == pytest.approx(expected, rel=1e-14)
    # quoted elsewhere as 2.43380; the formula gives 2.433730
    assert classify_correction(1 / math.sqrt(3), 0.5, 4) == pytest.approx(2.43380, abs=1e-4)
    vals = [classify_correction(0.3, 0.2, n) for n in (10, 100, 1000)]
    assert vals[0] > vals[1] > vals[2]
    with pytest.raises(ValueError):
        classify_correction(0.0, 0.5, 4)
    with pytest.raises(ValueError):
        classify_correction(0.5, 1.0, 4)


def test_labeled_points_validation():
    with pytest.raises(DataError):
        LabeledPoints(np.zeros((3, 1)), [0, 1], 0.5)
    with pytest.raises(DataError):
        LabeledPoints(np.zeros((2, 1)), [0, 2], 0.5)
    with pytest.raises(DataError):
        LabeledPoints(np.zeros((2, 1)), [0, 1], 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12))
def test_permutation_mean_identity(seed, n):
    r = np.random.default_rng(seed)
    lam = float(r.uniform(0.1, 0.9))
    ones = int(r.integers(1, n))
    w = r.random(n)
    g = local_std(w, n)
    z = all_labelings(n, ones)
    vals = np.array([classify_stat(w, y, lam, g, n) for y in z])
    expected = (ones - n * lam) * (w.sum() / n) / (math.sqrt(lam * (1 - lam)) * g * math.sqrt(n))
    assert vals.mean() == pytest.approx(expected, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12))
def test_bernstein_tail_under_permutation(seed, n):
    # with M = lam n ones the permuted statistic is a standardized hypergeometric sum
    r = np.random.default_rng(seed)
    ones = int(r.integers(1, n))
    lam = ones / n
    w = r.random(n)
    w[0] = 1.0
    g = local_std(w, n)
    if g < 1e-6:
        return
    z = all_labelings(n, ones)
    t = np.abs(np.array([classify_stat(w, y, lam, g, n) for y in z]))
    delta = delta_mn(ones, n)
    for eta in np.arange(1, 17) / 4:
        thr = classify_bernstein_quantile(eta, g, lam, n, delta)
        assert np.mean(t > thr) <= 2 * math.exp(-eta) + 1e-12


def test_bernstein_quantile_reduces():
    assert classify_bernstein_quantile(0.0, 0.5, 0.3, 20) == 0.0
    r = bernstein_ratio(0.3, 20) / 0.5
    assert classify_bernstein_quantile(2.0, 0.5, 0.3, 20) == pytest.approx(2 * r + math.sqrt(4 * r * r + 4), rel=1e-14)


def test_scan_statistics_match_classify_stat(rng):
    pts = rng.random((25, 2))
    y = rng.integers(0, 2, 25)
    data = LabeledPoints(pts, y, 0.35)
    for psi in (KernelSpec(), KernelSpec("recovery", beta=1.0)):
        scan = build_classify_scan(data, psi, 12)
        t = scan.statistics(data.y - 0.35)[0]
        for r in range(scan.size):
            w = kernel_weights(psi, scan.order, scan.j[r], scan.k[r])
            yo = data.y[scan.order.order[scan.j[r]]]
            yy = np.zeros(25)
            yy[: yo.size] = yo
            assert t[r] == pytest.approx(classify_stat(w, yy, 0.35, scan.gamma[r], 25), abs=1e-12)
        np.testing.assert_allclose(scan.correction, classify_correction(scan.gamma, 0.35, 25))


def test_classify_test_detects_local_shift():
    rng = np.random.default_rng(8)
    n, lam = 300, 0.3
    pts = rng.random((n, 2))
    inside = np.linalg.norm(pts - 0.5, axis=1) < 0.25
    hits = 0
    for i in range(10):
        p = np.where(inside, lam + 0.4, lam)
        y = (rng.random(n) < p).astype(int)
        rep = classify_test(LabeledPoints(pts, y, lam), PermutationConfig(B=199, seed=i))
        hits += rep.reject
        assert rep.reject == bool(rep.regions)
    assert hits >= 8


def test_classify_deterministic_and_null_level():
    rng = np.random.default_rng(9)
    pts = rng.random((60, 2))
    y = (rng.random(60) < 0.4).astype(int)
    data = LabeledPoints(pts, y, 0.4)
    cfg = PermutationConfig(B=99, seed=5)
    a, b = classify_test(data, cfg), classify_test(data, cfg)
    assert (a.t_n, a.p_value, a.kappa_alpha) == (b.t_n, b.p_value, b.kappa_alpha)
    rej = 0
    for i in range(300):
        y = (rng.random(60) < 0.4).astype(int)
        if 0 < y.sum() < 60:
            rej += classify_test(LabeledPoints(pts, y, 0.4), PermutationConfig(B=99, seed=i)).reject
    assert rej / 300 <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / 300)
