import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localdiff.core import KernelSpec, PooledSample, WeightedLabels
from localdiff.multiscale import build_scan
from localdiff.permutation import (PermutationConfig, StreamFactory, derived_seed, exact_distribution,
                                   exact_quantile, exact_rejection_probability, p_value, permutation_quantile,
                                   permutation_statistics, permute_labels, pooled_quantile, run_test, stream)

from conftest import uniform_sample


def test_permute_labels_two_points():
    s = PooledSample(np.array([[0.0], [1.0]]), np.array([1, 2]))
    first = [permute_labels(s, stream(7, b)).values[0] > 0 for b in range(10_000)]
    assert abs(np.mean(first) - 0.5) <= 0.02


def test_permute_labels_four_points_equifrequent():
    s = PooledSample(np.arange(4.0)[:, None], np.array([1, 1, 2, 2]))
    make = StreamFactory(11)
    draws = 60_000
    counts = {}
    for b in range(draws):
        key = tuple(permute_labels(s, make(b)).values > 0)
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    p = 1 / 6
    sigma = math.sqrt(draws * p * (1 - p))
    assert all(abs(c - draws * p) <= 3 * sigma for c in counts.values())
    chi2 = sum((c - draws * p) ** 2 / (draws * p) for c in counts.values())
    assert chi2 < 20.5  # 0.999 quantile with 5 degrees of freedom


def test_permute_labels_accepts_arrays_and_is_deterministic():
    lab = WeightedLabels.from_flags(np.array([1, 1, 2, 2, 2]))
    a = [permute_labels(lab, stream(3, b)).values for b in range(20)]
    b = [permute_labels(lab.values, stream(3, b)).values for b in range(20)]
    np.testing.assert_array_equal(a, b)
    assert sorted(a[0]) == sorted(lab.values)


def test_streams_distinct_and_reproducible():
    assert stream(1, 0).random() == stream(1, 0).random()
    assert stream(1, 0).random() != stream(1, 1).random()
    assert stream(1, 0).random() != stream(2, 0).random()
    assert stream(1, 0, tag=2).random() != stream(1, 0, tag=1).random()
    assert derived_seed(5, 3) == derived_seed(5, 3) != derived_seed(5, 4)
    assert 0 <= derived_seed(5, 3) < 2**63


def test_pooled_quantile_index_arithmetic(rng):
    perm = rng.normal(size=999)
    t = 0.123
    pool = np.sort(np.append(perm, t))
    assert pooled_quantile(t, perm, 0.05) == pool[949]
    assert pooled_quantile(5.0, [1.0], 0.5) == 1.0
    assert pooled_quantile(0.5, [1.0], 0.5) == 0.5


def test_p_value_examples():
    assert p_value(10.0, np.arange(9.0)) == pytest.approx(0.1)
    assert p_value(0.0, np.arange(9.0)) == 1.0
    assert p_value(-1.0, np.arange(9.0)) == 1.0


@settings(max_examples=200)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=40), st.integers(-6, 6),
       st.sampled_from([0.01, 0.05, 0.1, 0.2, 0.5, 0.9]))
def test_reject_iff_above_quantile(perm, t, alpha):
    # integer-valued statistics force many ties
    perm = np.array(perm, float)
    p = p_value(t, perm)
    kappa = pooled_quantile(t, perm, alpha)
    assert (p <= alpha) == (t > kappa)
    assert round(p * (len(perm) + 1)) == pytest.approx(p * (len(perm) + 1))


def exact_quantile_oracle(dist, alpha):
    vals = np.unique(dist)
    for c in vals:
        if np.mean(dist <= c) >= 1 - alpha - 1e-15:
            return c


@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.5])
def test_exact_quantile_matches_definition(rng, alpha):
    dist = rng.integers(0, 7, 70).astype(float)
    assert exact_quantile(dist, alpha) == exact_quantile_oracle(dist, alpha)


def test_monte_carlo_quantile_within_one_atom_of_exact():
    rng = np.random.default_rng(5)
    for n, m in [(5, 2), (6, 3), (6, 2)]:
        s = uniform_sample(rng, n, m, 2)
        scan = build_scan(s, KernelSpec("recovery", beta=1.0), n - 1)
        dist = exact_distribution(scan, n, m)
        atoms = np.unique(np.round(dist, 12))
        for alpha in (0.1, 0.5):
            cfg = PermutationConfig(B=100_000, alpha=alpha, seed=1, k_max=n - 1)
            kappa, perm = permutation_quantile(s, replace(cfg, kernel=KernelSpec("recovery", beta=1.0)), scan)
            i_mc = np.searchsorted(atoms, round(kappa, 12))
            i_ex = np.searchsorted(atoms, round(exact_quantile(dist, alpha), 12))
            assert abs(i_mc - i_ex) <= 1


@pytest.mark.parametrize("psi", [KernelSpec(), KernelSpec("recovery", beta=0.5)], ids=["rect", "recovery"])
def test_exact_level_small_n(psi):
    rng = np.random.default_rng(0)
    for n in range(2, 7):
        for m in range(1, n):
            s = uniform_sample(rng, n, m, 2)
            scan = build_scan(s, psi, n - 1)
            dist = exact_distribution(scan, n, m)
            for alpha in (0.05, 0.1, 0.5):
                rejected, total = exact_rejection_probability(dist, alpha)
                assert rejected <= alpha * total


def test_run_test_determinism_and_report(rng):
    s = uniform_sample(rng, 40, 15, 2)
    cfg = PermutationConfig(B=99, seed=4)
    a, b = run_test(s, cfg), run_test(s, cfg)
    assert a.t_n == b.t_n and a.kappa_alpha == b.kappa_alpha and a.p_value == b.p_value
    assert [r.to_dict() for r in a.regions] == [r.to_dict() for r in b.regions]
    assert a.reject == (a.p_value <= cfg.alpha) == bool(a.regions)
    assert a.perm_stats is None
    assert a.config == {"kernel": {"family": "rectangular"}, "k_max": 20, "B": 99, "alpha": 0.05, "seed": 4,
                        "one_sided": False}


def test_threads_do_not_change_results(rng):
    s = uniform_sample(rng, 50, 25, 2)
    for psi in (KernelSpec(), KernelSpec("recovery", beta=1.0)):
        scan = build_scan(s, psi)
        v = s.labels().values
        one = permutation_statistics(scan, v, 300, 9, threads=1)
        many = permutation_statistics(scan, v, 300, 9, threads=4)
        np.testing.assert_array_equal(one, many)


def test_permutation_prefix_stability(rng):
    s = uniform_sample(rng, 30, 10, 2)
    scan = build_scan(s, KernelSpec())
    v = s.labels().values
    np.testing.assert_array_equal(permutation_statistics(scan, v, 64, 2), permutation_statistics(scan, v, 200, 2)[:64])


def test_strong_signal_rejects(rng):
    a = rng.random((40, 2)) * 0.3
    b = rng.random((40, 2))
    s = PooledSample(np.vstack([a, b]), np.r_[np.ones(40, int), np.full(40, 2)])
    rep = run_test(s, PermutationConfig(B=199, seed=1, emit_perm_stats=True))
    assert rep.reject and rep.regions and rep.p_value == 1 / 200
    assert rep.perm_stats.shape == (199,)
    assert all(abs(r.t_stat) - r.correction > rep.kappa_alpha for r in rep.regions)


def test_degenerate_sample_gives_p_one():
    s = PooledSample(np.zeros((6, 1)), np.array([1, 1, 1, 2, 2, 2]))
    rep = run_test(s, PermutationConfig(B=19, seed=0))
    assert rep.t_n == -math.inf and rep.p_value == 1.0 and not rep.reject and rep.regions == []


def test_config_validation():
    with pytest.raises(ValueError):
        PermutationConfig(B=0)
    with pytest.raises(ValueError):
        PermutationConfig(alpha=1.0)
    with pytest.raises(ValueError):
        PermutationConfig(threads=0)
