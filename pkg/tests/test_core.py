from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from localdiff.core import (DataError, DuplicatePointWarning, KernelSpec, PooledSample, WeightedLabels,
                            default_kmax, validate_sample, weighted_label)


@pytest.mark.parametrize("flag,m,n,expected", [(1, 2, 4, 2.0), (2, 2, 4, -2.0), (2, 1, 4, -4 / 3)])
def test_weighted_label_examples(flag, m, n, expected):
    assert weighted_label(flag, m, n) == expected


@pytest.mark.parametrize("m,n", [(0, 4), (4, 4), (5, 4)])
def test_weighted_label_domain(m, n):
    with pytest.raises(ValueError):
        weighted_label(1, m, n)


@given(st.integers(2, 500).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))))
def test_weighted_label_swap_symmetry(nm):
    n, m = nm
    assert weighted_label(1, m, n) == -weighted_label(2, n - m, n)


@given(st.lists(st.sampled_from([1, 2]), min_size=2, max_size=60).filter(lambda f: 1 in f and 2 in f))
def test_labels_sum_to_zero(flags):
    # the vanishing sum is over the labels themselves; the sum of their
    # reciprocals is (m^2 - (n-m)^2)/n and vanishes only when m = n/2
    n, m = len(flags), flags.count(1)
    exact = sum(Fraction(n, m) if f == 1 else -Fraction(n, n - m) for f in flags)
    assert exact == 0
    recip = sum(Fraction(m, n) if f == 1 else -Fraction(n - m, n) for f in flags)
    assert (recip == 0) == (2 * m == n)
    lab = WeightedLabels.from_flags(np.array(flags))
    assert abs(np.sum(lab.values)) < 1e-9 * n
    assert lab.m == m and lab.n == n
    assert np.count_nonzero(lab.values == n / m) == m


def test_validate_sample_builds_pooled_sample():
    s = validate_sample([[0, 0], [1, 0], [0, 1], [1, 1]], [1, 1, 2, 2])
    assert (s.m, s.n, s.d) == (2, 4, 2)
    assert s.points.dtype == np.float64
    np.testing.assert_array_equal(s.labels().values, [2, 2, -2, -2])


def test_validate_sample_errors():
    with pytest.raises(DataError):
        validate_sample([[0], [1]], [1, 1])
    with pytest.raises(DataError):
        validate_sample([[0, 1], [1]], [1, 2])
    with pytest.raises(DataError):
        validate_sample([[0.0], [np.nan]], [1, 2])
    with pytest.raises(DataError):
        validate_sample([[0.0], [1.0]], [1, 3])
    with pytest.raises(DataError):
        validate_sample([], [])


def test_duplicates_warn_but_pass():
    with pytest.warns(DuplicatePointWarning):
        s = validate_sample([[0.0], [0.0], [1.0]], [1, 2, 2])
    assert s.n == 3


def test_sample_is_immutable():
    s = PooledSample.from_groups([[0.0]], [[1.0]])
    with pytest.raises(ValueError):
        s.points[0, 0] = 5.0


def test_from_groups_dimension_mismatch():
    with pytest.raises(DataError):
        PooledSample.from_groups([[0.0, 1.0]], [[1.0]])


@pytest.mark.parametrize("spec", [KernelSpec(), KernelSpec("recovery", beta=0.5),
                                  KernelSpec("truncated-recovery", beta=1.0, K=0.5)])
def test_kernel_contract(spec):
    x = np.linspace(0, 3, 301)
    v = spec(x)
    assert spec(0.0) == 1.0
    assert np.max(np.abs(v)) <= 1.0
    assert np.all(v[x > 1] == 0)


def test_kernel_values():
    assert KernelSpec("recovery", beta=1.0)(0.5) == 0.5
    assert KernelSpec("truncated-recovery", beta=1.0, K=0.5)(1.0) == 0.5
    np.testing.assert_array_equal(KernelSpec()([0.0, 1.0, 1.0 + 1e-12]), [1, 1, 0])


def test_kernel_rejects_bad_parameters():
    with pytest.raises(ValueError):
        KernelSpec("recovery", beta=2.0)
    with pytest.raises(ValueError):
        KernelSpec("recovery")
    with pytest.raises(ValueError):
        KernelSpec("truncated-recovery", beta=1.0)
    with pytest.raises(ValueError):
        KernelSpec.parse("gaussian")


def test_default_kmax():
    assert default_kmax(2) == 1
    assert default_kmax(5) == 3
    assert default_kmax(60) == 30
