"""Rerandomization calibration of the multiscale test.

Permutation ``b`` draws from its own counter-based stream (Philox keyed by
the seed, counter offset by ``b``), so the set of permuted statistics does
not depend on how permutations are split across worker threads.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import KernelSpec, PooledSample, WeightedLabels, default_kmax
from .multiscale import LinearScan, MultiscaleResult, build_scan, evaluate, significant_regions

PERMUTATION_STREAM = 1
SAMPLING_STREAM = 2
REPLICATION_STREAM = 3


@dataclass(frozen=True)
class PermutationConfig:
    B: int = 999
    alpha: float = 0.05
    seed: int = 0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    k_max: Optional[int] = None
    one_sided: bool = False
    threads: int = 1
    emit_perm_stats: bool = False
    neighbor_method: str = "brute"

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def echo(self, k_max: int) -> dict:
        return {
            "kernel": self.kernel.describe(),
            "k_max": int(k_max),
            "B": int(self.B),
            "alpha": float(self.alpha),
            "seed": int(self.seed),
            "one_sided": bool(self.one_sided),
        }


@dataclass
class TestReport:
    t_n: float
    kappa_alpha: float
    p_value: float
    reject: bool
    regions: list
    config: dict
    sample: dict
    perm_stats: Optional[np.ndarray] = None
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _key(seed: int, tag: int) -> np.ndarray:
    return np.random.SeedSequence(int(seed) % 2**64, spawn_key=(tag,)).generate_state(2, np.uint64)


def stream(seed: int, index: int, tag: int = PERMUTATION_STREAM) -> np.random.Generator:
    """Independent generator number ``index`` for ``seed``."""
    return np.random.Generator(np.random.Philox(counter=[0, 0, 0, index], key=_key(seed, tag)))


class StreamFactory:
    """Caches the Philox key so per-permutation generators are cheap."""

    def __init__(self, seed: int, tag: int = PERMUTATION_STREAM):
        self.key = _key(seed, tag)

    def __call__(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(counter=[0, 0, 0, index], key=self.key))


def derived_seed(seed: int, index: int, tag: int = REPLICATION_STREAM) -> int:
    """A 63-bit seed for replication ``index``."""
    state = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(tag, index)).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def permute_labels(sample: PooledSample | WeightedLabels | np.ndarray, rng: np.random.Generator) -> WeightedLabels:
    """Uniformly relabel the pooled sample (Fisher-Yates shuffle of the labels)."""
    if isinstance(sample, PooledSample):
        values = sample.labels().values
    elif isinstance(sample, WeightedLabels):
        values = sample.values
    else:
        values = np.asarray(sample, dtype=np.float64)
    return WeightedLabels(rng.permutation(values))


def permuted_values(values: np.ndarray, seed: int, start: int, stop: int,
                    tag: int = PERMUTATION_STREAM) -> np.ndarray:
    make = StreamFactory(seed, tag)
    out = np.empty((stop - start, values.size))
    for row, b in enumerate(range(start, stop)):
        out[row] = make(b).permutation(values)
    return out


def permutation_statistics(scan: LinearScan, values: np.ndarray, B: int, seed: int,
                           one_sided: bool = False, threads: int = 1,
                           block: int = 64) -> np.ndarray:
    """Corrected suprema for permutations ``0 .. B-1``, in permutation order."""
    values = np.asarray(values, dtype=np.float64)
    bounds = [(s, min(B, s + block)) for s in range(0, B, block)]

    def work(bound):
        vals = permuted_values(values, seed, *bound)
        return scan.supremum(vals, one_sided)

    if threads == 1 or len(bounds) == 1:
        parts = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    return np.concatenate(parts) if parts else np.empty(0)


def _allowed_exceedances(alpha: float, total: int) -> int:
    """Largest c with c / total <= alpha, evaluated the same way as ``p <= alpha``."""
    c = int(math.floor(alpha * total))
    while c + 1 <= total and (c + 1) / total <= alpha:
        c += 1
    while c > 0 and c / total > alpha:
        c -= 1
    return c


def pooled_quantile(t_obs: float, perm_stats: np.ndarray, alpha: float) -> float:
    """The ceil((B+1)(1-alpha))-th smallest of the permuted values plus the observed one."""
    pool = np.sort(np.append(np.asarray(perm_stats, dtype=np.float64), t_obs))
    total = pool.size
    rank = total - _allowed_exceedances(alpha, total)
    return float(pool[rank - 1])


def p_value(t_obs: float, perm_stats) -> float:
    perm_stats = np.asarray(perm_stats, dtype=np.float64)
    return (1 + int(np.count_nonzero(perm_stats >= t_obs))) / (perm_stats.size + 1)


def permutation_quantile(sample: PooledSample, config: PermutationConfig, scan: LinearScan | None = None):
    """Monte Carlo rerandomization quantile and the ``B`` permuted statistics."""
    scan = build_scan(sample, config.kernel, config.k_max, method=config.neighbor_method) if scan is None else scan
    values = sample.labels().values
    t_obs = float(scan.supremum(values, config.one_sided)[0])
    perm = permutation_statistics(scan, values, config.B, config.seed, config.one_sided, config.threads)
    return pooled_quantile(t_obs, perm, config.alpha), perm


def calibrate(scan: LinearScan, points: np.ndarray, values: np.ndarray, config: PermutationConfig,
              sample_summary: dict, k_max: int,
              regions_fn: Callable[[MultiscaleResult, float], list] = significant_regions,
              timings: dict | None = None) -> TestReport:
    """Shared tail of every test: observe, rerandomize, threshold, report."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    observed = evaluate(scan, points, values, config.one_sided)
    perm = permutation_statistics(scan, values, config.B, config.seed, config.one_sided, config.threads)
    timings["permutations_s"] = time.perf_counter() - t0
    kappa = pooled_quantile(observed.t_n, perm, config.alpha)
    p = p_value(observed.t_n, perm)
    regions = regions_fn(observed, kappa)
    reject = p <= config.alpha
    if reject != bool(regions):
        raise AssertionError("region set and test decision disagree")
    return TestReport(
        t_n=observed.t_n,
        kappa_alpha=kappa,
        p_value=p,
        reject=reject,
        regions=regions,
        config=config.echo(k_max),
        sample=sample_summary,
        perm_stats=perm if config.emit_perm_stats else None,
        timings=timings,
    )


def run_test(sample: PooledSample, config: PermutationConfig) -> TestReport:
    """Multiscale two-sample rerandomization test."""
    k_max = default_kmax(sample.n) if config.k_max is None else config.k_max
    t0 = time.perf_counter()
    scan = build_scan(sample, config.kernel, k_max, method=config.neighbor_method)
    timings = {"setup_s": time.perf_counter() - t0}
    summary = {"n": sample.n, "m": sample.m, "d": sample.d}
    return calibrate(scan, sample.points, sample.labels().values, config, summary, k_max, timings=timings)


# -- exhaustive enumeration (small n) ------------------------------------------------


def all_labelings(n: int, m: int) -> np.ndarray:
    """Every assignment of m first-sample flags among n points, as a 0/1 matrix."""
    if n > 20:
        raise ValueError("enumeration limited to n <= 20")
    combos = np.array(list(itertools.combinations(range(n), m)), dtype=np.int64).reshape(-1, m)
    z = np.zeros((combos.shape[0], n), dtype=np.int8)
    np.put_along_axis(z, combos, 1, axis=1)
    return z


def labels_from_indicators(z: np.ndarray) -> np.ndarray:
    n = z.shape[1]
    m = int(z[0].sum())
    return np.where(z == 1, n / m, -n / (n - m))


def exact_distribution(scan: LinearScan, n: int, m: int, one_sided: bool = False) -> np.ndarray:
    """Corrected supremum under each of the C(n, m) labelings."""
    return scan.supremum(labels_from_indicators(all_labelings(n, m)), one_sided)


def exact_quantile(dist: np.ndarray, alpha: float) -> float:
    """Smallest C with P(T <= C) >= 1 - alpha under the uniform law on ``dist``."""
    s = np.sort(np.asarray(dist, dtype=np.float64))
    total = s.size
    rank = total - _allowed_exceedances(alpha, total)
    return float(s[rank - 1])


def exact_rejection_probability(dist: np.ndarray, alpha: float) -> tuple[int, int]:
    """(#labelings rejected, #labelings) for the exact conditional test.

    A labeling is rejected when the number of labelings whose statistic is
    at least as large is at most ``alpha`` times the total.
    """
    s = np.sort(np.asarray(dist, dtype=np.float64))
    total = s.size
    at_least = total - np.searchsorted(s, dist, side="left")
    return int(np.count_nonzero(at_least <= _allowed_exceedances(alpha, total))), total
