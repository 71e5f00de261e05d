"""Rank-window statistics for one-dimensional data.

On the line the nearest-neighbor balls are replaced by windows of the
pooled order statistics: window ``(j, k]`` collects ranks ``j+1 .. k`` and
weights rank ``i`` by ``psi((i - j) / (k - j))``.  Because only ranks
enter, every statistic is unchanged by strictly increasing transforms of
the data and its null law does not depend on the data distribution.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .calibration import CalibrationConstants, correction as calib_correction
from .core import DataError, DegenerateError, KernelSpec, PooledSample, WeightedLabels, default_kmax
from .multiscale import _GAMMA_FLOOR, LinearScan, _local_var
from .permutation import PermutationConfig, TestReport, calibrate


def _pattern(psi: KernelSpec, length: int) -> np.ndarray:
    return psi(np.arange(1, length + 1) / length)


def rank_weights(psi: KernelSpec, j: int, k: int, n: int) -> np.ndarray:
    """Weights over ranks 1..n for the window ``(j, k]``; zero outside it."""
    if not 0 <= j < k <= n:
        raise ValueError(f"invalid window j={j}, k={k} for n={n}")
    w = np.zeros(n)
    w[j:k] = _pattern(psi, k - j)
    return w


def rank_stat(ordered_labels: WeightedLabels | np.ndarray, j: int, k: int, psi: KernelSpec,
              m: int, n: int) -> float:
    """Standardized window statistic from labels listed in increasing data order."""
    v = ordered_labels.values if isinstance(ordered_labels, WeightedLabels) else np.asarray(ordered_labels, float)
    w = rank_weights(psi, j, k, n)
    eta = math.sqrt(_local_var(w, n))
    if not eta > 0:
        raise DegenerateError(f"window ({j}, {k}] has zero spread")
    lam = m / n
    return math.sqrt(lam * (1 - lam)) / eta / math.sqrt(n) * float(w @ v)


@dataclass(frozen=True)
class RankWindow:
    j: int
    k: int
    u_stat: float
    eta: float
    correction: float
    lower: float
    upper: float

    @property
    def sign(self) -> int:
        return int(np.sign(self.u_stat))

    def to_dict(self) -> dict:
        return {
            "interval": [float(self.lower), float(self.upper)],
            "j": int(self.j),
            "k": int(self.k),
            "u_stat": float(self.u_stat),
            "correction": float(self.correction),
            "sign": self.sign,
        }


class WindowScan(LinearScan):
    """All rank windows of length at most ``k_max`` with nonzero spread."""

    def __init__(self, n: int, psi: KernelSpec, k_max: int, prefactor: float):
        if not 1 <= k_max <= n:
            raise ValueError(f"k_max must be in [1, {n}], got {k_max}")
        self.n = n
        self.psi = psi
        self.patterns = {}
        js, ks, etas = [], [], []
        for length in range(1, k_max + 1):
            pat = _pattern(psi, length)
            var = float(_local_var(pat, n))
            if not var > _GAMMA_FLOOR * float(pat @ pat):
                continue
            self.patterns[length] = pat
            starts = np.arange(0, n - length + 1)
            js.append(starts)
            ks.append(starts + length)
            etas.append(np.full(starts.size, math.sqrt(var)))
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.empty(0, dt)
        self.j = cat(js, np.int64)
        self.k = cat(ks, np.int64)
        self.eta = cat(etas, np.float64)
        self.scale = prefactor / self.eta if self.eta.size else np.empty(0)
        self.correction = np.empty(0)

    def _chunk_cost(self) -> int:
        return self.size + self.n

    def raw_sums(self, values: np.ndarray) -> np.ndarray:
        if values.shape[1] != self.n:
            raise ValueError(f"expected {self.n} values per row, got {values.shape[1]}")
        if self.psi.is_rectangular:
            csum = np.zeros((values.shape[0], self.n + 1))
            np.cumsum(values, axis=1, out=csum[:, 1:])
            return csum[:, self.k] - csum[:, self.j]
        out = np.empty((values.shape[0], self.size))
        col = 0
        for length, pat in self.patterns.items():
            count = self.n - length + 1
            out[:, col:col + count] = sliding_window_view(values, length, axis=1) @ pat
            col += count
        return out


def build_window_scan(n: int, m: int, psi: KernelSpec, k_max: int | None = None) -> WindowScan:
    k_max = default_kmax(n) if k_max is None else k_max
    lam = m / n
    scan = WindowScan(n, psi, k_max, math.sqrt(lam * (1 - lam)) / math.sqrt(n))
    consts = CalibrationConstants.compute(m, n, psi.sup_norm)
    scan.correction = calib_correction(scan.eta, consts) if scan.size else np.empty(0)
    return scan


def rank_order(x: np.ndarray) -> np.ndarray:
    """Stable ascending order; tied observations keep index order."""
    return np.argsort(np.asarray(x, dtype=np.float64), kind="stable")


def window_statistics(sample: PooledSample, psi: KernelSpec = KernelSpec(), k_max: int | None = None):
    """All window statistics for the observed labeling, with the scan that produced them."""
    if sample.d != 1:
        raise DataError(f"rank-window test needs d = 1, got d = {sample.d}")
    scan = build_window_scan(sample.n, sample.m, psi, k_max)
    ordered = sample.labels().values[rank_order(sample.points[:, 0])]
    return scan.statistics(ordered)[0], scan


def univariate_test(sample: PooledSample, config: PermutationConfig) -> TestReport:
    if sample.d != 1:
        raise DataError(f"rank-window test needs d = 1, got d = {sample.d}")
    n = sample.n
    k_max = default_kmax(n) if config.k_max is None else config.k_max
    t0 = time.perf_counter()
    scan = build_window_scan(n, sample.m, config.kernel, k_max)
    perm = rank_order(sample.points[:, 0])
    sorted_x = sample.points[perm, 0]
    ordered = sample.labels().values[perm]
    timings = {"setup_s": time.perf_counter() - t0}

    def regions(result, kappa):
        idx = np.flatnonzero(result.excess > kappa)
        found = [RankWindow(int(scan.j[r]), int(scan.k[r]), float(result.t_stat[r]), float(scan.eta[r]),
                            float(scan.correction[r]), float(sorted_x[scan.j[r]]), float(sorted_x[scan.k[r] - 1]))
                 for r in idx]
        return sorted(found, key=lambda w: (w.j, w.k))

    summary = {"n": n, "m": sample.m, "d": 1}
    return calibrate(scan, sorted_x[:, None], ordered, config, summary, k_max, regions, timings)
