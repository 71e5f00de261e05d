"""Local classification: where does P(Y = 1 | X = x) differ from a known rate?

The statistic on each nearest-neighbor ball is
``sum_i w_i (y_i - lam) / (sigma * gamma * sqrt(n))`` with
``sigma = sqrt(lam (1 - lam))`` and ``gamma`` the spread of the weights.
Its correction follows the classical Bernstein bound for independent
centered Bernoullis bounded by ``max(lam, 1 - lam)``.  Both forms are our
own completion; only the overall recipe is prescribed.  The null law is
obtained by permuting the observed outcomes over the fixed point cloud,
which keeps the test exact given the points and the number of ones.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .calibration import gamma_log
from .core import DataError, DegenerateError, KernelSpec, default_kmax
from .multiscale import NeighborScan
from .neighbors import neighbor_order
from .permutation import PermutationConfig, TestReport, calibrate


@dataclass(frozen=True)
class LabeledPoints:
    points: np.ndarray
    y: np.ndarray
    lam: float

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=np.float64)))
        y = np.asarray(self.y)
        if pts.shape[0] != y.shape[0]:
            raise DataError(f"{pts.shape[0]} points but {y.shape[0]} outcomes")
        if pts.shape[0] < 2:
            raise DataError("need at least two points")
        if not np.all(np.isfinite(pts)):
            raise DataError("non-finite coordinate")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("outcomes must be 0 or 1")
        if not 0 < self.lam < 1:
            raise DataError(f"lambda must lie in (0, 1), got {self.lam}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "y", y.astype(np.int8))

    @property
    def n(self) -> int:
        return self.points.shape[0]


def classify_stat(weights, y, lam: float, gamma: float, n: int) -> float:
    if not gamma > 0:
        raise DegenerateError("classification statistic undefined for gamma = 0")
    w = np.asarray(weights, dtype=np.float64)
    centered = np.asarray(y, dtype=np.float64)[: w.size] - lam
    return float(w @ centered) / (math.sqrt(lam * (1 - lam)) * gamma * math.sqrt(n))


def bernstein_ratio(lam: float, n: int) -> float:
    """``max(lam, 1 - lam) / (3 sigma sqrt(n))``."""
    return max(lam, 1 - lam) / (3 * math.sqrt(lam * (1 - lam)) * math.sqrt(n))


def classify_correction(gamma, lam: float, n: int):
    g = np.asarray(gamma, dtype=np.float64)
    if np.any(~(g > 0)):
        raise ValueError("gamma must be positive")
    if not 0 < lam < 1 or n < 2:
        raise ValueError("need 0 < lam < 1 and n >= 2")
    big = gamma_log(g * g)
    out = 3 * bernstein_ratio(lam, n) * big / g + np.sqrt(2 * big)
    return float(out) if out.ndim == 0 else out


def classify_bernstein_quantile(eta, gamma: float, lam: float, n: int, delta: float = 1.0):
    """Inverse of ``P(|T| > delta x) <= 2 exp(-(x^2/2) / (1 + x R / gamma))``."""
    eta = np.asarray(eta, dtype=np.float64)
    r = delta * bernstein_ratio(lam, n) / gamma
    out = r * eta + np.sqrt((r * eta) ** 2 + 2 * delta**2 * eta)
    return float(out) if out.ndim == 0 else out


def build_classify_scan(data: LabeledPoints, psi: KernelSpec, k_max: int | None = None,
                        method: str = "brute") -> NeighborScan:
    n, lam = data.n, data.lam
    k_max = default_kmax(n) if k_max is None else k_max
    order = neighbor_order(data.points, k_max, method=method)
    scan = NeighborScan(order, psi, k_max, 1.0 / (math.sqrt(lam * (1 - lam)) * math.sqrt(n)))
    corr = classify_correction(scan.gamma, lam, n) if scan.size else np.empty(0)
    return scan.with_correction(corr)


def classify_test(data: LabeledPoints, config: PermutationConfig) -> TestReport:
    k_max = default_kmax(data.n) if config.k_max is None else config.k_max
    t0 = time.perf_counter()
    scan = build_classify_scan(data, config.kernel, k_max, config.neighbor_method)
    timings = {"setup_s": time.perf_counter() - t0}
    summary = {"n": data.n, "ones": int(data.y.sum()), "d": data.points.shape[1], "lambda": float(data.lam)}
    return calibrate(scan, data.points, data.y - data.lam, config, summary, k_max, timings=timings)
