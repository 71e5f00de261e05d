"""Local nearest-neighbor statistics and their corrected supremum.

Every local statistic is a linear functional of the label vector,
``T_r = scale_r * sum_i W[r, i] * v[i]``, with weights and scale depending
only on the point cloud.  :class:`LinearScan` captures that structure so
the observed value and thousands of relabelings go through one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calibration import CalibrationConstants, correction as calib_correction
from .core import DegenerateError, KernelSpec, PooledSample, WeightedLabels, default_kmax
from .neighbors import NeighborOrder, neighbor_order

# relative floor below which a local variance counts as zero
_GAMMA_FLOOR = 1e-12
_CHUNK_ELEMENTS = 4_000_000
_WEIGHT_CACHE_ELEMENTS = 20_000_000


def kernel_weights(psi: KernelSpec, order: NeighborOrder, j: int, k: int) -> np.ndarray:
    """Weights ``psi(dist_i / dist_k)`` along row ``j`` of the neighbor order.

    Returned in neighbor-position order and padded with zeros to length n.
    Points tied with the k-th neighbor sit on the closed ball and get ``psi(1)``.
    """
    radius = order.dist[j, k]
    if radius == 0:
        raise DegenerateError(f"zero radius at center {j}, scale {k}")
    w = np.zeros(order.n)
    w[: order.width] = _weights_from_dist(psi, order.dist[j], radius)
    return w


def _weights_from_dist(psi: KernelSpec, dist: np.ndarray, radius) -> np.ndarray:
    radius = np.asarray(radius, dtype=np.float64)[..., None]
    inside = dist <= radius
    ratio = np.where(inside, dist / np.where(radius > 0, radius, 1.0), 2.0)
    return np.where(inside, psi(np.minimum(ratio, 1.0)), 0.0)


def local_std(weights, n: Optional[int] = None) -> float:
    """``sqrt(1/(n-1) * sum_i (w_i - mean(w))**2)`` over all n points.

    ``weights`` may be shorter than ``n``; missing entries are zeros.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.shape[-1] if n is None else n
    return np.sqrt(_local_var(w, n))


def _local_var(w: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("need n >= 2")
    width = w.shape[-1]
    mean = w.sum(axis=-1) / n
    ss = np.sum((w - mean[..., None]) ** 2, axis=-1) + (n - width) * mean**2
    return ss / (n - 1)


def local_stat(weights, labels: WeightedLabels | np.ndarray, gamma: float, m: int, n: int) -> float:
    """Standardized weighted label sum for one ball."""
    if not gamma > 0:
        raise DegenerateError("local statistic undefined for gamma = 0")
    v = labels.values if isinstance(labels, WeightedLabels) else np.asarray(labels, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    lam = m / n
    return math.sqrt(lam * (1 - lam)) / gamma / math.sqrt(n) * float(np.dot(w, v[: w.size]))


class LinearScan:
    """A family of linear statistics sharing one value vector.

    Subclasses implement :meth:`raw_sums`; ``scale`` and ``correction`` are
    per-statistic arrays fixed by the design points.
    """

    n: int
    scale: np.ndarray
    correction: np.ndarray

    @property
    def size(self) -> int:
        return self.scale.size

    def raw_sums(self, values: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def statistics(self, values) -> np.ndarray:
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if self.size == 0:
            return np.empty((values.shape[0], 0))
        return self.raw_sums(values) * self.scale

    def excess(self, values, one_sided: bool = False) -> np.ndarray:
        t = self.statistics(values)
        return (t if one_sided else np.abs(t)) - self.correction

    def supremum(self, values, one_sided: bool = False) -> np.ndarray:
        """Corrected supremum for each row of ``values``; ``-inf`` if no statistic exists."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        out = np.full(values.shape[0], -np.inf)
        if self.size == 0:
            return out
        step = max(1, _CHUNK_ELEMENTS // max(1, self._chunk_cost()))
        for start in range(0, values.shape[0], step):
            block = values[start:start + step]
            out[start:start + step] = self.excess(block, one_sided).max(axis=1)
        return out

    def _chunk_cost(self) -> int:
        return self.size


class NeighborScan(LinearScan):
    """All nearest-neighbor balls ``(j, k)``, ``1 <= k <= k_max``, with nonzero spread."""

    def __init__(self, order: NeighborOrder, psi: KernelSpec, k_max: int, prefactor: float):
        n = order.n
        if not 1 <= k_max <= n - 1:
            raise ValueError(f"k_max must be in [1, {n - 1}], got {k_max}")
        if order.width < k_max + 1:
            raise ValueError("neighbor order is too narrow for k_max")
        self.n = n
        self.order = order
        self.psi = psi
        self.k_max = k_max
        js, ks, radii, gammas, counts = [], [], [], [], []
        ks_all = np.arange(1, k_max + 1)
        for j in range(n):
            row = order.dist[j]
            rad = row[ks_all]
            w = _weights_from_dist(psi, row, rad)
            var = _local_var(w, n)
            s2 = np.sum(w * w, axis=1)
            ok = (rad > 0) & (var > _GAMMA_FLOOR * s2)
            if not ok.any():
                continue
            js.append(np.full(ok.sum(), j))
            ks.append(ks_all[ok])
            radii.append(rad[ok])
            gammas.append(np.sqrt(var[ok]))
            counts.append(np.searchsorted(row, rad[ok], side="right"))
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.empty(0, dt)
        self.j = cat(js, np.int64)
        self.k = cat(ks, np.int64)
        self.radius = cat(radii, np.float64)
        self.gamma = cat(gammas, np.float64)
        self.count = cat(counts, np.int64)
        self.scale = prefactor / self.gamma if self.gamma.size else np.empty(0)
        self.correction = np.empty(0)
        self._centers = np.unique(self.j)
        self._weight_cache = None
        if not psi.is_rectangular and self.size * order.width <= _WEIGHT_CACHE_ELEMENTS:
            self._weight_cache = {int(j): self.weight_rows(int(j)) for j in self._centers}

    def with_correction(self, corr: np.ndarray) -> "NeighborScan":
        self.correction = np.asarray(corr, dtype=np.float64)
        return self

    def weight_rows(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Record indices and their weight matrix (records x width) for center ``j``."""
        lo, hi = np.searchsorted(self.j, [j, j + 1])
        sel = np.arange(lo, hi)
        return sel, _weights_from_dist(self.psi, self.order.dist[j], self.radius[sel])

    def _chunk_cost(self) -> int:
        return self.size + self.n * self.order.width

    def raw_sums(self, values: np.ndarray) -> np.ndarray:
        if values.shape[1] != self.n:
            raise ValueError(f"expected {self.n} values per row, got {values.shape[1]}")
        gathered = values[:, self.order.order]  # (B, n, width)
        if self.psi.is_rectangular:
            csum = np.cumsum(gathered, axis=2)
            flat = csum.reshape(values.shape[0], -1)
            return flat[:, self.j * self.order.width + self.count - 1]
        out = np.empty((values.shape[0], self.size))
        for j in self._centers:
            sel, w = self._weight_cache[int(j)] if self._weight_cache else self.weight_rows(int(j))
            out[:, sel] = gathered[:, j, :] @ w.T
        return out


@dataclass(frozen=True)
class ScaleRecord:
    j: int
    k: int
    center: tuple
    radius: float
    t_stat: float
    gamma: float
    correction: float

    @property
    def sign(self) -> int:
        return int(np.sign(self.t_stat))

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "j": int(self.j),
            "k": int(self.k),
            "t_stat": float(self.t_stat),
            "correction": float(self.correction),
            "sign": self.sign,
        }


@dataclass
class MultiscaleResult:
    scan: NeighborScan
    points: np.ndarray
    t_stat: np.ndarray
    excess: np.ndarray
    t_n: float
    one_sided: bool = False
    _records: Optional[list] = field(default=None, repr=False)

    def record(self, r: int) -> ScaleRecord:
        s = self.scan
        return ScaleRecord(int(s.j[r]), int(s.k[r]), tuple(self.points[s.j[r]]), float(s.radius[r]),
                           float(self.t_stat[r]), float(s.gamma[r]), float(s.correction[r]))

    @property
    def records(self) -> list:
        if self._records is None:
            self._records = [self.record(r) for r in range(self.scan.size)]
        return self._records


def build_scan(sample: PooledSample, psi: KernelSpec, k_max: Optional[int] = None,
               order: Optional[NeighborOrder] = None, method: str = "brute") -> NeighborScan:
    """Neighbor scan for the two-sample statistic with its corrections attached."""
    n, m = sample.n, sample.m
    k_max = default_kmax(n) if k_max is None else k_max
    if order is None:
        order = neighbor_order(sample, k_max, method=method)
    lam = m / n
    scan = NeighborScan(order, psi, k_max, math.sqrt(lam * (1 - lam)) / math.sqrt(n))
    consts = CalibrationConstants.compute(m, n, psi.sup_norm)
    corr = calib_correction(scan.gamma, consts) if scan.size else np.empty(0)
    return scan.with_correction(corr)


def multiscale_stat(sample: PooledSample, labels: WeightedLabels | None = None,
                    psi: KernelSpec = KernelSpec(), k_max: Optional[int] = None,
                    one_sided: bool = False, scan: Optional[NeighborScan] = None) -> MultiscaleResult:
    """Evaluate every local statistic and the corrected supremum ``T_n``."""
    if scan is None:
        scan = build_scan(sample, psi, k_max)
    labels = sample.labels() if labels is None else labels
    return evaluate(scan, sample.points, labels.values, one_sided)


def evaluate(scan: LinearScan, points: np.ndarray, values: np.ndarray, one_sided: bool = False) -> MultiscaleResult:
    t = scan.statistics(values)[0]
    ex = (t if one_sided else np.abs(t)) - scan.correction
    t_n = float(ex.max()) if ex.size else -math.inf
    return MultiscaleResult(scan, points, t, ex, t_n, one_sided)


def significant_regions(result: MultiscaleResult, kappa: float) -> list:
    """Records whose corrected statistic exceeds ``kappa``.

    Compares ``|T| - C > kappa`` (``T - C`` when one-sided) using the same
    stored differences that define ``T_n``, so the list is nonempty exactly
    when ``T_n > kappa``.
    """
    if math.isnan(kappa):
        raise ValueError("kappa must not be NaN")
    idx = np.flatnonzero(result.excess > kappa)
    return [result.record(int(r)) for r in idx]
