"""Exact Euclidean nearest-neighbor orderings of a pooled sample.

Row ``j`` lists every point by increasing distance to point ``j``; the
point itself always comes first and equal distances are broken by the
smaller index, so the output is fully deterministic.  Rows can be
truncated to the first ``k_max + 1`` positions (extended over distance
ties at the last position) because the statistics never look further.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import PooledSample


@dataclass(frozen=True)
class NeighborOrder:
    order: np.ndarray  # (n, width) int64
    dist: np.ndarray  # (n, width) float64
    n: int

    @property
    def width(self) -> int:
        return self.order.shape[1]

    @property
    def complete(self) -> bool:
        return self.width == self.n


def _row_distances(points: np.ndarray, j: int, idx: np.ndarray) -> np.ndarray:
    # shared by both paths so distances are bit-identical
    diff = points[idx] - points[j]
    return np.sqrt(np.sum(diff * diff, axis=1))


def _sort_row(j: int, idx: np.ndarray, dist: np.ndarray):
    key = np.lexsort((idx, idx != j, dist))
    return idx[key], dist[key]


def _tie_width(dist: np.ndarray, k_max: int) -> int:
    """Positions needed so every point tied with position ``k_max`` is kept."""
    r = dist[k_max]
    return int(np.searchsorted(dist, r, side="right"))


def neighbor_order(sample: PooledSample | np.ndarray, k_max: int | None = None,
                   method: str = "brute") -> NeighborOrder:
    """Nearest-neighbor ordering of every point.

    Parameters
    ----------
    sample : PooledSample or (n, d) array
    k_max : int, optional
        Largest scale needed downstream. ``None`` keeps full rows.
    method : {"brute", "tree"}
        ``brute`` sorts all pairwise distances; ``tree`` uses a k-d tree to
        shortlist candidates and then applies the exact same distance
        formula and tie rule, so both produce identical arrays.
    """
    points = sample.points if isinstance(sample, PooledSample) else np.asarray(sample, dtype=np.float64)
    n = points.shape[0]
    if k_max is None or k_max >= n - 1:
        k_max = n - 1
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if method not in ("brute", "tree"):
        raise ValueError(f"unknown method {method!r}")
    if k_max == n - 1:
        method = "brute"
    if method == "tree":
        tree = cKDTree(points)
        row = lambda j, k: _tree_row(tree, points, j, k)
    else:
        row = lambda j, k: _brute_row(points, j)
    rows = []
    for j in range(n):
        o, d = row(j, k_max)
        w = _tie_width(d, k_max)
        rows.append((o[:w], d[:w]))
    width = max(len(o) for o, _ in rows)
    order = np.empty((n, width), dtype=np.int64)
    dist = np.empty((n, width), dtype=np.float64)
    for j, (o, d) in enumerate(rows):
        if len(o) < width:
            o, d = row(j, width - 1)
        order[j] = o[:width]
        dist[j] = d[:width]
    order.setflags(write=False)
    dist.setflags(write=False)
    return NeighborOrder(order, dist, n)


def _brute_row(points, j):
    idx = np.arange(points.shape[0])
    return _sort_row(j, idx, _row_distances(points, j, idx))


def _tree_row(tree, points, j, k):
    """All points within the k-th neighbor distance (plus ties), sorted."""
    dk, _ = tree.query(points[j], k=k + 1)
    radius = float(np.atleast_1d(dk)[-1])
    idx = tree.query_ball_point(points[j], radius * (1 + 1e-9) + 1e-300)
    idx = np.unique(np.append(np.asarray(idx, dtype=np.int64), j))
    return _sort_row(j, idx, _row_distances(points, j, idx))


def scale_radius(order: NeighborOrder, j: int, k: int) -> float:
    """Distance from point ``j`` to its ``k``-th nearest neighbor (0-based j)."""
    if not 0 <= j < order.n:
        raise IndexError(f"center index {j} out of range for n={order.n}")
    if not 1 <= k <= order.n - 1 or k >= order.width:
        raise IndexError(f"scale {k} out of range")
    return float(order.dist[j, k])


def is_degenerate_scale(order: NeighborOrder, j: int, k: int) -> bool:
    return scale_radius(order, j, k) == 0.0
