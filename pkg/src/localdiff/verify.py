"""Exact checks of the finite-sample inequalities behind the calibration.

All probabilities and expectations here are computed by full enumeration
(sampling without replacement over all C(n, m) subsets, independent
Bernoulli draws over all 2^n outcomes), so a negative margin is a genuine
counterexample rather than Monte Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationConstants, bernstein_quantile, delta_mn
from .core import DegenerateError
from .multiscale import local_std
from .permutation import all_labelings

MAX_ENUMERATION_N = 20
BINARY_ENUMERATION_N = 16
TOLERANCE = 1e-12


@dataclass
class InequalityReport:
    name: str
    config: dict
    grid: np.ndarray
    lhs: np.ndarray
    rhs: dict
    method: str = "exact-enumeration"

    @property
    def margin(self) -> np.ndarray:
        return np.min(np.vstack(list(self.rhs.values())), axis=0) - self.lhs

    @property
    def min_margin(self) -> float:
        return float(self.margin.min())

    @property
    def violations(self) -> int:
        return sum(int(np.count_nonzero(r - self.lhs < -TOLERANCE)) for r in self.rhs.values())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "method": self.method,
            "config": self.config,
            "grid": self.grid.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": {k: v.tolist() for k, v in self.rhs.items()},
            "margin": self.margin.tolist(),
            "violations": self.violations,
        }


def _check_size(n: int, m: int) -> None:
    if n > MAX_ENUMERATION_N:
        raise ValueError(f"exact enumeration is capped at n = {MAX_ENUMERATION_N}, got {n}")
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")


def hypergeometric_spread(weights, m: int, n: int) -> float:
    """Standard deviation of ``sum_i w_i Z_i`` given ``sum_i Z_i = m``."""
    w = np.asarray(weights, dtype=np.float64)
    return math.sqrt(m * (n - m) / (n * (n - 1)) * float(np.sum((w - w.mean()) ** 2)))


def standardized_sums(weights, m: int, n: int) -> np.ndarray:
    """``sum_i w_i (Z_i - m/n) / gamma_mn`` for every size-m subset."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {w.shape}")
    _check_size(n, m)
    g = hypergeometric_spread(w, m, n)
    if g == 0:
        raise DegenerateError("constant weights have zero conditional variance")
    z = all_labelings(n, m)
    return (z @ (w - w.mean())) / g


def hypergeom_tail_exact(weights, m: int, n: int, threshold: float) -> float:
    """Exact ``P(|sum_i w_i (Z_i - m/n)| / gamma_mn > threshold | sum Z = m)``."""
    s = standardized_sums(weights, m, n)
    return float(np.count_nonzero(np.abs(s) > threshold)) / s.size


def coupling_ratio(weights, m: int, n: int) -> float:
    w = np.asarray(weights, dtype=np.float64)
    lam = m / n
    return float(np.max(np.abs(w - w.mean()))) * max(lam, 1 - lam) / (3 * hypergeometric_spread(w, m, n))


def imbalance(m: int, n: int) -> float:
    return max(m, n - m) / math.sqrt(m * (n - m))


def check_coupling_bound(weights, m: int, n: int, eta_grid) -> InequalityReport:
    """Exact tail at ``delta(m, n) * eta`` against both Bernstein-type bounds."""
    eta = np.asarray(eta_grid, dtype=np.float64)
    s = np.abs(standardized_sums(weights, m, n))
    delta = delta_mn(m, n)
    lhs = np.array([np.count_nonzero(s > delta * e) / s.size for e in eta])
    r = coupling_ratio(weights, m, n)
    c = imbalance(m, n)
    rhs = {
        "bernstein": 2 * np.exp(-(eta**2 / 2) / (1 + eta * r)),
        "linear": 2 * np.exp(-3 * eta / (2 * c) + 9 / (2 * c**2)),
    }
    cfg = {"n": n, "m": m, "weights": np.asarray(weights, float).tolist(), "delta": delta, "R": r, "c": c}
    return InequalityReport("coupling", cfg, eta, lhs, rhs)


def check_bernstein_quantile(weights, m: int, n: int, eta_grid) -> InequalityReport:
    """Exact tail beyond the inverted threshold ``G_n(eta, gamma)`` against ``2 exp(-eta)``.

    ``weights`` play the role of kernel values, so ``|w_i| <= 1`` is required.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.max(np.abs(w)) > 1:
        raise ValueError("kernel weights must satisfy |w| <= 1")
    eta = np.asarray(eta_grid, dtype=np.float64)
    s = np.abs(standardized_sums(w, m, n))
    gamma = float(local_std(w, n))
    consts = CalibrationConstants.compute(m, n)
    thresholds = bernstein_quantile(eta, gamma, consts)
    lhs = np.array([np.count_nonzero(s > t) / s.size for t in np.atleast_1d(thresholds)])
    cfg = {"n": n, "m": m, "weights": w.tolist(), "gamma": gamma}
    return InequalityReport("bernstein-quantile", cfg, eta, lhs, {"two_exp": 2 * np.exp(-eta)})


def convex_family(name: str, param: float):
    if name == "exp":
        return lambda x: np.exp(param * x)
    if name == "abs":
        if param < 1:
            raise ValueError("|x|^p is convex only for p >= 1")
        return lambda x: np.abs(x) ** param
    raise ValueError(f"unknown convex family {name!r}")


def bernoulli_sum_distribution(a, p: float, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Support points and probabilities of ``sum_i a_i Z_i`` for iid Bernoulli(p) ``Z``.

    ``enumerate`` lists all 2^n outcomes; ``convolve`` adds one coordinate at
    a time and merges coinciding support points.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.size
    if method == "auto":
        method = "enumerate" if n <= BINARY_ENUMERATION_N else "convolve"
    if method == "enumerate":
        if n > BINARY_ENUMERATION_N:
            raise ValueError(f"binary enumeration capped at n = {BINARY_ENUMERATION_N}")
        bits = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(np.float64)
        ones = bits.sum(axis=1)
        probs = p**ones * (1 - p) ** (n - ones)
        return bits @ a, probs
    if method == "convolve":
        values, probs = np.zeros(1), np.ones(1)
        for ai in a:
            values = np.concatenate([values, values + ai])
            probs = np.concatenate([probs * (1 - p), probs * p])
            values, inverse = np.unique(np.round(values, 13), return_inverse=True)
            probs = np.bincount(inverse.ravel(), weights=probs)
        return values, probs
    raise ValueError(f"unknown method {method!r}")


def check_decoupling(a, m: int, n: int, family: str, params) -> InequalityReport:
    """Conditional expectation (without replacement) vs the delta-inflated iid expectation."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"expected {n} coefficients, got shape {a.shape}")
    if abs(a.sum()) > 1e-12 * max(1.0, np.abs(a).sum()):
        raise ValueError("coefficients must sum to zero")
    _check_size(n, m)
    grid = np.asarray(params, dtype=np.float64)
    delta = delta_mn(m, n)
    cond = all_labelings(n, m) @ a
    vals, probs = bernoulli_sum_distribution(a, m / n)
    lhs = np.array([float(np.mean(convex_family(family, t)(cond))) for t in grid])
    rhs = np.array([math.fsum(probs * convex_family(family, t)(delta * vals)) for t in grid])
    cfg = {"n": n, "m": m, "a": a.tolist(), "family": family, "delta": delta}
    return InequalityReport("decoupling", cfg, grid, lhs, {"decoupled": rhs})


# -- randomized sweeps ------------------------------------------------------------

DEFAULT_ETA_GRID = tuple(np.arange(1, 17) / 4)
DEFAULT_T_GRID = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
DEFAULT_P_GRID = (1.0, 1.5, 2.0, 3.0)


@dataclass
class SweepSummary:
    suite: str
    reports: list = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(r.violations for r in self.reports)

    @property
    def min_margin(self) -> float:
        return min((r.min_margin for r in self.reports), default=math.inf)

    def to_dict(self, include_checks: bool = True) -> dict:
        out = {
            "suite": self.suite,
            "checks": len(self.reports),
            "grid_points": int(sum(r.grid.size for r in self.reports)),
            "violations": self.violations,
            "min_margin": self.min_margin,
        }
        if include_checks:
            out["details"] = [r.to_dict() for r in self.reports]
        return out


def _nonconstant(rng, n, low, high):
    while True:
        w = rng.uniform(low, high, n)
        if np.ptp(w) > 1e-3:
            return w


def sweep_coupling(rng: np.random.Generator, count: int = 100, n_min: int = 6, n_max: int = 12,
                   eta_grid=DEFAULT_ETA_GRID) -> SweepSummary:
    out = SweepSummary("coupling")
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        m = int(rng.integers(1, n))
        out.reports.append(check_coupling_bound(_nonconstant(rng, n, -1, 1), m, n, eta_grid))
    return out


def sweep_bernstein(rng: np.random.Generator, count: int = 100, n_min: int = 6, n_max: int = 12,
                    eta_grid=DEFAULT_ETA_GRID) -> SweepSummary:
    out = SweepSummary("bernstein")
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        m = int(rng.integers(1, n))
        out.reports.append(check_bernstein_quantile(_nonconstant(rng, n, 0, 1), m, n, eta_grid))
    return out


def sweep_decoupling(rng: np.random.Generator, count: int = 100, n_min: int = 4, n_max: int = 10,
                     t_grid=DEFAULT_T_GRID, p_grid=DEFAULT_P_GRID) -> SweepSummary:
    out = SweepSummary("decoupling")
    for i in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        m = int(rng.integers(1, n))
        a = rng.normal(size=n)
        a -= a.mean()
        if i % 2 == 0:
            out.reports.append(check_decoupling(a, m, n, "exp", t_grid))
        else:
            out.reports.append(check_decoupling(a, m, n, "abs", p_grid))
    return out


SUITES = {"coupling": sweep_coupling, "decoupling": sweep_decoupling, "bernstein": sweep_bernstein}


def run_suite(suite: str, seed: int, count: int = 100, n_max: int | None = None) -> list:
    """Run one named sweep (or ``all``) and return the summaries."""
    names = list(SUITES) if suite == "all" else [suite]
    out = []
    for i, name in enumerate(names):
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        kwargs = {"count": count}
        if n_max is not None:
            kwargs["n_max"] = n_max
            if name == "decoupling":
                kwargs["n_min"] = min(4, n_max)
            else:
                kwargs["n_min"] = min(6, n_max)
        out.append(SUITES[name](rng, **kwargs))
    return out
