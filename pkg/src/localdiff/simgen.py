"""Synthetic two-sample scenarios and level/power studies.

A scenario fixes the mixed density ``h = lam p + (1 - lam) q`` on the unit
cube (``lam = m/n``) together with a deviation ``phi = (p - q) / sqrt(h)``;
the two densities are then

    p = h + (1 - lam) phi sqrt(h),    q = h - lam phi sqrt(h).

Deviations integrate to zero against ``sqrt(h)`` (a positive plateau is
balanced by a negative annulus; a positive bump by a negative twin), so
``p`` and ``q`` are densities whenever they are nonnegative.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special, stats

from .core import PooledSample
from .permutation import SAMPLING_STREAM, PermutationConfig, derived_seed, run_test, stream
from .recovery import unit_ball_volume


class ScenarioError(ValueError):
    pass


class LargeDeviationWarning(UserWarning):
    """Plateau height beyond ``c = sqrt(n delta^d)``; still valid if p, q stay nonnegative."""


@dataclass(frozen=True)
class MixedDensity:
    """Uniform density, or piecewise constant on a regular grid of cells."""

    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.values is not None:
            v = np.asarray(self.values, dtype=np.float64)
            if np.any(v <= 0):
                raise ScenarioError("mixed density must be positive")
            if abs(v.mean() - 1.0) > 1e-9:
                raise ScenarioError(f"mixed density must integrate to 1 (cell mean {v.mean()})")
            if len(set(v.shape)) != 1:
                raise ScenarioError("piecewise density needs the same number of cells per axis")
            object.__setattr__(self, "values", v)

    def check_dim(self, d: int) -> None:
        if self.values is not None and self.values.ndim != d:
            raise ScenarioError(f"piecewise density has {self.values.ndim} axes, scenario has d={d}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.values is None:
            return np.ones(x.shape[0])
        g = self.values.shape[0]
        idx = np.clip((x * g).astype(np.int64), 0, g - 1)
        return self.values[tuple(idx.T)]

    @property
    def sup(self) -> float:
        return 1.0 if self.values is None else float(self.values.max())

    def constant_on_box(self, lo: np.ndarray, hi: np.ndarray) -> float:
        """Value of ``h`` on the box, which must lie inside one constant patch."""
        if self.values is None:
            return 1.0
        g = self.values.shape[0]
        a = np.clip(np.floor(lo * g).astype(int), 0, g - 1)
        b = np.clip(np.ceil(hi * g).astype(int) - 1, 0, g - 1)
        block = self.values[tuple(slice(i, j + 1) for i, j in zip(a, b))]
        if np.ptp(block) > 0:
            raise ScenarioError("mixed density must be constant over the deviation support")
        return float(block.flat[0])

    def to_dict(self) -> dict:
        if self.values is None:
            return {"type": "uniform"}
        return {"type": "piecewise", "values": self.values.tolist()}


@dataclass(frozen=True)
class Deviation:
    """Shape of ``phi``: ``zero``, ``plateau`` or ``holder_bump``."""

    kind: str = "zero"
    center: tuple = ()
    c: float = 0.0
    scale: float = 0.0
    annulus: Optional[float] = None
    beta: float = 1.0
    L: float = 1.0
    width: float = 0.0
    negative_center: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "plateau", "holder_bump"):
            raise ScenarioError(f"unknown deviation {self.kind!r}")
        if self.kind == "plateau":
            if self.scale <= 0 or self.c < 0:
                raise ScenarioError("plateau needs scale > 0 and c >= 0")
            if self.annulus is not None and self.annulus <= 1:
                raise ScenarioError("annulus factor must exceed 1")
        if self.kind == "holder_bump":
            if not 0 < self.beta <= 1 or self.L < 0 or self.width <= 0:
                raise ScenarioError("holder_bump needs 0 < beta <= 1, L >= 0, width > 0")

    def annulus_factor(self, d: int) -> float:
        return 2 ** (1 / d) if self.annulus is None else self.annulus

    def amplitude(self, n: int, d: int) -> float:
        if self.kind == "plateau":
            return self.c / math.sqrt(n * self.scale**d)
        if self.kind == "holder_bump":
            return self.L * self.width**self.beta
        return 0.0

    def support(self, d: int) -> list:
        """(center, radius) balls outside of which ``phi`` vanishes."""
        if self.kind == "plateau":
            return [(np.asarray(self.center, float), self.scale * self.annulus_factor(d))]
        if self.kind == "holder_bump":
            return [(np.asarray(self.center, float), self.width),
                    (np.asarray(self.negative_center, float), self.width)]
        return []

    def true_ball(self):
        """The ball where ``phi`` is positive, or None under the null."""
        if self.kind == "plateau" and self.c > 0:
            return np.asarray(self.center, float), self.scale
        if self.kind == "holder_bump" and self.L > 0:
            return np.asarray(self.center, float), self.width
        return None

    def __call__(self, x: np.ndarray, n: int) -> np.ndarray:
        x = np.atleast_2d(x)
        d = x.shape[1]
        if self.kind == "zero":
            return np.zeros(x.shape[0])
        if self.kind == "plateau":
            amp = self.amplitude(n, d)
            kappa = self.annulus_factor(d)
            r = np.linalg.norm(x - np.asarray(self.center), axis=1)
            neg = amp / (kappa**d - 1)
            return np.where(r <= self.scale, amp, np.where(r <= kappa * self.scale, -neg, 0.0))
        r1 = np.linalg.norm(x - np.asarray(self.center), axis=1)
        r2 = np.linalg.norm(x - np.asarray(self.negative_center), axis=1)
        bump = lambda r: np.maximum(self.width**self.beta - r**self.beta, 0.0)
        return self.L * (bump(r1) - bump(r2))

    def extremes(self, n: int, d: int) -> tuple:
        """(min, max) of ``phi``."""
        amp = self.amplitude(n, d)
        if self.kind == "plateau":
            return -amp / (self.annulus_factor(d) ** d - 1), amp
        return -amp, amp

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"type": "zero"}
        if self.kind == "plateau":
            out = {"type": "plateau", "c": self.c, "center": list(self.center), "scale": self.scale}
            if self.annulus is not None:
                out["annulus"] = self.annulus
            return out
        return {"type": "holder_bump", "beta": self.beta, "L": self.L, "center": list(self.center),
                "width": self.width, "negative_center": list(self.negative_center)}


@dataclass(frozen=True)
class Scenario:
    m: int
    n: int
    d: int
    h: MixedDensity = field(default_factory=MixedDensity)
    phi: Deviation = field(default_factory=Deviation)
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.m < self.n:
            raise ScenarioError(f"need 0 < m < n, got m={self.m}, n={self.n}")
        if self.d < 1:
            raise ScenarioError("d must be >= 1")
        self.h.check_dim(self.d)
        for center, radius in self.phi.support(self.d):
            if center.shape != (self.d,):
                raise ScenarioError(f"deviation center must have {self.d} coordinates")
            if np.any(center - radius < 0) or np.any(center + radius > 1):
                raise ScenarioError("deviation support must lie inside the unit cube")
        balls = self.phi.support(self.d)
        if len(balls) == 2 and np.linalg.norm(balls[0][0] - balls[1][0]) < 2 * self.phi.width:
            raise ScenarioError("bump and its negative twin must not overlap")
        lo, hi = self.phi.extremes(self.n, self.d)
        for center, radius in balls:
            h0 = self.h.constant_on_box(center - radius, center + radius)
            if h0 + (1 - self.lam) * lo * math.sqrt(h0) < 0 or h0 - self.lam * hi * math.sqrt(h0) < 0:
                raise ScenarioError("deviation too large: p or q would be negative")
        if self.phi.kind == "plateau" and self.phi.c > math.sqrt(self.n * self.phi.scale**self.d) * (1 + 1e-12):
            warnings.warn("plateau height exceeds c = sqrt(n delta^d)", LargeDeviationWarning, stacklevel=3)

    @property
    def lam(self) -> float:
        return self.m / self.n

    def _h_dev(self) -> float:
        balls = self.phi.support(self.d)
        if not balls:
            return self.h.sup
        c, r = balls[0]
        return self.h.constant_on_box(c - r, c + r)

    def p(self, x) -> np.ndarray:
        h = self.h(x)
        return h + (1 - self.lam) * self.phi(x, self.n) * np.sqrt(h)

    def q(self, x) -> np.ndarray:
        h = self.h(x)
        return h - self.lam * self.phi(x, self.n) * np.sqrt(h)

    def envelopes(self) -> tuple:
        """Exact suprema of ``p`` and ``q`` over the unit cube."""
        lo, hi = self.phi.extremes(self.n, self.d)
        h0 = self._h_dev()
        sup_p = max(self.h.sup, h0 + (1 - self.lam) * hi * math.sqrt(h0))
        sup_q = max(self.h.sup, h0 - self.lam * lo * math.sqrt(h0))
        return sup_p, sup_q

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "d": self.d, "h": self.h.to_dict(), "phi": self.phi.to_dict(),
                "replications": self.replications, "seed": self.seed}

    @classmethod
    def from_dict(cls, spec: dict) -> "Scenario":
        try:
            h_spec = spec.get("h", {"type": "uniform"})
            if h_spec.get("type", "uniform") == "uniform":
                h = MixedDensity()
            elif h_spec["type"] == "piecewise":
                h = MixedDensity(np.asarray(h_spec["values"], dtype=np.float64))
            else:
                raise ScenarioError(f"unknown mixed density {h_spec['type']!r}")
            phi_spec = dict(spec.get("phi", {"type": "zero"}))
            kind = phi_spec.pop("type", "zero")
            for key in ("center", "negative_center"):
                if key in phi_spec:
                    phi_spec[key] = tuple(float(v) for v in phi_spec[key])
            phi = Deviation(kind, **phi_spec)
            return cls(int(spec["m"]), int(spec["n"]), int(spec["d"]), h, phi,
                       int(spec.get("replications", 100)), int(spec.get("seed", 0)))
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc


def rejection_sample(density, envelope: float, size: int, d: int, rng: np.random.Generator,
                     batch: int = 1024) -> tuple:
    """``size`` draws from ``density`` on the unit cube; returns (points, proposals used)."""
    out, used, have = [], 0, 0
    while have < size:
        x = rng.random((batch, d))
        u = rng.random(batch)
        dens = density(x)
        if np.any(dens > envelope * (1 + 1e-12)):
            raise ScenarioError("density exceeds its envelope")
        keep = u * envelope <= dens
        acc = x[keep][: size - have]
        if acc.shape[0] < keep.sum():
            used += int(np.flatnonzero(keep)[acc.shape[0] - 1]) + 1 if acc.shape[0] else 0
        else:
            used += batch
        out.append(acc)
        have += acc.shape[0]
    return np.vstack(out), used


def sample_scenario(scenario: Scenario, rng: np.random.Generator) -> PooledSample:
    sup_p, sup_q = scenario.envelopes()
    first, _ = rejection_sample(scenario.p, sup_p, scenario.m, scenario.d, rng)
    second, _ = rejection_sample(scenario.q, sup_q, scenario.n - scenario.m, scenario.d, rng)
    return PooledSample(np.vstack([first, second]), np.r_[np.ones(scenario.m, int), np.full(scenario.n - scenario.m, 2)])


# -- geometry for region overlap ---------------------------------------------------


def _cap_volume(r: float, h: float, d: int) -> float:
    if h <= 0:
        return 0.0
    if h >= 2 * r:
        return unit_ball_volume(d) * r**d
    if h > r:
        return unit_ball_volume(d) * r**d - _cap_volume(r, 2 * r - h, d)
    x = (2 * r * h - h * h) / (r * r)
    return 0.5 * unit_ball_volume(d) * r**d * float(special.betainc((d + 1) / 2, 0.5, x))


def ball_intersection_volume(c1, r1: float, c2, r2: float) -> float:
    c1, c2 = np.asarray(c1, float), np.asarray(c2, float)
    d = c1.size
    dist = float(np.linalg.norm(c1 - c2))
    if dist >= r1 + r2:
        return 0.0
    if dist <= abs(r1 - r2):
        return unit_ball_volume(d) * min(r1, r2) ** d
    x = (dist**2 + r1**2 - r2**2) / (2 * dist)
    return _cap_volume(r1, r1 - x, d) + _cap_volume(r2, r2 - (dist - x), d)


def ball_jaccard(c1, r1: float, c2, r2: float) -> float:
    d = np.asarray(c1).size
    inter = ball_intersection_volume(c1, r1, c2, r2)
    union = unit_ball_volume(d) * (r1**d + r2**d) - inter
    return inter / union if union > 0 else 0.0


# -- studies ------------------------------------------------------------------------


def _one_replication(args):
    scenario, config, rep = args
    sample = sample_scenario(scenario, stream(scenario.seed, rep, SAMPLING_STREAM))
    cfg = replace(config, seed=derived_seed(scenario.seed, rep), threads=1, emit_perm_stats=False)
    report = run_test(sample, cfg)
    truth = scenario.phi.true_ball()
    hit, jaccard = False, None
    if report.reject and truth is not None:
        c0, r0 = truth
        hit = any(np.linalg.norm(np.asarray(g.center) - c0) < g.radius + r0 for g in report.regions)
        best = max(report.regions, key=lambda g: abs(g.t_stat) - g.correction)
        jaccard = ball_jaccard(best.center, best.radius, c0, r0)
    return report.reject, report.p_value, hit, jaccard


def power_study(scenario: Scenario, config: PermutationConfig, replications: Optional[int] = None,
                workers: int = 1) -> dict:
    """Rejection rate (with exact binomial interval) and region overlap over replications."""
    reps = scenario.replications if replications is None else replications
    t0 = time.perf_counter()
    jobs = [(scenario, config, r) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replication, jobs, chunksize=max(1, reps // (4 * workers))))
    else:
        results = [_one_replication(job) for job in jobs]
    rejects = [r[0] for r in results]
    k = int(sum(rejects))
    ci = stats.binomtest(k, reps).proportion_ci(0.95, method="exact")
    jac = [r[3] for r in results if r[3] is not None]
    truth = scenario.phi.true_ball() is not None
    return {
        "replications": reps,
        "rejections": k,
        "rejection_rate": k / reps,
        "ci95": [float(ci.low), float(ci.high)],
        "hit_rate": (sum(r[2] for r in results) / reps) if truth else None,
        "mean_jaccard": float(np.mean(jac)) if jac else None,
        "mean_p_value": float(np.mean([r[1] for r in results])),
        "elapsed_s": time.perf_counter() - t0,
    }
