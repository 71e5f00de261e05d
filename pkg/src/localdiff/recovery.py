"""Optimal-recovery kernels and the sharp detection constants built on them.

For Hoelder exponents ``beta <= 1`` the minimal-L2 radial function with
value 1 at the origin is ``(1 - |x|**beta)_+``.  Its squared L2 norm over
``R^d`` enters the separation constant ``c(beta, L)``; the matching
detection rate for two samples of sizes ``m`` and ``n - m`` is
``(n log n / (m (n - m)))**(beta / (2 beta + d))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class UnsupportedBeta(ValueError):
    pass


def _check_beta(beta: float) -> None:
    if not 0 < beta <= 1:
        raise UnsupportedBeta(
            f"optimal recovery kernel is only available in closed form for 0 < beta <= 1, got {beta}"
        )


def psi_beta(r, beta: float):
    """``(1 - r**beta)_+`` for ``r >= 0``."""
    _check_beta(beta)
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("psi_beta is defined for r >= 0 only")
    out = np.maximum(1.0 - np.power(r, beta), 0.0)
    return float(out) if out.ndim == 0 else out


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def recovery_norm(beta: float, d: int) -> float:
    """Squared L2 norm of ``(1 - |x|**beta)_+`` over ``R^d`` (closed form)."""
    _check_beta(beta)
    if d < 1:
        raise ValueError("d must be >= 1")
    return d * unit_ball_volume(d) * (1 / d - 2 / (d + beta) + 1 / (d + 2 * beta))


def recovery_norm_quad(beta: float, d: int) -> float:
    """Same quantity by adaptive quadrature in polar coordinates."""
    _check_beta(beta)
    surface = d * unit_ball_volume(d)
    val, _ = integrate.quad(
        lambda r: (1 - r**beta) ** 2 * r ** (d - 1), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return surface * val


def separation_constant(beta: float, L: float, d: int) -> float:
    if L <= 0:
        raise ValueError("L must be positive")
    norm_sq = recovery_norm(beta, d)
    base = 2 * d * L ** (d / beta) / ((2 * beta + d) * norm_sq)
    return base ** (beta / (2 * beta + d))


def critical_rate(m: int, n: int, beta: float, d: int) -> float:
    if not 0 < m < n or n < 2:
        raise ValueError(f"need 0 < m < n and n >= 2, got m={m}, n={n}")
    if beta <= 0 or d < 1:
        raise ValueError("need beta > 0 and d >= 1")
    return (n * math.log(n) / (m * (n - m))) ** (beta / (2 * beta + d))


@dataclass(frozen=True)
class RecoveryConstants:
    beta: float
    L: float
    d: int
    norm_sq: float
    c: float
    rho: float | None = None

    @classmethod
    def compute(cls, beta: float, L: float, d: int, m: int | None = None, n: int | None = None):
        rho = critical_rate(m, n, beta, d) if m is not None and n is not None else None
        return cls(beta, L, d, recovery_norm(beta, d), separation_constant(beta, L, d), rho)
