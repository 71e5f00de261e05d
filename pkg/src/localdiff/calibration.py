"""Finite-sample calibration constants for the multiscale statistic.

The correction added to each local statistic comes from inverting a
Bernstein-type tail bound for weighted sums drawn without replacement.
Two ingredients are needed:

* the decoupling factor ``delta(m, n) = 1 / E min(S/m, (n-S)/(n-m))`` for
  ``S ~ Bin(n, m/n)``, the price of comparing sampling without replacement
  to independent Bernoulli draws;
* the Bernstein ratio ``R_psi(m, n) = (2 |psi|_sup / 3) max(m, n-m) / sqrt(m (n-m))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_counts(m: int, n: int) -> None:
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")


def _binom_pmf(n: int, p: float) -> np.ndarray:
    """Bin(n, p) probabilities via the ratio recurrence started at the mode."""
    q = 1.0 - p
    mode = min(n, int(math.floor((n + 1) * p)))
    log_mode = (math.lgamma(n + 1) - math.lgamma(mode + 1) - math.lgamma(n - mode + 1)
                + mode * math.log(p) + (n - mode) * math.log(q))
    pmf = np.empty(n + 1)
    pmf[mode] = 1.0
    ratio = p / q
    s_up = np.arange(mode, n, dtype=np.float64)
    pmf[mode + 1:] = np.cumprod((n - s_up) / (s_up + 1) * ratio)
    s_dn = np.arange(mode, 0, -1, dtype=np.float64)
    pmf[:mode][::-1] = np.cumprod(s_dn / (n - s_dn + 1) / ratio)
    # normalizing by the sum absorbs the rounding in exp(log_mode)
    total = pmf.sum()
    scale = math.exp(log_mode)
    if abs(total * scale - 1.0) > 1e-6:
        raise ArithmeticError("binomial recurrence lost accuracy")
    return pmf / total


def delta_mn(m: int, n: int) -> float:
    """Decoupling constant delta(m, n) >= 1."""
    _check_counts(m, n)
    # delta(m, n) = delta(n - m, n) by S -> n - S; evaluating one canonical
    # side makes the symmetry hold bit for bit
    m = min(m, n - m)
    pmf = _binom_pmf(n, m / n)
    s = np.arange(n + 1)
    terms = np.minimum(s / m, (n - s) / (n - m))
    return float(1.0 / math.fsum(pmf * terms))


def r_psi(m: int, n: int, psi_sup: float = 1.0) -> float:
    _check_counts(m, n)
    if psi_sup <= 0:
        raise ValueError("psi_sup must be positive")
    return (2.0 * psi_sup / 3.0) * max(m, n - m) / math.sqrt(m * (n - m))


def gamma_log(gamma_sq):
    """``max(log(1 / gamma_sq), 0)``; the clamp keeps ``sqrt(2 Gamma)`` real."""
    g = np.asarray(gamma_sq, dtype=np.float64)
    if np.any(~(g > 0)):
        raise ValueError("gamma_sq must be positive")
    out = np.maximum(-np.log(g), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CalibrationConstants:
    m: int
    n: int
    delta: float
    r_psi: float
    r_n: float
    psi_sup: float = 1.0

    @classmethod
    def compute(cls, m: int, n: int, psi_sup: float = 1.0) -> "CalibrationConstants":
        rp = r_psi(m, n, psi_sup)
        return cls(m, n, delta_mn(m, n), rp, rp / math.sqrt(n), psi_sup)

    @property
    def fraction(self) -> float:
        return self.m / self.n


def correction(gamma, consts: CalibrationConstants):
    """Additive multiple-testing correction for a local statistic with spread ``gamma``.

    ``C = 3 R_n delta Gamma / gamma + delta sqrt(2 Gamma)`` with
    ``Gamma = gamma_log(gamma**2)``.  Vectorized over ``gamma``.
    """
    g = np.asarray(gamma, dtype=np.float64)
    if np.any(~(g > 0)):
        raise ValueError("gamma must be positive")
    big_gamma = gamma_log(g * g)
    out = 3.0 * consts.r_n * consts.delta * big_gamma / g + consts.delta * np.sqrt(2.0 * big_gamma)
    return float(out) if out.ndim == 0 else out


def bernstein_quantile(eta, gamma: float, consts: CalibrationConstants, lam: float | None = None):
    """Threshold ``G_n(eta, gamma)`` with ``P(|T| > G_n) <= 2 exp(-eta)``.

    ``G_n = R eta + sqrt((R eta)**2 + 2 delta**2 eta)`` where
    ``R = delta 2 |psi| sqrt(lam (1 - lam)) / (3 min(lam, 1 - lam) sqrt(n) gamma)``.
    ``lam`` defaults to the realized fraction m/n.
    """
    eta = np.asarray(eta, dtype=np.float64)
    if np.any(eta < 0):
        raise ValueError("eta must be >= 0")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    lam = consts.fraction if lam is None else lam
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    r = (consts.delta * 2.0 * consts.psi_sup * math.sqrt(lam * (1 - lam))
         / (3.0 * min(lam, 1 - lam) * math.sqrt(consts.n) * gamma))
    out = r * eta + np.sqrt((r * eta) ** 2 + 2.0 * consts.delta**2 * eta)
    return float(out) if out.ndim == 0 else out
