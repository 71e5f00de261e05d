"""Shared domain types: pooled two-sample data, weighted labels and kernels."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .recovery import psi_beta


class DataError(ValueError):
    """Raised when input data violates the sample contract."""


class DegenerateError(ValueError):
    """Raised when a statistic is undefined (zero radius or zero variance)."""


class DuplicatePointWarning(UserWarning):
    pass


def weighted_label(flag: int, m: int, n: int) -> float:
    """Label weight n/m for the first sample and -n/(n-m) for the second."""
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
    if flag == 1:
        return n / m
    if flag == 2:
        return -n / (n - m)
    raise ValueError(f"group flag must be 1 or 2, got {flag!r}")


@dataclass(frozen=True)
class WeightedLabels:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_flags(cls, flags, m: int | None = None) -> "WeightedLabels":
        flags = np.asarray(flags)
        n = flags.size
        if m is None:
            m = int(np.count_nonzero(flags == 1))
        if not 0 < m < n:
            raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
        return cls(np.where(flags == 1, n / m, -n / (n - m)))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def m(self) -> int:
        return int(np.count_nonzero(self.values > 0))


@dataclass(frozen=True)
class PooledSample:
    """Both samples stacked into one ``(n, d)`` array with group flags 1/2."""

    points: np.ndarray
    group: np.ndarray
    m: int = field(init=False)

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        group = np.asarray(self.group, dtype=np.int8)
        points.setflags(write=False)
        group.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "m", int(np.count_nonzero(group == 1)))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def fraction(self) -> float:
        """Realized share m/n of the first sample."""
        return self.m / self.n

    def labels(self) -> WeightedLabels:
        return WeightedLabels.from_flags(self.group, self.m)

    @classmethod
    def from_groups(cls, first, second) -> "PooledSample":
        first = np.atleast_2d(np.asarray(first, dtype=np.float64))
        second = np.atleast_2d(np.asarray(second, dtype=np.float64))
        if first.shape[1] != second.shape[1]:
            raise DataError(
                f"dimension mismatch: first sample has d={first.shape[1]}, "
                f"second has d={second.shape[1]}"
            )
        flags = np.r_[np.ones(len(first), int), np.full(len(second), 2)]
        return validate_sample(np.vstack([first, second]), flags)


def validate_sample(points: Sequence, flags: Sequence[int]) -> PooledSample:
    """Check raw points and group flags and build a :class:`PooledSample`.

    Raises
    ------
    DataError
        On ragged or non-finite coordinates, bad flags, or an empty group.
        Coincident points only trigger a :class:`DuplicatePointWarning`.
    """
    rows = [np.atleast_1d(np.asarray(p, dtype=np.float64)) for p in points]
    if not rows:
        raise DataError("empty sample")
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise DataError(f"dimension mismatch among points: {sorted(d for d in dims)}")
    arr = np.vstack(rows)
    if arr.shape[1] < 1:
        raise DataError("points must have dimension d >= 1")
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
        raise DataError(f"non-finite coordinate in point {bad}")
    flags = np.asarray(flags)
    if flags.shape != (arr.shape[0],):
        raise DataError(f"expected {arr.shape[0]} group flags, got shape {flags.shape}")
    if not np.all((flags == 1) | (flags == 2)):
        raise DataError("group flags must be 1 or 2")
    m = int(np.count_nonzero(flags == 1))
    if m == 0 or m == arr.shape[0]:
        raise DataError(f"degenerate grouping: m={m}, n={arr.shape[0]}; both samples must be nonempty")
    if len(np.unique(arr, axis=0)) < arr.shape[0]:
        warnings.warn(
            "sample contains coincident points; ties are broken by index",
            DuplicatePointWarning,
            stacklevel=2,
        )
    return PooledSample(arr, flags)


KERNEL_FAMILIES = ("rectangular", "recovery", "truncated-recovery")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel on [0, 1] with value 1 at the origin and sup-norm 1.

    ``rectangular`` is the indicator of ``[0, 1]``; ``recovery`` is
    ``(1 - x**beta)_+``; ``truncated-recovery`` cuts the recovery kernel at
    ``K`` and stretches the remaining support back onto ``[0, 1]``.
    """

    family: str = "rectangular"
    beta: float | None = None
    K: float | None = None

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family != "rectangular":
            if self.beta is None or not self.beta > 0:
                raise ValueError("recovery kernels need beta > 0")
            if self.beta > 1:
                raise ValueError(
                    f"recovery kernel for beta={self.beta} > 1 has no closed form; only beta <= 1 is supported"
                )
        if self.family == "truncated-recovery" and (self.K is None or not self.K > 0):
            raise ValueError("truncated-recovery kernel needs K > 0")

    @property
    def sup_norm(self) -> float:
        return 1.0

    @property
    def is_rectangular(self) -> bool:
        return self.family == "rectangular"

    def __call__(self, x) -> np.ndarray:
        """Evaluate on ``x >= 0``; zero for ``x > 1``."""
        x = np.asarray(x, dtype=np.float64)
        inside = x <= 1.0
        if self.family == "rectangular":
            return inside.astype(np.float64)
        xc = np.clip(x, 0.0, 1.0)
        if self.family == "truncated-recovery":
            xc = xc * min(self.K, 1.0)
        return np.where(inside, psi_beta(xc, self.beta), 0.0)

    def describe(self) -> dict:
        out = {"family": self.family}
        if self.beta is not None:
            out["beta"] = float(self.beta)
        if self.K is not None:
            out["K"] = float(self.K)
        return out

    @classmethod
    def parse(cls, name: str, beta: float | None = None, K: float | None = None) -> "KernelSpec":
        aliases = {"rect": "rectangular", "rectangular": "rectangular", "recovery": "recovery",
                   "truncated-recovery": "truncated-recovery", "truncated": "truncated-recovery"}
        try:
            family = aliases[name]
        except KeyError:
            raise ValueError(f"unknown kernel {name!r}") from None
        return cls(family, beta=beta, K=K)


def default_kmax(n: int) -> int:
    return min(n - 1, math.ceil(n / 2))
