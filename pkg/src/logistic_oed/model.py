"""Closed-form logistic growth curve and its parameter sensitivities.

The logistic ODE ``dC/dt = r C (1 - C/K)`` with ``C(0) = C0`` has the explicit
solution ``C(t) = C0 K / ((K - C0) exp(-r t) + C0)``, which is used everywhere
in the package. Numerical ODE integration only appears in the test-suite as an
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

PARAM_NAMES = ("r", "K", "C0")


@dataclass(frozen=True)
class LogisticParams:
    """Growth rate ``r``, carrying capacity ``K`` and initial population ``C0``."""

    r: float
    K: float
    C0: float

    def __post_init__(self) -> None:
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.K, self.C0], dtype=float)

    @classmethod
    def from_array(cls, theta: Iterable[float]) -> "LogisticParams":
        r, K, C0 = (float(v) for v in theta)
        return cls(r, K, C0)

    def replace(self, **kwargs: float) -> "LogisticParams":
        values = {n: getattr(self, n) for n in PARAM_NAMES}
        values.update(kwargs)
        return LogisticParams(**values)


TRUE_PARAMS = LogisticParams(r=0.2, K=50.0, C0=4.5)


@dataclass(frozen=True)
class ParamRanges:
    """Closed, strictly positive interval per parameter, ordered (r, K, C0)."""

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("ranges need exactly three bounds per side")
        if np.any(lo <= 0) or np.any(hi <= lo):
            raise ValueError(f"invalid ranges lower={self.lower} upper={self.upper}")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def widened(self, lower_factor: float = 0.5, upper_factor: float = 2.0) -> "ParamRanges":
        """Scale lower bounds by ``lower_factor`` and upper bounds by ``upper_factor``."""
        return ParamRanges(tuple(self.lo * lower_factor), tuple(self.hi * upper_factor))

    def contains(self, theta: Iterable[float]) -> bool:
        theta = np.asarray(list(theta), dtype=float)
        return bool(np.all(theta >= self.lo) and np.all(theta <= self.hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform draws, shape ``(n, 3)``."""
        return self.lo + (self.hi - self.lo) * rng.random((n, 3))


PRIOR_RANGES = ParamRanges((0.14, 35.0, 3.15), (0.26, 65.0, 5.85))


def time_grid(times: Iterable[float]) -> np.ndarray:
    """Validate and return a strictly increasing, nonnegative time vector."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(t)) or t[0] < 0:
        raise ValueError("time grid must be finite and start at t >= 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _theta(params: LogisticParams | np.ndarray) -> tuple[float, float, float]:
    if isinstance(params, LogisticParams):
        return params.r, params.K, params.C0
    r, K, C0 = params
    return r, K, C0


def solve(params: LogisticParams | np.ndarray, t):
    """Population ``C(t)``; ``t`` may be a scalar or an array."""
    r, K, C0 = _theta(params)
    e = np.exp(-r * np.asarray(t, dtype=float))
    return C0 * K / ((K - C0) * e + C0)


def sensitivities(params: LogisticParams | np.ndarray, t) -> np.ndarray:
    """Partial derivatives ``(dC/dr, dC/dK, dC/dC0)``.

    Returns shape ``(3,)`` for scalar ``t`` and ``(3, n)`` for a vector.
    """
    r, K, C0 = _theta(params)
    t = np.asarray(t, dtype=float)
    e = np.exp(-r * t)
    D2 = ((K - C0) * e + C0) ** 2
    d_r = C0 * K * (K - C0) * t * e / D2
    d_K = C0**2 * (1.0 - e) / D2
    d_C0 = K**2 * e / D2
    return np.stack([d_r, d_K, d_C0])


def solve_vec(params: LogisticParams | np.ndarray, grid) -> np.ndarray:
    return solve(params, time_grid(grid))


def sensitivities_vec(params: LogisticParams | np.ndarray, grid) -> np.ndarray:
    return sensitivities(params, time_grid(grid))
