"""Observation noise: IID Gaussian and stationary Ornstein-Uhlenbeck.

Both models produce a dense covariance over a time grid. The OU model samples
paths with its exact Gaussian transition, so there is no discretisation error
no matter how irregular the grid is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from .errors import FactorizationFailed
from .model import LogisticParams, solve, time_grid
from .rng import as_rng


@dataclass(frozen=True)
class IIDNoise:
    """Independent Gaussian noise with variance ``sigma2``."""

    sigma2: float

    def __post_init__(self) -> None:
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2!r}")

    @classmethod
    def degenerate(cls) -> "IIDNoise":
        """Zero-variance instance. Test hook only; its covariance is singular."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "sigma2", 0.0)
        return obj

    @property
    def marginal_variance(self) -> float:
        return self.sigma2

    def correlation(self, grid) -> np.ndarray:
        return np.eye(len(grid))

    def with_scale(self, sigma2: float) -> "IIDNoise":
        return IIDNoise(sigma2)

    @property
    def scale(self) -> float:
        return self.sigma2

    def to_dict(self) -> dict:
        return {"kind": "iid", "sigma2": self.sigma2}


@dataclass(frozen=True)
class OUNoise:
    """Stationary OU noise ``d eps = -phi eps dt + sigma dW``.

    ``sigma2`` is the squared volatility; the stationary variance is
    ``sigma2 / (2 phi)``.
    """

    phi: float
    sigma2: float

    def __post_init__(self) -> None:
        if not self.phi > 0:
            raise ValueError(f"phi must be > 0, got {self.phi!r}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2!r}")

    @classmethod
    def from_stationary(cls, phi: float, variance: float) -> "OUNoise":
        return cls(phi, 2.0 * phi * variance)

    @classmethod
    def degenerate(cls, phi: float) -> "OUNoise":
        """Zero-volatility instance. Test hook only; its covariance is singular."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "phi", float(phi))
        object.__setattr__(obj, "sigma2", 0.0)
        return obj

    @property
    def marginal_variance(self) -> float:
        return self.sigma2 / (2.0 * self.phi)

    def correlation(self, grid) -> np.ndarray:
        t = np.asarray(grid, dtype=float)
        return np.exp(-self.phi * np.abs(t[:, None] - t[None, :]))

    def with_scale(self, sigma2: float) -> "OUNoise":
        return OUNoise(self.phi, sigma2)

    @property
    def scale(self) -> float:
        return self.sigma2

    def to_dict(self) -> dict:
        return {"kind": "ou", "phi": self.phi, "sigma2": self.sigma2}


NoiseModel = Union[IIDNoise, OUNoise]


def noise_from_dict(d: dict) -> NoiseModel:
    """Build a noise model from ``{"kind": "iid", "sigma2": ...}`` or the OU form.

    The OU form accepts ``sigma2`` (squared volatility) or ``variance``
    (stationary variance), not both.
    """
    kind = str(d.get("kind", "")).lower()
    if kind == "iid":
        return IIDNoise(float(d["sigma2"]))
    if kind == "ou":
        phi = float(d["phi"])
        if ("sigma2" in d) == ("variance" in d):
            raise ValueError("OU noise needs exactly one of 'sigma2' or 'variance'")
        if "variance" in d:
            return OUNoise.from_stationary(phi, float(d["variance"]))
        return OUNoise(phi, float(d["sigma2"]))
    raise ValueError(f"unknown noise kind {d.get('kind')!r}")


class CovMatrix:
    """Noise covariance on a grid with its Cholesky factor and log-determinant."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=float)
        try:
            self.chol = linalg.cholesky(self.matrix, lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationFailed(str(exc)) from None
        diag = np.diag(self.chol)
        if not np.all(diag > 0) or not np.all(np.isfinite(diag)):
            raise FactorizationFailed("covariance is not positive definite")
        self.logdet = 2.0 * float(np.sum(np.log(diag)))

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def whiten(self, x: np.ndarray) -> np.ndarray:
        """``L^{-1} x`` along the first axis."""
        return linalg.solve_triangular(self.chol, x, lower=True, check_finite=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``Sigma^{-1} b``."""
        return linalg.cho_solve((self.chol, True), b, check_finite=False)

    def quad(self, x: np.ndarray) -> float:
        """``x Sigma^{-1} x^T`` for a vector ``x``."""
        z = self.whiten(x)
        return float(z @ z)


def covariance(noise: NoiseModel, grid) -> CovMatrix:
    """Dense noise covariance over ``grid``."""
    t = time_grid(grid)
    return CovMatrix(noise.marginal_variance * noise.correlation(t))


def autocorrelation(noise: OUNoise, lag) -> np.ndarray | float:
    """OU autocorrelation ``exp(-phi * lag)`` for ``lag >= 0``."""
    lag = np.asarray(lag, dtype=float)
    if np.any(lag < 0):
        raise ValueError("lag must be >= 0")
    out = np.exp(-noise.phi * lag)
    return float(out) if out.ndim == 0 else out


def sample_noise(noise: NoiseModel, grid, rng=None, size: int | None = None) -> np.ndarray:
    """Draw noise on ``grid``: shape ``(n,)``, or ``(size, n)`` if ``size`` is given.

    OU paths start from the stationary law and step forward with the exact
    conditional transition between consecutive grid times.
    """
    t = time_grid(grid)
    rng = as_rng(rng)
    shape = (1 if size is None else size, t.size)
    z = rng.standard_normal(shape)
    if isinstance(noise, IIDNoise):
        eps = np.sqrt(noise.sigma2) * z
    else:
        sd = np.sqrt(noise.marginal_variance)
        a = np.exp(-noise.phi * np.diff(t))
        step_sd = sd * np.sqrt(1.0 - a**2)
        eps = np.empty(shape)
        eps[:, 0] = sd * z[:, 0]
        for i in range(1, t.size):
            eps[:, i] = a[i - 1] * eps[:, i - 1] + step_sd[i - 1] * z[:, i]
    return eps[0] if size is None else eps


def sample_noise_joint(noise: NoiseModel, grid, rng=None, size: int | None = None) -> np.ndarray:
    """Draw noise as ``L z`` from the covariance Cholesky factor (test oracle)."""
    t = time_grid(grid)
    rng = as_rng(rng)
    cov = covariance(noise, t)
    z = rng.standard_normal((1 if size is None else size, t.size))
    eps = z @ cov.chol.T
    return eps[0] if size is None else eps


@dataclass(frozen=True)
class Observations:
    """Noisy population counts ``values`` observed at ``times``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = time_grid(self.times)
        y = np.asarray(self.values, dtype=float)
        if y.shape != t.shape:
            raise ValueError(f"values shape {y.shape} does not match times {t.shape}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)

    def __len__(self) -> int:
        return self.times.size


def synthesize(params: LogisticParams, noise: NoiseModel, grid, rng=None) -> Observations:
    """Model solution on ``grid`` plus one noise draw."""
    t = time_grid(grid)
    return Observations(t, solve(params, t) + sample_noise(noise, t, rng))
