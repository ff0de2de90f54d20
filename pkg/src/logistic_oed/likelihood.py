"""Gaussian log-likelihoods for the logistic model and maximum-likelihood fitting.

With the OU rate ``phi`` known, both noise models share the structure
``eps ~ N(0, v * R)`` where ``R`` is a fixed correlation matrix (identity for
IID) and ``v`` is the marginal variance. Maximising over the model parameters
is then a generalised least-squares problem in the whitened residuals
``L^{-1} (Y - C(theta))`` (``R = L L^T``), whether ``v`` is held fixed or
concentrated out at its closed-form MLE.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import least_squares

from .errors import FactorizationFailed, NoConvergence
from .model import PRIOR_RANGES, LogisticParams, ParamRanges, sensitivities, solve
from .noise import CovMatrix, IIDNoise, NoiseModel, Observations, OUNoise
from .rng import as_rng

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))

SCALE_MODES = ("fixed", "profile")

#: Default box for fitting and profiling: prior ranges widened by x[0.5, 2].
FIT_BOUNDS = PRIOR_RANGES.widened(0.5, 2.0)


def _residuals(params, obs: Observations) -> np.ndarray:
    return obs.values - solve(params, obs.times)


def loglik_iid(params, obs: Observations, sigma2: float) -> float:
    """IID Gaussian log-likelihood with variance ``sigma2``."""
    e = _residuals(params, obs)
    n = e.size
    return float(-0.5 * n * np.log(2.0 * np.pi * sigma2) - (e @ e) / (2.0 * sigma2))


def sigma2_iid_hat(params, obs: Observations) -> float:
    """Mean squared residual, the MLE of the IID variance."""
    e = _residuals(params, obs)
    return float(e @ e / e.size)


def loglik_mvn(residuals: np.ndarray, cov: CovMatrix) -> float:
    """Zero-mean multivariate normal log-density via the Cholesky factor."""
    e = np.asarray(residuals, dtype=float)
    return float(-0.5 * e.size * LOG_2PI - 0.5 * cov.logdet - 0.5 * cov.quad(e))


def loglik_ou(params, obs: Observations, phi: float, sigma2: float) -> float:
    """OU log-likelihood; ``sigma2`` is the squared volatility."""
    noise = OUNoise(phi, sigma2)
    cov = CovMatrix(noise.marginal_variance * noise.correlation(obs.times))
    return loglik_mvn(_residuals(params, obs), cov)


def loglik_ou_sequential(params, obs: Observations, phi: float, sigma2: float) -> float:
    """OU log-likelihood as a product of exact one-step transition densities.

    Runs in O(n) without forming a covariance matrix.
    """
    e = _residuals(params, obs)
    n = e.size
    a = np.exp(-phi * np.diff(obs.times))
    one_minus = 1.0 - a**2
    innov = e[1:] - e[:-1] * a
    return float(
        -0.5 * n * np.log(np.pi * sigma2 / phi)
        - 0.5 * np.sum(np.log(one_minus))
        - phi / sigma2 * e[0] ** 2
        - phi / sigma2 * np.sum(innov**2 / one_minus)
    )


def sigma2_ou_hat(params, obs: Observations, phi: float) -> float:
    """MLE of the squared OU volatility for known ``phi``."""
    e = _residuals(params, obs)
    corr = CovMatrix(np.exp(-phi * np.abs(obs.times[:, None] - obs.times[None, :])))
    return float(2.0 * phi * corr.quad(e) / e.size)


def loglik(params, obs: Observations, noise: NoiseModel) -> float:
    """Log-likelihood under ``noise`` with its scale taken as given."""
    if isinstance(noise, IIDNoise):
        return loglik_iid(params, obs, noise.sigma2)
    return loglik_ou(params, obs, noise.phi, noise.sigma2)


class GLSProblem:
    """Whitened least-squares view of the likelihood for fixed data and noise kind.

    ``scale_mode="fixed"`` uses the noise model's own scale; ``"profile"``
    replaces it by its closed-form MLE at every parameter value.
    """

    def __init__(self, obs: Observations, noise: NoiseModel, scale_mode: str = "fixed"):
        if scale_mode not in SCALE_MODES:
            raise ValueError(f"scale_mode must be one of {SCALE_MODES}, got {scale_mode!r}")
        if len(obs) == 0:
            raise ValueError("observations are empty")
        self.obs = obs
        self.noise = noise
        self.scale_mode = scale_mode
        self.n = len(obs)
        if isinstance(noise, IIDNoise):
            self._chol = None
            self._logdet_corr = 0.0
        else:
            corr = CovMatrix(noise.correlation(obs.times))
            self._chol = corr.chol
            self._logdet_corr = corr.logdet

    def whiten(self, x: np.ndarray) -> np.ndarray:
        if self._chol is None:
            return x
        return linalg.solve_triangular(self._chol, x, lower=True, check_finite=False)

    def residuals(self, theta) -> np.ndarray:
        """Whitened residuals ``L^{-1}(Y - C(theta))``."""
        return self.whiten(self.obs.values - solve(theta, self.obs.times))

    def jacobian(self, theta) -> np.ndarray:
        """Jacobian of :meth:`residuals`, shape ``(n, 3)``."""
        return -self.whiten(sensitivities(theta, self.obs.times).T)

    def quad(self, theta) -> float:
        w = self.residuals(theta)
        return float(w @ w)

    def marginal_variance_hat(self, q: float) -> float:
        return q / self.n

    def scale_hat(self, q: float) -> float:
        """Noise-scale MLE (``sigma2`` of the noise model) from a whitened SSR."""
        v = self.marginal_variance_hat(q)
        if isinstance(self.noise, OUNoise):
            return 2.0 * self.noise.phi * v
        return v

    def loglik_from_quad(self, q: float) -> float:
        n = self.n
        if self.scale_mode == "fixed":
            v = self.noise.marginal_variance
            return -0.5 * n * (LOG_2PI + np.log(v)) - 0.5 * self._logdet_corr - 0.5 * q / v
        v = self.marginal_variance_hat(q)
        if v <= 0:
            return np.inf
        return -0.5 * n * (LOG_2PI + np.log(v)) - 0.5 * self._logdet_corr - 0.5 * n

    def loglik(self, theta) -> float:
        return float(self.loglik_from_quad(self.quad(theta)))

    def loglik_many(self, thetas: np.ndarray) -> np.ndarray:
        """Vectorised log-likelihood for an ``(m, 3)`` array of parameters."""
        thetas = np.atleast_2d(thetas)
        C = solve(thetas.T[:, :, None], self.obs.times[None, :])
        E = self.obs.values[None, :] - C
        W = self.whiten(E.T).T
        q = np.einsum("ij,ij->i", W, W)
        return np.array([self.loglik_from_quad(qi) for qi in q])

    def minimize(
        self,
        x0,
        bounds: ParamRanges,
        fixed: dict[int, float] | None = None,
        max_nfev: int = 2000,
    ):
        """Local least-squares fit over the free parameters, in log coordinates.

        ``fixed`` maps parameter index to a pinned value. Returns
        ``(theta, quad, success)``.
        """
        fixed = fixed or {}
        free = [i for i in range(3) if i not in fixed]
        theta = np.asarray(x0, dtype=float).copy()
        for i, v in fixed.items():
            theta[i] = v
        lo = np.log(bounds.lo[free])
        hi = np.log(bounds.hi[free])
        # trust-region reflective needs a strictly interior start
        span = hi - lo
        z0 = np.clip(np.log(theta[free]), lo + 1e-9 * span, hi - 1e-9 * span)

        def full(z):
            th = theta.copy()
            th[free] = np.exp(z)
            return th

        def fun(z):
            return self.residuals(full(z))

        def jac(z):
            th = full(z)
            return self.jacobian(th)[:, free] * th[free]

        res = least_squares(
            fun, z0, jac=jac, bounds=(lo, hi), method="trf",
            ftol=1e-10, xtol=1e-8, gtol=1e-10, max_nfev=max_nfev,
        )
        th = full(res.x)
        return th, self.quad(th), bool(res.status > 0)


@dataclass(frozen=True)
class FitResult:
    mle: LogisticParams
    loglik: float
    noise_scale_hat: float
    converged: bool
    restarts_used: int
    scale_mode: str = "fixed"

    def noise_model(self, template: NoiseModel) -> NoiseModel:
        """``template`` with its scale replaced by the fitted one."""
        return template.with_scale(self.noise_scale_hat)


def fit_mle(
    obs: Observations,
    noise: NoiseModel,
    scale_mode: str = "fixed",
    bounds: ParamRanges = FIT_BOUNDS,
    restarts: int = 50,
    rng=None,
    x0=None,
) -> FitResult:
    """Maximum-likelihood fit of ``(r, K, C0)`` inside ``bounds``.

    Runs ``restarts`` local fits from uniform random starts (plus ``x0`` when
    given) and keeps the best. In ``"profile"`` mode the noise scale is
    concentrated out; in ``"fixed"`` mode ``noise`` supplies it.
    """
    rng = as_rng(rng)
    problem = GLSProblem(obs, noise, scale_mode)
    starts = list(bounds.sample(rng, restarts))
    if x0 is not None:
        starts.insert(0, np.asarray(x0, dtype=float))
    best = None
    n_ok = 0
    for start in starts:
        theta, q, ok = problem.minimize(start, bounds)
        if not ok:
            continue
        n_ok += 1
        if best is None or q < best[1]:
            best = (theta, q)
    if best is None:
        raise NoConvergence(f"all {len(starts)} restarts failed")
    theta, q = best
    if scale_mode == "profile":
        scale = problem.scale_hat(q)
    else:
        scale = noise.scale
    return FitResult(
        mle=LogisticParams.from_array(theta),
        loglik=float(problem.loglik_from_quad(q)),
        noise_scale_hat=float(scale),
        converged=n_ok == len(starts),
        restarts_used=len(starts),
        scale_mode=scale_mode,
    )


__all__ = [
    "FIT_BOUNDS",
    "FactorizationFailed",
    "FitResult",
    "GLSProblem",
    "fit_mle",
    "loglik",
    "loglik_iid",
    "loglik_mvn",
    "loglik_ou",
    "loglik_ou_sequential",
    "sigma2_iid_hat",
    "sigma2_ou_hat",
]
