"""Fisher and Sobol'-based information matrices and the D-optimality objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .model import LogisticParams, sensitivities
from .noise import CovMatrix, IIDNoise, NoiseModel, covariance
from .sobol import SobolProfile

KINDS = ("fisher_iid", "fisher_ou", "global_iid", "global_ou")


@dataclass(frozen=True)
class InfoMatrix:
    matrix: np.ndarray
    kind: str
    design: np.ndarray

    @property
    def log_det(self) -> float:
        return log_det_objective(self.matrix)


def _sorted_times(design) -> np.ndarray:
    t = np.sort(np.atleast_1d(np.asarray(getattr(design, "times", design), dtype=float)))
    if t.size == 0:
        raise ValueError("design is empty")
    return t


def _weighted_gram(rows: np.ndarray, t: np.ndarray, noise: NoiseModel, unitless: bool = False) -> np.ndarray:
    """``rows @ Sigma^{-1} @ rows.T`` with ``Sigma`` the noise covariance on ``t``."""
    if isinstance(noise, IIDNoise):
        scale = 1.0 if unitless else noise.sigma2
        return rows @ rows.T / scale
    cov = CovMatrix(noise.correlation(t)) if unitless else covariance(noise, t)
    Z = cov.whiten(rows.T)
    M = Z.T @ Z
    return 0.5 * (M + M.T)


def fim(params: LogisticParams, design, noise: NoiseModel) -> InfoMatrix:
    """Fisher information with respect to log-parameters.

    ``F_ij = theta_i theta_j dC/dtheta_i Sigma^{-1} dC/dtheta_j^T``; for IID
    noise ``Sigma = sigma2 I``.
    """
    t = _sorted_times(design)
    theta = params.as_array() if isinstance(params, LogisticParams) else np.asarray(params, dtype=float)
    rows = theta[:, None] * sensitivities(theta, t)
    kind = "fisher_iid" if isinstance(noise, IIDNoise) else "fisher_ou"
    return InfoMatrix(_weighted_gram(rows, t, noise), kind, t)


def global_info(profile: SobolProfile, design, noise: NoiseModel, unitless: bool = False) -> InfoMatrix:
    """Global information matrix from total-effect indices at the design times.

    IID: ``G = S S^T`` (no noise weighting). OU: ``G = S Sigma^{-1} S^T`` with
    the full covariance, or the unit-variance correlation if ``unitless``.
    """
    t = _sorted_times(design)
    S = profile.at(t)
    if isinstance(noise, IIDNoise):
        return InfoMatrix(S @ S.T, "global_iid", t)
    return InfoMatrix(_weighted_gram(S, t, noise, unitless), "global_ou", t)


def log_det_objective(M) -> float:
    """``log det M`` via Cholesky, or ``-inf`` if ``M`` is not positive definite."""
    M = getattr(M, "matrix", M)
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        return -np.inf
    try:
        L = linalg.cholesky(M, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return -np.inf
    d = np.diag(L)
    # rank-deficient matrices can pass Cholesky with a round-off pivot
    if np.any(d <= np.sqrt(np.finfo(float).eps) * np.sqrt(np.max(np.abs(np.diag(M))))):
        return -np.inf
    return 2.0 * float(np.sum(np.log(d)))
