"""Independent reference computations shared by unit and acceptance tests."""

import itertools

import mpmath
import numpy as np
from scipy.integrate import solve_ivp

mpmath.mp.dps = 50


def logistic_mp(r, K, C0, t):
    return C0 * K / ((K - C0) * mpmath.exp(-r * t) + C0)


def central_difference(theta, t, rel_step=1e-12):
    """Central differences of the closed form in 50-digit arithmetic."""
    theta = [mpmath.mpf(float(v)) for v in theta]
    t = mpmath.mpf(float(t))
    out = []
    for i in range(3):
        h = theta[i] * rel_step
        up, dn = list(theta), list(theta)
        up[i] += h
        dn[i] -= h
        out.append(float((logistic_mp(*up, t) - logistic_mp(*dn, t)) / (2 * h)))
    return np.array(out)


def ode_solution(theta, t):
    r, K, C0 = theta
    sol = solve_ivp(lambda _, c: r * c * (1 - c / K), (0, float(t[-1])), [C0], t_eval=t, rtol=1e-10, atol=1e-12)
    return sol.y[0]


def expected_loglik_hessian(theta, t, cov, h=1e-4):
    """Hessian in log-parameters of ``E_{y ~ N(C(theta), cov)} log p(y | theta')`` at ``theta' = theta``.

    The expectation is closed form: ``-0.5 (d^T cov^{-1} d + tr(I)) + const``
    with ``d = C(theta') - C(theta)``, so only the mean difference enters.
    """
    theta = np.asarray(theta, dtype=float)
    prec = np.linalg.inv(cov)
    base = _c(theta, t)

    def f(u):
        d = _c(np.exp(u), t) - base
        return -0.5 * d @ prec @ d

    u0 = np.log(theta)
    H = np.empty((3, 3))
    for i, j in itertools.product(range(3), repeat=2):
        ei, ej = np.eye(3)[i] * h, np.eye(3)[j] * h
        H[i, j] = (f(u0 + ei + ej) - f(u0 + ei - ej) - f(u0 - ei + ej) + f(u0 - ei - ej)) / (4 * h * h)
    return H


def _c(theta, t):
    r, K, C0 = theta
    return C0 * K / ((K - C0) * np.exp(-r * t) + C0)


def brute_force_total_effect(ranges_lo, ranges_hi, t, n_outer=1000, n_inner=200, n_var=200_000, seed=0):
    """Double-loop estimate of ``E[Var(f | theta_~i)] / Var(f)`` for each parameter."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(ranges_lo), np.asarray(ranges_hi)
    t = np.asarray(t, dtype=float)
    big = lo + (hi - lo) * rng.random((n_var, 3))
    var = np.var(_c(big.T[:, :, None], t[None, :]), axis=0, ddof=1)
    outer = lo + (hi - lo) * rng.random((n_outer, 3))
    S = np.empty((3, t.size))
    for i in range(3):
        th = np.repeat(outer[:, None, :], n_inner, axis=1)
        th[:, :, i] = lo[i] + (hi[i] - lo[i]) * rng.random((n_outer, n_inner))
        f = _c(th.reshape(-1, 3).T[:, :, None], t[None, :]).reshape(n_outer, n_inner, t.size)
        S[i] = f.var(axis=1, ddof=1).mean(axis=0) / var
    return S
