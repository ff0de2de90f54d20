"""Profile likelihoods, likelihood-ratio confidence intervals and prediction bands."""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .errors import TooFewRetained
from .likelihood import FIT_BOUNDS, FitResult, GLSProblem, fit_mle
from .model import PARAM_NAMES, LogisticParams, ParamRanges, solve, time_grid
from .noise import NoiseModel, Observations
from .rng import as_rng

logger = logging.getLogger(__name__)

#: Univariate 95% threshold, chi2(0.95; 1) / 2 (about 1.92).
CI_THRESHOLD = float(chi2.ppf(0.95, 1) / 2.0)
#: Joint 95% threshold for three parameters, chi2(0.95; 3) / 2 (about 3.91).
REGION_THRESHOLD = float(chi2.ppf(0.95, 3) / 2.0)


def _param_index(target) -> int:
    if isinstance(target, str):
        return PARAM_NAMES.index(target)
    if not 0 <= int(target) < 3:
        raise ValueError(f"parameter index out of range: {target!r}")
    return int(target)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    open_lower: bool = False
    open_upper: bool = False

    @property
    def closed(self) -> bool:
        return not (self.open_lower or self.open_upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower if self.closed else np.inf

    def to_dict(self, param: str) -> dict:
        return {
            "param": param,
            "lower": self.lower,
            "upper": self.upper,
            "open_lower": self.open_lower,
            "open_upper": self.open_upper,
        }


@dataclass(frozen=True)
class ProfileResult:
    """Normalised profile log-likelihood of one parameter.

    ``values`` are sorted; ``lp[j]`` is the profile at ``values[j]`` and
    ``thetas[j]`` the full parameter vector that attains it.
    """

    param: int
    values: np.ndarray
    lp: np.ndarray
    thetas: np.ndarray
    valid: np.ndarray
    mle: LogisticParams
    loglik_max: float
    ci: ConfidenceInterval

    @property
    def name(self) -> str:
        return PARAM_NAMES[self.param]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.name},l_p,valid\n")
        for v, l, ok in zip(self.values, self.lp, self.valid):
            buf.write(f"{float(v)!r},{float(l)!r},{int(ok)}\n")
        return buf.getvalue()

    def ci_json(self) -> str:
        return json.dumps(self.ci.to_dict(self.name))


def confidence_interval(values, lp, threshold: float = CI_THRESHOLD, valid=None) -> ConfidenceInterval:
    """Region where ``lp >= -threshold``, walking outward from the maximum.

    Endpoints are found by linear interpolation between the bracketing grid
    points. A side with no crossing is open and reports the last grid value.
    Accepts a :class:`ProfileResult` as the first argument.
    """
    if isinstance(values, ProfileResult):
        p = values
        values, lp, valid = p.values, p.lp, p.valid
    values = np.asarray(values, dtype=float)
    lp = np.asarray(lp, dtype=float)
    ok = np.isfinite(lp) if valid is None else (np.asarray(valid, dtype=bool) & np.isfinite(lp))
    values, lp = values[ok], lp[ok]
    if values.size < 2:
        raise ValueError("need at least two valid profile points")
    order = np.argsort(values)
    values, lp = values[order], lp[order]
    top = int(np.argmax(lp))
    cut = -threshold

    def walk(step: int):
        j = top
        while 0 <= j + step < values.size:
            k = j + step
            if lp[k] < cut:
                frac = (lp[j] - cut) / (lp[j] - lp[k])
                return values[j] + frac * (values[k] - values[j]), False
            j = k
        return values[j], True

    lower, open_lower = walk(-1)
    upper, open_upper = walk(+1)
    return ConfidenceInterval(float(lower), float(upper), open_lower, open_upper)


class _Profiler:
    def __init__(self, problem: GLSProblem, target: int, bounds: ParamRanges, rng, fallback_starts: int):
        self.problem = problem
        self.i = target
        self.bounds = bounds
        self.rng = rng
        self.fallback_starts = fallback_starts
        self.points: dict[float, tuple[float, np.ndarray, bool]] = {}

    def evaluate(self, value: float, warm: np.ndarray):
        fixed = {self.i: float(value)}
        th, q, ok = self.problem.minimize(warm, self.bounds, fixed=fixed)
        best = (q, th, ok)
        if not ok:
            for start in self.bounds.sample(self.rng, self.fallback_starts):
                th2, q2, ok2 = self.problem.minimize(start, self.bounds, fixed=fixed)
                if ok2 and (not best[2] or q2 < best[0]):
                    best = (q2, th2, ok2)
        q, th, ok = best
        ll = float(self.problem.loglik_from_quad(q))
        self.points[float(value)] = (ll, th, ok)
        return ll, th, ok


def profile_parameter(
    obs: Observations,
    noise: NoiseModel,
    target,
    scale_mode: str = "fixed",
    bounds: ParamRanges = FIT_BOUNDS,
    n_points: int = 40,
    fit: FitResult | None = None,
    restarts: int = 20,
    rng=None,
    extend: float = 4.0,
    stop_below: float | None = None,
    refine_tol: float = 0.01,
    threshold: float = CI_THRESHOLD,
) -> ProfileResult:
    """Normalised profile log-likelihood of ``target`` over ``bounds``.

    The grid has ``n_points`` values spanning the target's bounds. Sweeps run
    outward from the MLE in both directions, warm-starting the two nuisance
    parameters from the previous point. If a side never drops below
    ``-threshold`` the sweep continues past the bound with doubling steps
    until the span reaches ``extend`` times the original width. Brackets of
    the threshold crossing are bisected until narrower than ``refine_tol``
    times their distance from the MLE. ``stop_below`` ends a sweep early once
    the profile falls under that level.
    """
    i = _param_index(target)
    rng = as_rng(rng)
    problem = GLSProblem(obs, noise, scale_mode)
    if fit is None:
        fit = fit_mle(obs, noise, scale_mode, bounds, restarts, rng)
    theta_hat = fit.mle.as_array()
    prof = _Profiler(problem, i, bounds, rng, fallback_starts=3)
    prof.points[float(theta_hat[i])] = (fit.loglik, theta_hat, True)

    lo, hi = bounds.lo[i], bounds.hi[i]
    width = hi - lo
    grid = np.linspace(lo, hi, n_points)
    spacing = width / (n_points - 1)
    slack = 0.5 * (extend - 1.0) * width
    limits = {+1: hi + slack, -1: max(lo - slack, 1e-3 * lo)}
    cut = fit.loglik - threshold

    for direction in (+1, -1):
        if direction > 0:
            seq = list(grid[grid > theta_hat[i]])
        else:
            seq = list(grid[grid < theta_hat[i]][::-1])
        warm = theta_hat
        last = theta_hat[i]
        crossed = False
        step = spacing
        while True:
            if seq:
                value = seq.pop(0)
            else:
                if crossed:
                    break
                value = last + direction * step
                step *= 2.0
                if direction * (value - limits[direction]) > 0:
                    if direction * (last - limits[direction]) >= 0:
                        break
                    value = limits[direction]
            ll, th, ok = prof.evaluate(value, warm)
            last = value
            if ok:
                warm = th
                if ll < cut:
                    crossed = True
                if stop_below is not None and crossed and ll - fit.loglik < stop_below:
                    break

    def table():
        vals = np.array(sorted(prof.points))
        ll = np.array([prof.points[v][0] for v in vals])
        ok = np.array([prof.points[v][2] for v in vals])
        return vals, ll, ok

    # bisect the brackets around each crossing
    for direction in (+1, -1):
        for _ in range(12):
            vals, ll, ok = table()
            keep = ok & np.isfinite(ll)
            vals_k, ll_k = vals[keep], ll[keep]
            top = int(np.argmax(ll_k))
            j = top
            bracket = None
            while 0 <= j + direction < vals_k.size:
                k = j + direction
                if ll_k[k] < cut:
                    bracket = (vals_k[j], vals_k[k])
                    break
                j = k
            if bracket is None:
                break
            a, b = bracket
            if abs(b - a) <= refine_tol * max(abs(a - vals_k[top]), abs(b - a) * 1e-3, 1e-12):
                break
            prof.evaluate(0.5 * (a + b), prof.points[float(a)][1])

    vals, ll, ok = table()
    thetas = np.array([prof.points[v][1] for v in vals])
    best = float(np.max(np.where(ok, ll, -np.inf)))
    loglik_max = max(fit.loglik, best)
    mle = fit.mle
    if best > fit.loglik:
        logger.info("profile of %s found a higher likelihood than the fit; renormalising", PARAM_NAMES[i])
        mle = LogisticParams.from_array(thetas[int(np.argmax(np.where(ok, ll, -np.inf)))])
    lp = ll - loglik_max
    ci = confidence_interval(vals, lp, threshold, ok)
    return ProfileResult(i, vals, lp, thetas, ok, mle, float(loglik_max), ci)


def profile_all(
    obs: Observations,
    noise: NoiseModel,
    scale_mode: str = "fixed",
    bounds: ParamRanges = FIT_BOUNDS,
    restarts: int = 20,
    rng=None,
    fit: FitResult | None = None,
    **kwargs,
) -> tuple[FitResult, list[ProfileResult]]:
    """Fit once, then profile all three parameters from the shared MLE."""
    rng = as_rng(rng)
    if fit is None:
        fit = fit_mle(obs, noise, scale_mode, bounds, restarts, rng)
    profiles = [
        profile_parameter(obs, noise, i, scale_mode, bounds, fit=fit, rng=rng, **kwargs)
        for i in range(3)
    ]
    return fit, profiles


@dataclass(frozen=True)
class PredictionBand:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_retained: int

    def contains(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (values >= self.lower) & (values <= self.upper)


def prediction_band(
    obs: Observations,
    noise: NoiseModel,
    box: ParamRanges | list[ProfileResult],
    scale_mode: str = "fixed",
    fit: FitResult | None = None,
    n_samples: int = 50_000,
    rng=None,
    grid=None,
    min_retained: int = 50,
    restarts: int = 20,
) -> PredictionBand:
    """Envelope of trajectories whose parameters lie in the joint 95% region.

    Parameters are drawn uniformly from ``box`` (a range, or the bounding box
    of the confidence intervals of a list of profiles). Draws whose normalised
    log-likelihood is at least ``-chi2(0.95; 3) / 2`` are kept together with
    the MLE itself; the band is their pointwise envelope on ``grid``, widened
    by the 5% and 95% quantiles of the noise marginal.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = as_rng(rng)
    problem = GLSProblem(obs, noise, scale_mode)
    if fit is None:
        fit = fit_mle(obs, noise, scale_mode, FIT_BOUNDS, restarts, rng)
    loglik_max = fit.loglik
    if not isinstance(box, ParamRanges):
        profiles = sorted(box, key=lambda p: p.param)
        box = ParamRanges(
            tuple(p.ci.lower for p in profiles),
            tuple(p.ci.upper for p in profiles),
        )
        loglik_max = max([loglik_max] + [p.loglik_max for p in profiles])
    thetas = box.sample(rng, n_samples)
    ll = problem.loglik_many(thetas)
    kept = thetas[ll - loglik_max >= -REGION_THRESHOLD]
    if kept.shape[0] < min_retained:
        raise TooFewRetained(f"only {kept.shape[0]} of {n_samples} samples passed the threshold")
    kept = np.vstack([kept, fit.mle.as_array()])
    t = obs.times if grid is None else time_grid(grid)
    traj = solve(kept.T[:, :, None], t[None, :])
    if scale_mode == "profile":
        marginal = fit.noise_model(noise).marginal_variance
    else:
        marginal = noise.marginal_variance
    q = norm.ppf(0.95) * np.sqrt(marginal)
    return PredictionBand(t, traj.min(axis=0) - q, traj.max(axis=0) + q, int(kept.shape[0]))
