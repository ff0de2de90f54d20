"""Optimal observation-time designs.

Two solvers are provided:

* :func:`optimize_fim_design` maximises ``log det F`` over continuous times
  subject to ``t_1 >= t_min``, ``t_n <= t_final`` and a minimum gap, using
  Nelder-Mead on a reparameterisation whose image is exactly the feasible set,
  followed by an SLSQP polish in time coordinates.
* :func:`optimize_global_design` picks ``n_s`` points of a candidate grid to
  maximise ``log det G``, exhaustively when the number of subsets is small and
  otherwise with greedy forward selection plus pairwise-swap local search.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import minimize

from .errors import InfeasibleConstraints
from .information import log_det_objective
from .model import LogisticParams, sensitivities
from .noise import IIDNoise, NoiseModel
from .rng import as_rng
from .sobol import SobolProfile

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 200_000
TIE_TOL = 1e-9
GAP_TOL = 1e-9


@dataclass(frozen=True)
class DesignConstraints:
    t_min: float = 0.0
    t_final: float = 80.0
    min_gap: float = 2.0

    def check_feasible(self, n_s: int) -> None:
        if n_s < 1:
            raise InfeasibleConstraints("need at least one observation")
        if self.t_final < self.t_min or (n_s - 1) * self.min_gap > self.t_final - self.t_min + GAP_TOL:
            raise InfeasibleConstraints(
                f"{n_s} points with gap {self.min_gap} do not fit in [{self.t_min}, {self.t_final}]"
            )


@dataclass(frozen=True)
class Design:
    """Sorted observation times satisfying ``constraints``."""

    times: np.ndarray
    constraints: DesignConstraints = field(default_factory=DesignConstraints)

    def __post_init__(self) -> None:
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        c = self.constraints
        if t.ndim != 1 or t.size == 0:
            raise ValueError("design needs at least one time")
        if t[0] < c.t_min - GAP_TOL or t[-1] > c.t_final + GAP_TOL:
            raise ValueError(f"design {t.tolist()} leaves [{c.t_min}, {c.t_final}]")
        if np.any(np.diff(t) < c.min_gap - GAP_TOL):
            raise ValueError(f"design {t.tolist()} violates minimum gap {c.min_gap}")
        object.__setattr__(self, "times", t)

    @property
    def n_s(self) -> int:
        return self.times.size

    def to_csv_line(self) -> str:
        return ",".join(repr(float(v)) for v in self.times)


def design_record(design: Design, kind: str, noise: NoiseModel, logdet: float, seed=None) -> dict:
    """JSON-ready summary of an optimised design."""
    return {
        "kind": kind,
        "noise": noise.to_dict(),
        "n_s": design.n_s,
        "times": [float(v) for v in design.times],
        "logdet": None if not np.isfinite(logdet) else float(logdet),
        "seed": seed,
    }


def design_to_json(design: Design, kind: str, noise: NoiseModel, logdet: float, seed=None) -> str:
    return json.dumps(design_record(design, kind, noise, logdet, seed))


def even_design(n_s: int, t_min: float = 0.0, t_final: float = 80.0, min_gap: float = 2.0) -> Design:
    """Evenly spaced design including both endpoints."""
    c = DesignConstraints(t_min, t_final, min_gap)
    if n_s == 1:
        return Design(np.array([t_min]), c)
    c.check_feasible(n_s)
    return Design(np.linspace(t_min, t_final, n_s), c)


def candidate_grid(constraints: DesignConstraints = DesignConstraints()) -> np.ndarray:
    """Grid ``t_min, t_min + gap, ...`` closed by ``t_final``.

    If the last regular point is closer than ``gap`` to ``t_final`` it is
    replaced by ``t_final``.
    """
    c = constraints
    k = int(math.floor((c.t_final - c.t_min) / c.min_gap + GAP_TOL))
    grid = c.t_min + c.min_gap * np.arange(k + 1)
    grid = grid[grid <= c.t_final + GAP_TOL]
    if abs(grid[-1] - c.t_final) <= GAP_TOL:
        grid[-1] = c.t_final
    elif c.t_final - grid[-1] >= c.min_gap:
        grid = np.append(grid, c.t_final)
    else:
        grid[-1] = c.t_final
    return grid


def _better(value: float, times: np.ndarray, best) -> bool:
    """Max objective, ties within ``TIE_TOL`` broken by lexicographic order.

    ``best`` is ``None`` or a tuple starting ``(value, times, ...)``.
    """
    if best is None:
        return True
    b_value, b_times = best[0], best[1]
    if value > b_value + TIE_TOL:
        return True
    if value < b_value - TIE_TOL or not np.isfinite(value):
        return False
    return tuple(times) < tuple(b_times)


# --------------------------------------------------------------------------
# continuous Fisher design


class FisherObjective:
    """``log det F(t)`` for fixed parameters and noise; ``t`` must be sorted."""

    def __init__(self, params: LogisticParams, noise: NoiseModel):
        self.theta = params.as_array()
        self.noise = noise
        self._iid = isinstance(noise, IIDNoise)

    def matrix(self, t: np.ndarray) -> np.ndarray:
        rows = self.theta[:, None] * sensitivities(self.theta, t)
        if self._iid:
            return rows @ rows.T / self.noise.sigma2
        R = self.noise.marginal_variance * np.exp(-self.noise.phi * np.abs(t[:, None] - t[None, :]))
        try:
            L = np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            return np.full((3, 3), np.nan)
        Z = linalg.solve_triangular(L, rows.T, lower=True, check_finite=False)
        return Z.T @ Z

    def __call__(self, t: np.ndarray) -> float:
        return log_det_objective(self.matrix(np.asarray(t, dtype=float)))


def _times_from_weights(u: np.ndarray, c: DesignConstraints, n_s: int) -> np.ndarray:
    """Map ``n_s + 1`` free reals onto the feasible set.

    Squared weights split the slack ``t_final - t_min - (n_s - 1) gap`` between
    the lead-in, the ``n_s - 1`` extra gaps and the tail.
    """
    w = u * u
    total = w.sum()
    frac = w / total if total > 0 else np.full(w.size, 1.0 / w.size)
    slack = (c.t_final - c.t_min) - (n_s - 1) * c.min_gap
    t = c.t_min + slack * np.cumsum(frac[:-1]) + c.min_gap * np.arange(n_s)
    return project_feasible(t, c)


def project_feasible(t: np.ndarray, c: DesignConstraints) -> np.ndarray:
    """Push a nearly feasible sorted vector onto the constraint set."""
    t = np.sort(np.asarray(t, dtype=float)).copy()
    t[0] = max(t[0], c.t_min)
    for i in range(1, t.size):
        t[i] = max(t[i], t[i - 1] + c.min_gap)
    t[-1] = min(t[-1], c.t_final)
    for i in range(t.size - 2, -1, -1):
        t[i] = min(t[i], t[i + 1] - c.min_gap)
    t[0] = max(t[0], c.t_min)
    return t


def _polish(objective: FisherObjective, t0: np.ndarray, c: DesignConstraints) -> np.ndarray:
    n = t0.size
    A = np.zeros((n + 1, n))
    b = np.zeros(n + 1)
    A[0, 0], b[0] = 1.0, c.t_min
    A[1, n - 1], b[1] = -1.0, -c.t_final
    for i in range(n - 1):
        A[i + 2, i], A[i + 2, i + 1], b[i + 2] = -1.0, 1.0, c.min_gap
    cons = {"type": "ineq", "fun": lambda t: A @ t - b, "jac": lambda t: A}

    def f(t):
        v = objective(np.sort(t))
        return -v if np.isfinite(v) else 1e12

    res = minimize(f, t0, method="SLSQP", constraints=[cons], options={"ftol": 1e-12, "maxiter": 200})
    return project_feasible(res.x, c)


def optimize_fim_design(
    params: LogisticParams,
    noise: NoiseModel,
    n_s: int,
    constraints: DesignConstraints = DesignConstraints(),
    restarts: int = 50,
    rng=None,
    polish: bool = True,
) -> tuple[Design, float]:
    """D-optimal continuous design for the Fisher information.

    Each restart begins at a uniform draw from the feasible set. Returns the
    best design over all restarts and its ``log det F``.
    """
    c = constraints
    c.check_feasible(n_s)
    rng = as_rng(rng)
    objective = FisherObjective(params, noise)
    if n_s < 3:
        warnings.warn("fewer than 3 observations: Fisher information is singular", RuntimeWarning, stacklevel=2)
        d = even_design(n_s, c.t_min, c.t_final, c.min_gap)
        return d, objective(d.times)
    slack = (c.t_final - c.t_min) - (n_s - 1) * c.min_gap
    if slack <= GAP_TOL:
        t = c.t_min + c.min_gap * np.arange(n_s)
        t[-1] = min(t[-1], c.t_final)
        return Design(t, c), objective(t)

    def neg(u):
        v = objective(_times_from_weights(u, c, n_s))
        return -v if np.isfinite(v) else 1e12

    best = None
    for _ in range(restarts):
        u0 = np.sqrt(rng.dirichlet(np.ones(n_s + 1)))
        res = minimize(
            neg, u0, method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-11, "maxfev": 400 * (n_s + 1), "adaptive": True},
        )
        candidates = [_times_from_weights(res.x, c, n_s)]
        if polish:
            candidates.append(_polish(objective, candidates[0], c))
        for t in candidates:
            value = objective(t)
            if _better(value, t, best):
                best = (value, t)
    value, t = best
    return Design(t, c), float(value)


# --------------------------------------------------------------------------
# combinatorial global design


class SubsetObjective:
    """``log det G`` for index subsets of a candidate grid."""

    def __init__(self, profile: SobolProfile, noise: NoiseModel, grid: np.ndarray, unitless: bool = False):
        self.grid = np.asarray(grid, dtype=float)
        self.S = profile.at(self.grid)
        self.iid = isinstance(noise, IIDNoise)
        if not self.iid:
            scale = 1.0 if unitless else noise.marginal_variance
            self.Sigma = scale * noise.correlation(self.grid)

    def matrix(self, idx) -> np.ndarray:
        idx = np.sort(np.asarray(idx))
        S = self.S[:, idx]
        if self.iid:
            return S @ S.T
        sub = self.Sigma[np.ix_(idx, idx)]
        return S @ np.linalg.solve(sub, S.T)

    def __call__(self, idx) -> float:
        return log_det_objective(self.matrix(idx))

    def batch(self, combos: np.ndarray) -> np.ndarray:
        """Log-determinants for an ``(m, n_s)`` array of sorted index subsets."""
        S = self.S[:, combos]  # (3, m, n)
        St = np.transpose(S, (1, 2, 0))  # (m, n, 3)
        if self.iid:
            G = np.einsum("mni,mnj->mij", St, St)
        else:
            sub = self.Sigma[combos[:, :, None], combos[:, None, :]]
            G = np.einsum("mni,mnj->mij", St, np.linalg.solve(sub, St))
        sign, logdet = np.linalg.slogdet(G)
        return np.where(sign > 0, logdet, -np.inf)


def exhaustive_select(objective: SubsetObjective, n_s: int, chunk: int = 20_000) -> tuple[np.ndarray, float]:
    """Best ``n_s``-subset of the grid by enumeration (lexicographic tie-break)."""
    k = objective.grid.size
    best = None
    it = itertools.combinations(range(k), n_s)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=int)
        if block.size == 0:
            break
        values = objective.batch(block)
        top = np.max(values)
        if not np.isfinite(top):
            continue
        # combinations are generated in lexicographic order, so the first
        # near-maximal subset in a block is the lexicographically smallest
        j = int(np.flatnonzero(values >= top - TIE_TOL)[0])
        idx = block[j]
        value = float(objective(idx))
        if _better(value, objective.grid[idx], best):
            best = (value, objective.grid[idx], idx)
    if best is None:
        return np.arange(n_s), -np.inf
    return best[2], best[0]


def _swap_search(objective: SubsetObjective, idx: np.ndarray, value: float, k: int):
    """Best-improvement pairwise swaps until no swap improves by more than ``TIE_TOL``."""
    idx = np.sort(idx)
    while True:
        chosen = set(idx.tolist())
        outside = [j for j in range(k) if j not in chosen]
        best_move = None
        for pos in range(idx.size):
            for j in outside:
                trial = idx.copy()
                trial[pos] = j
                trial.sort()
                v = objective(trial)
                if v > value + TIE_TOL and _better(v, objective.grid[trial], best_move):
                    best_move = (v, objective.grid[trial], trial)
        if best_move is None:
            return idx, value
        value, _, idx = best_move


def greedy_select(objective: SubsetObjective, n_s: int) -> np.ndarray:
    """Forward selection on ``log det(G + delta I)``; ``delta`` regularises rank < 3."""
    k = objective.grid.size
    delta = 1e-8 * max(float(np.max(objective.S**2)), 1e-300)
    chosen: list[int] = []
    for _ in range(n_s):
        best = None
        for j in range(k):
            if j in chosen:
                continue
            trial = np.sort(np.array(chosen + [j]))
            v = log_det_objective(objective.matrix(trial) + delta * np.eye(3))
            if best is None or v > best[0] + TIE_TOL:
                best = (v, j)
        chosen.append(best[1])
    return np.sort(np.array(chosen))


def heuristic_select(objective: SubsetObjective, n_s: int, budget: int = 20, rng=None) -> tuple[np.ndarray, float]:
    """Greedy start plus ``budget`` random starts, each refined by swap search."""
    rng = as_rng(rng)
    k = objective.grid.size
    starts = [greedy_select(objective, n_s)]
    for _ in range(budget):
        starts.append(np.sort(rng.choice(k, size=n_s, replace=False)))
    best = None
    for idx in starts:
        idx, value = _swap_search(objective, idx, objective(idx), k)
        if _better(value, objective.grid[idx], best):
            best = (value, objective.grid[idx], idx)
    return best[2], best[0]


def optimize_global_design(
    profile: SobolProfile,
    noise: NoiseModel,
    n_s: int,
    grid=None,
    budget: int = 20,
    rng=None,
    method: str = "auto",
    constraints: DesignConstraints = DesignConstraints(),
    unitless: bool = False,
) -> tuple[Design, float]:
    """Select ``n_s`` grid times maximising ``log det G``.

    ``method`` is ``"exhaustive"``, ``"heuristic"`` or ``"auto"`` (exhaustive
    when there are at most 200 000 subsets).
    """
    grid = candidate_grid(constraints) if grid is None else np.asarray(grid, dtype=float)
    k = grid.size
    if not 1 <= n_s <= k:
        raise InfeasibleConstraints(f"cannot choose {n_s} of {k} candidate times")
    if n_s < 3:
        warnings.warn("fewer than 3 observations: global information is singular", RuntimeWarning, stacklevel=2)
    objective = SubsetObjective(profile, noise, grid, unitless)
    if method == "auto":
        method = "exhaustive" if math.comb(k, n_s) <= EXHAUSTIVE_LIMIT else "heuristic"
    if method == "exhaustive":
        idx, value = exhaustive_select(objective, n_s)
    elif method == "heuristic":
        idx, value = heuristic_select(objective, n_s, budget, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Design(grid[np.sort(idx)], constraints), float(value)
