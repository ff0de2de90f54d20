"""Replicated inference experiments over designs, noise levels and OU rates.

A :class:`Scenario` describes the generating noise, the noise model assumed
during analysis, how the observation times are chosen, and an optional sweep
axis. :func:`run_scenario` synthesises data for every replicate with its own
child seed, fits, profiles all three parameters and aggregates CI widths.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .design import (
    Design,
    DesignConstraints,
    candidate_grid,
    design_record,
    even_design,
    optimize_fim_design,
    optimize_global_design,
)
from .errors import ConfigError
from .likelihood import FIT_BOUNDS, SCALE_MODES, fit_mle
from .model import PARAM_NAMES, PRIOR_RANGES, TRUE_PARAMS, LogisticParams, ParamRanges
from .noise import IIDNoise, NoiseModel, OUNoise, noise_from_dict, synthesize
from .profile import profile_parameter
from .rng import child_rng
from .sobol import SobolProfile, total_effect_indices

logger = logging.getLogger(__name__)

CSV_VERSION = 1
REPLICATE_COLUMNS = (
    "axis", "axis_value", "replicate", "param", "mle", "ci_lower", "ci_upper",
    "open_lower", "open_upper", "width",
)
SUMMARY_COLUMNS = ("axis", "axis_value", "param", "mean_width", "n_closed", "frac_open", "frac_any_open", "replicates")
AXES = ("none", "sigma2", "n_s", "phi", "design")
DESIGN_SOURCES = ("even", "fim", "global", "explicit")

#: Measurement-time rows used to probe sensitivity to small time shifts.
S3_ROWS = (
    (0, 20, 40, 60, 80),
    (0, 20, 40, 60, 64, 80),
    (0, 13.3, 20, 40, 60, 80),
    (0, 11.4, 20, 40, 45.7, 60, 68.6, 80),
    (0, 10, 20, 30, 40, 50, 60, 70, 80),
)

DEFAULTS: dict[str, Any] = {
    "params": {"r": TRUE_PARAMS.r, "K": TRUE_PARAMS.K, "C0": TRUE_PARAMS.C0},
    "analysis": "correct",
    "scale_mode": "fixed",
    "design": {"source": "even", "n_s": 11, "restarts": 50, "budget": 20, "assume": None,
               "constraints": {"t_min": 0.0, "t_final": 80.0, "min_gap": 2.0},
               "sobol": {"n_base": 8192, "seed": 0}},
    "sweep": {"axis": "none", "values": [None], "coupling": "stationary"},
    "replicates": 200,
    "seed": 0,
    "fit": {"restarts": 10, "lower": list(FIT_BOUNDS.lower), "upper": list(FIT_BOUNDS.upper)},
    "profile": {"n_points": 40, "stop_below": -3.0, "extend": 4.0},
    "n_jobs": 1,
    "output": {"dir": None},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class Scenario:
    """Fully resolved experiment configuration (see ``DEFAULTS`` for keys)."""

    name: str
    config: dict

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<dict>", lines: dict | None = None) -> "Scenario":
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: scenario must be a mapping")
        unknown = set(raw) - set(DEFAULTS) - {"name", "truth"}
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"{source}{_where(lines, (key,))}: unknown field '{key}'")
        cfg = _merge(DEFAULTS, raw)
        name = cfg.get("name")
        if not name:
            raise ConfigError(f"{source}: missing field 'name'")
        scenario = cls(str(name), cfg)
        scenario.validate(source, lines)
        return scenario

    @classmethod
    def from_yaml(cls, text: str, source: str = "<string>") -> "Scenario":
        try:
            node = yaml.compose(text)
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cls.from_dict(raw, source, _line_map(node))

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        return cls.from_yaml(path.read_text(), str(path))

    def validate(self, source: str = "<dict>", lines: dict | None = None) -> None:
        c = self.config

        def fail(path: tuple, msg: str):
            raise ConfigError(f"{source}{_where(lines, path)}: field '{'.'.join(map(str, path))}': {msg}")

        try:
            self.params()
        except (TypeError, ValueError, KeyError) as exc:
            fail(("params",), str(exc))
        if "truth" not in c:
            fail(("truth",), "missing")
        try:
            noise_from_dict(c["truth"])
        except (TypeError, ValueError, KeyError) as exc:
            fail(("truth",), str(exc))
        if c["analysis"] not in ("correct", "iid"):
            fail(("analysis",), "must be 'correct' or 'iid'")
        if c["analysis"] == "iid" and c["truth"].get("kind") != "ou":
            fail(("analysis",), "misspecified analysis only applies to OU-generated data")
        if c["scale_mode"] not in SCALE_MODES:
            fail(("scale_mode",), f"must be one of {SCALE_MODES}")
        d = c["design"]
        if d["source"] not in DESIGN_SOURCES:
            fail(("design", "source"), f"must be one of {DESIGN_SOURCES}")
        if d["assume"] not in (None, "correct", "iid"):
            fail(("design", "assume"), "must be 'correct' or 'iid'")
        s = c["sweep"]
        if s["axis"] not in AXES:
            fail(("sweep", "axis"), f"must be one of {AXES}")
        if not isinstance(s["values"], list) or not s["values"]:
            fail(("sweep", "values"), "must be a nonempty list")
        if s["coupling"] not in ("stationary", "volatility"):
            fail(("sweep", "coupling"), "must be 'stationary' or 'volatility'")
        if s["axis"] == "design" and d["source"] != "explicit":
            fail(("design", "source"), "a design sweep needs source 'explicit'")
        if d["source"] == "explicit" and s["axis"] != "design" and "times" not in d:
            fail(("design", "times"), "explicit designs need 'times'")
        if s["axis"] == "phi" and c["truth"].get("kind") != "ou":
            fail(("sweep", "axis"), "a phi sweep needs OU truth")
        if not isinstance(c["replicates"], int) or c["replicates"] < 1:
            fail(("replicates",), "must be a positive integer")
        if not isinstance(c["seed"], int):
            fail(("seed",), "must be an integer")
        try:
            self.fit_bounds()
        except (TypeError, ValueError) as exc:
            fail(("fit",), str(exc))
        for i, v in enumerate(s["values"]):
            try:
                self.resolve(i)
            except ConfigError:
                raise
            except Exception as exc:  # noqa: BLE001 - report any resolution failure against the field
                fail(("sweep", "values", i), str(exc))

    def params(self) -> LogisticParams:
        p = self.config["params"]
        return LogisticParams(float(p["r"]), float(p["K"]), float(p["C0"]))

    def fit_bounds(self) -> ParamRanges:
        f = self.config["fit"]
        return ParamRanges(tuple(f["lower"]), tuple(f["upper"]))

    def constraints(self) -> DesignConstraints:
        return DesignConstraints(**{k: float(v) for k, v in self.config["design"]["constraints"].items()})

    def resolve(self, i: int) -> tuple[Any, NoiseModel, NoiseModel, dict]:
        """Axis value, generating noise, analysis noise and design spec for sweep point ``i``."""
        c = self.config
        s = c["sweep"]
        value = s["values"][i]
        truth_cfg = dict(c["truth"])
        design = dict(c["design"])
        if s["axis"] == "sigma2":
            if truth_cfg["kind"] == "iid":
                truth_cfg["sigma2"] = float(value)
            elif s["coupling"] == "stationary":
                truth_cfg.pop("sigma2", None)
                truth_cfg["variance"] = float(value)
            else:
                truth_cfg.pop("variance", None)
                truth_cfg["sigma2"] = float(value)
        elif s["axis"] == "phi":
            truth_cfg["phi"] = float(value)
        elif s["axis"] == "n_s":
            design["n_s"] = int(value)
        elif s["axis"] == "design":
            design["times"] = [float(t) for t in value]
        truth = noise_from_dict(truth_cfg)
        analysis = _assumed(truth, c["analysis"])
        return value, truth, analysis, design

    def to_dict(self) -> dict:
        return copy.deepcopy(self.config)


def _assumed(truth: NoiseModel, assumption: str | None) -> NoiseModel:
    if assumption == "iid" and isinstance(truth, OUNoise):
        return IIDNoise(truth.marginal_variance)
    return truth


def _line_map(node, path=()) -> dict:
    out = {}
    if node is None:
        return out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out.update(_line_map(v, path + (k.value,)))
            out[path + (k.value,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out.update(_line_map(v, path + (i,)))
    return out


def _where(lines: dict | None, path: tuple) -> str:
    if not lines:
        return ""
    while path and path not in lines:
        path = path[:-1]
    line = lines.get(path)
    return f":{line}" if line else ""


@dataclass
class SweepResult:
    """Per-axis-point aggregates; widths average closed intervals only."""

    axis: str
    values: list
    mean_width: np.ndarray  # (n_axis, 3)
    n_closed: np.ndarray  # (n_axis, 3)
    frac_open: np.ndarray  # (n_axis, 3)
    frac_any_open: np.ndarray  # (n_axis,)
    replicates: int
    designs: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def width(self, param) -> np.ndarray:
        j = PARAM_NAMES.index(param) if isinstance(param, str) else int(param)
        return self.mean_width[:, j]

    def summary_rows(self) -> list[dict]:
        out = []
        for a, value in enumerate(self.values):
            for j, name in enumerate(PARAM_NAMES):
                out.append({
                    "axis": self.axis,
                    "axis_value": _fmt_axis(value),
                    "param": name,
                    "mean_width": float(self.mean_width[a, j]),
                    "n_closed": int(self.n_closed[a, j]),
                    "frac_open": float(self.frac_open[a, j]),
                    "frac_any_open": float(self.frac_any_open[a]),
                    "replicates": self.replicates,
                })
        return out

    def replicates_csv(self) -> str:
        return _to_csv(REPLICATE_COLUMNS, self.rows)

    def summary_csv(self) -> str:
        return _to_csv(SUMMARY_COLUMNS, self.summary_rows())


def _fmt_axis(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return " ".join(repr(float(v)) for v in value)
    return repr(float(value)) if not isinstance(value, int) else str(value)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _to_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# logistic_oed csv v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def analyse_replicate(
    params: LogisticParams,
    truth: NoiseModel,
    analysis: NoiseModel,
    times: np.ndarray,
    rng: np.random.Generator,
    scale_mode: str = "fixed",
    bounds: ParamRanges = FIT_BOUNDS,
    restarts: int = 10,
    profile_opts: dict | None = None,
) -> list[dict]:
    """Synthesise one data set, fit it and profile every parameter."""
    obs = synthesize(params, truth, times, rng)
    fit = fit_mle(obs, analysis, scale_mode, bounds, restarts, rng)
    rows = []
    for i, name in enumerate(PARAM_NAMES):
        p = profile_parameter(obs, analysis, i, scale_mode, bounds, fit=fit, rng=rng, **(profile_opts or {}))
        ci = p.ci
        rows.append({
            "param": name,
            "mle": float(fit.mle.as_array()[i]),
            "ci_lower": ci.lower,
            "ci_upper": ci.upper,
            "open_lower": ci.open_lower,
            "open_upper": ci.open_upper,
            "width": float(ci.width),
        })
    return rows


def _replicate_task(args):
    (a, k, seed, params, truth, analysis, times, scale_mode, bounds, restarts, profile_opts) = args
    rng = child_rng(seed, a, k)
    return a, k, analyse_replicate(params, truth, analysis, times, rng, scale_mode, bounds, restarts, profile_opts)


class _SobolCache:
    def __init__(self, scenario: Scenario, out_dir: Path | None):
        self.scenario = scenario
        self.out_dir = out_dir
        self._profile: SobolProfile | None = None

    def get(self) -> SobolProfile:
        if self._profile is None:
            cfg = self.scenario.config["design"]["sobol"]
            grid = candidate_grid(self.scenario.constraints())
            path = self.out_dir / "sobol_cache.csv" if self.out_dir else None
            if path is not None and path.exists():
                cached = SobolProfile.load(path)
                if (cached.n_base == int(cfg["n_base"]) and cached.seed == cfg["seed"]
                        and np.array_equal(cached.grid, grid)):
                    self._profile = cached
                    return cached
            ranges = ParamRanges(tuple(cfg.get("lower", PRIOR_RANGES.lower)), tuple(cfg.get("upper", PRIOR_RANGES.upper)))
            self._profile = total_effect_indices(ranges, grid, int(cfg["n_base"]), cfg["seed"])
            if path is not None:
                self._profile.save(path)
        return self._profile


def build_design(scenario: Scenario, design_cfg: dict, truth: NoiseModel, analysis: NoiseModel,
                 seed: int, key: int, sobol: _SobolCache) -> tuple[Design, dict]:
    """Observation times for one sweep point, with a JSON-ready record."""
    c = scenario.constraints()
    source = design_cfg["source"]
    assume = design_cfg.get("assume")
    design_noise = analysis if assume is None else _assumed(truth, assume)
    n_s = int(design_cfg.get("n_s", 0))
    if source == "even":
        d = even_design(n_s, c.t_min, c.t_final, c.min_gap)
        return d, design_record(d, "even", design_noise, np.nan)
    if source == "explicit":
        d = Design(np.asarray(design_cfg["times"], dtype=float), c)
        return d, design_record(d, "explicit", design_noise, np.nan)
    rng = child_rng(seed, 1_000_000 + key)
    if source == "fim":
        d, v = optimize_fim_design(scenario.params(), design_noise, n_s, c, int(design_cfg["restarts"]), rng)
        return d, design_record(d, "fim", design_noise, v, seed)
    d, v = optimize_global_design(sobol.get(), design_noise, n_s, None, int(design_cfg["budget"]), rng,
                                  constraints=c)
    return d, design_record(d, "global", design_noise, v, seed)


def run_scenario(scenario: Scenario | dict, out_dir=None, n_jobs: int | None = None) -> SweepResult:
    """Run every sweep point and replicate; write CSV/JSON if ``out_dir`` is set.

    Replicate ``k`` at sweep point ``a`` uses the child stream ``(seed, a, k)``,
    so results do not depend on execution order or ``n_jobs``.
    """
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    cfg = scenario.config
    out_dir = out_dir if out_dir is not None else cfg["output"]["dir"]
    out_dir = Path(out_dir) if out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    n_jobs = cfg["n_jobs"] if n_jobs is None else n_jobs
    params = scenario.params()
    bounds = scenario.fit_bounds()
    seed = int(cfg["seed"])
    reps = int(cfg["replicates"])
    sobol = _SobolCache(scenario, out_dir)
    profile_opts = dict(cfg["profile"])

    axis = cfg["sweep"]["axis"]
    values = cfg["sweep"]["values"]
    designs, tasks = [], []
    for a in range(len(values)):
        value, truth, analysis, design_cfg = scenario.resolve(a)
        design, record = build_design(scenario, design_cfg, truth, analysis, seed, a, sobol)
        record.update({"axis": axis, "axis_value": value, "truth": truth.to_dict(), "analysis": analysis.to_dict()})
        designs.append(record)
        for k in range(reps):
            tasks.append((a, k, seed, params, truth, analysis, design.times, cfg["scale_mode"], bounds,
                          int(cfg["fit"]["restarts"]), profile_opts))

    if n_jobs == 1:
        results = [_replicate_task(t) for t in tasks]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_replicate_task)(t) for t in tasks)

    results.sort(key=lambda r: (r[0], r[1]))
    n_axis = len(values)
    widths = [[[] for _ in range(3)] for _ in range(n_axis)]
    n_open = np.zeros((n_axis, 3))
    any_open = np.zeros(n_axis)
    rows = []
    for a, k, rep_rows in results:
        opened = False
        for j, row in enumerate(rep_rows):
            is_open = row["open_lower"] or row["open_upper"]
            opened |= is_open
            if is_open:
                n_open[a, j] += 1
            else:
                widths[a][j].append(row["width"])
            rows.append({"axis": axis, "axis_value": _fmt_axis(values[a]), "replicate": k, **row})
        any_open[a] += opened
    mean_width = np.array([[np.mean(w) if w else np.nan for w in per] for per in widths])
    n_closed = np.array([[len(w) for w in per] for per in widths])
    result = SweepResult(axis, list(values), mean_width, n_closed, n_open / reps, any_open / reps, reps, designs, rows)
    if out_dir is not None:
        write_outputs(scenario, result, out_dir)
    return result


def write_outputs(scenario: Scenario, result: SweepResult, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    (out_dir / "replicates.csv").write_text(result.replicates_csv())
    (out_dir / "summary.csv").write_text(result.summary_csv())
    (out_dir / "designs.json").write_text(json.dumps(result.designs, indent=2, default=_json_default) + "\n")
    payload = {
        "scenario": scenario.name,
        "config": scenario.to_dict(),
        "summary": result.summary_rows(),
    }
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2, default=_json_default, allow_nan=True) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def run_phi_sweep(
    phis=(0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0),
    variance_mode: str = "volatility",
    level: float | None = None,
    n_s: int = 11,
    replicates: int = 200,
    seed: int = 0,
    out_dir=None,
    **overrides,
) -> SweepResult:
    """Re-optimise the Fisher design for each OU rate and run replicated inference.

    ``variance_mode="stationary"`` holds ``sigma2 / (2 phi)`` at ``level``
    (default 4.0); ``"volatility"`` holds ``sigma`` at ``level`` (default 0.3).
    """
    if variance_mode == "stationary":
        truth = {"kind": "ou", "phi": phis[0], "variance": 4.0 if level is None else level}
    elif variance_mode == "volatility":
        sigma = 0.3 if level is None else level
        truth = {"kind": "ou", "phi": phis[0], "sigma2": sigma**2}
    else:
        raise ValueError("variance_mode must be 'stationary' or 'volatility'")
    raw = _merge({
        "name": f"phi_sweep_{variance_mode}",
        "truth": truth,
        "design": {"source": "fim", "n_s": n_s},
        "sweep": {"axis": "phi", "values": [float(p) for p in phis]},
        "replicates": replicates,
        "seed": seed,
    }, overrides)
    return run_scenario(Scenario.from_dict(raw), out_dir)


def run_s3_perturbation(rows=S3_ROWS, sigma2: float = 0.64, replicates: int = 200, seed: int = 0,
                        out_dir=None, **overrides) -> SweepResult:
    """Mean CI widths for each explicit time vector in ``rows`` under IID noise."""
    raw = _merge({
        "name": "s3_perturbation",
        "truth": {"kind": "iid", "sigma2": sigma2},
        "design": {"source": "explicit"},
        "sweep": {"axis": "design", "values": [list(map(float, r)) for r in rows]},
        "replicates": replicates,
        "seed": seed,
    }, overrides)
    return run_scenario(Scenario.from_dict(raw), out_dir)
