"""Command-line entry point: ``logistic-oed <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import (
    DesignConstraints,
    design_record,
    even_design,
    optimize_fim_design,
    optimize_global_design,
)
from .errors import ConfigError, LogisticOEDError
from .harness import Scenario, run_scenario
from .likelihood import FIT_BOUNDS, fit_mle
from .model import PRIOR_RANGES, TRUE_PARAMS, LogisticParams
from .noise import IIDNoise, Observations, OUNoise, synthesize
from .profile import profile_parameter
from .sobol import SobolProfile, total_effect_indices
from .design import candidate_grid

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_noise_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise", choices=("iid", "ou"), default="iid")
    p.add_argument("--sigma2", type=float, help="IID variance, or squared OU volatility")
    p.add_argument("--variance", type=float, help="OU stationary variance (alternative to --sigma2)")
    p.add_argument("--phi", type=float, default=0.02, help="OU mean-reversion rate")


def _noise(args) -> IIDNoise | OUNoise:
    if args.noise == "iid":
        return IIDNoise(9.0 if args.sigma2 is None else args.sigma2)
    if args.sigma2 is not None and args.variance is not None:
        raise ConfigError("give only one of --sigma2 and --variance")
    if args.sigma2 is not None:
        return OUNoise(args.phi, args.sigma2)
    return OUNoise.from_stationary(args.phi, 9.0 if args.variance is None else args.variance)


def _add_param_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r", type=float, default=TRUE_PARAMS.r)
    p.add_argument("--K", type=float, default=TRUE_PARAMS.K)
    p.add_argument("--C0", type=float, default=TRUE_PARAMS.C0)


def _add_constraint_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-final", type=float, default=80.0)
    p.add_argument("--min-gap", type=float, default=2.0)


def _constraints(args) -> DesignConstraints:
    return DesignConstraints(args.t_min, args.t_final, args.min_gap)


def _read_obs(path) -> Observations:
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    return Observations(data[:, 0], data[:, 1])


def _write(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> None:
    params = LogisticParams(args.r, args.K, args.C0)
    if args.times:
        times = np.array([float(t) for t in args.times.split(",")])
    else:
        times = even_design(args.n_s).times
    obs = synthesize(params, _noise(args), times, args.seed)
    lines = ["time,value"] + [f"{t!r},{y!r}" for t, y in zip(obs.times.tolist(), obs.values.tolist())]
    _write("\n".join(lines) + "\n", args.out)


def cmd_fit(args) -> None:
    obs = _read_obs(args.data)
    fit = fit_mle(obs, _noise(args), args.scale_mode, FIT_BOUNDS, args.restarts, args.seed)
    out = {
        "r": fit.mle.r, "K": fit.mle.K, "C0": fit.mle.C0,
        "loglik": fit.loglik, "noise_scale_hat": fit.noise_scale_hat,
        "converged": fit.converged, "restarts_used": fit.restarts_used,
    }
    _write(json.dumps(out, indent=2) + "\n", args.out)


def cmd_profile(args) -> None:
    obs = _read_obs(args.data)
    noise = _noise(args)
    rng = np.random.default_rng(args.seed)
    fit = fit_mle(obs, noise, args.scale_mode, FIT_BOUNDS, args.restarts, rng)
    targets = ("r", "K", "C0") if args.param == "all" else (args.param,)
    summary = []
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for name in targets:
        p = profile_parameter(obs, noise, name, args.scale_mode, FIT_BOUNDS, args.n_points, fit=fit, rng=rng)
        summary.append(p.ci.to_dict(name))
        if out_dir:
            (out_dir / f"profile_{name}.csv").write_text(p.to_csv())
    text = json.dumps(summary, indent=2) + "\n"
    if out_dir:
        (out_dir / "ci_summary.json").write_text(text)
    sys.stdout.write(text)


def _emit_design(design, record, args) -> None:
    if args.format == "csv":
        _write(design.to_csv_line() + "\n", args.out)
    else:
        _write(json.dumps(record) + "\n", args.out)


def cmd_design_fim(args) -> None:
    params = LogisticParams(args.r, args.K, args.C0)
    noise = _noise(args)
    d, v = optimize_fim_design(params, noise, args.n_s, _constraints(args), args.restarts, args.seed)
    _emit_design(d, design_record(d, "fim", noise, v, args.seed), args)


def cmd_design_global(args) -> None:
    c = _constraints(args)
    noise = _noise(args)
    if args.sobol_cache:
        profile = SobolProfile.load(args.sobol_cache)
    else:
        profile = total_effect_indices(PRIOR_RANGES, candidate_grid(c), args.n_base, args.sobol_seed)
    d, v = optimize_global_design(profile, noise, args.n_s, None, args.budget, args.seed, args.method, c)
    _emit_design(d, design_record(d, "global", noise, v, args.seed), args)


def cmd_sobol_cache(args) -> None:
    grid = candidate_grid(_constraints(args))
    profile = total_effect_indices(PRIOR_RANGES, grid, args.n_base, args.seed)
    _write(profile.to_csv(), args.out)


def cmd_scenario_run(args) -> None:
    scenario = Scenario.load(args.file)
    if args.seed is not None:
        scenario.config["seed"] = args.seed
    if args.replicates is not None:
        scenario.config["replicates"] = args.replicates
    out_dir = args.out_dir or scenario.config["output"]["dir"] or f"out/{scenario.name}"
    result = run_scenario(scenario, out_dir, args.n_jobs)
    sys.stdout.write(result.summary_csv())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logistic-oed", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesise noisy logistic observations as CSV")
    _add_param_args(p)
    _add_noise_args(p)
    p.add_argument("--times", help="comma-separated observation times")
    p.add_argument("--n-s", type=int, default=11, help="even design size when --times is absent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("fit", cmd_fit, "maximum-likelihood fit of a data CSV"),
                              ("profile", cmd_profile, "profile likelihoods and 95% CIs")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("data", help="CSV with columns time,value")
        _add_noise_args(p)
        p.add_argument("--scale-mode", choices=("fixed", "profile"), default="fixed")
        p.add_argument("--restarts", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        if name == "profile":
            p.add_argument("--param", choices=("all", "r", "K", "C0"), default="all")
            p.add_argument("--n-points", type=int, default=40)
            p.add_argument("--out-dir")
        else:
            p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("design-fim", help="D-optimal continuous design for the Fisher information")
    _add_param_args(p)
    _add_noise_args(p)
    _add_constraint_args(p)
    p.add_argument("--n-s", type=int, required=True)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_design_fim)

    p = sub.add_parser("design-global", help="grid selection maximising the Sobol' information")
    _add_noise_args(p)
    _add_constraint_args(p)
    p.add_argument("--n-s", type=int, required=True)
    p.add_argument("--sobol-cache", help="cache file written by 'sobol-cache'")
    p.add_argument("--n-base", type=int, default=2**13)
    p.add_argument("--sobol-seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--method", choices=("auto", "exhaustive", "heuristic"), default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_design_global)

    p = sub.add_parser("sobol-cache", help="total-effect indices on the candidate grid as CSV")
    _add_constraint_args(p)
    p.add_argument("--n-base", type=int, default=2**13)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sobol_cache)

    p = sub.add_parser("scenario", help="run a scenario file")
    ssub = p.add_subparsers(dest="action", required=True)
    run = ssub.add_parser("run")
    run.add_argument("file")
    run.add_argument("--out-dir")
    run.add_argument("--seed", type=int)
    run.add_argument("--replicates", type=int)
    run.add_argument("--n-jobs", type=int)
    run.set_defaults(func=cmd_scenario_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LogisticOEDError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
