"""Command-line interface: ``hermetia <command> [options]``.

Exit status 0 on success, 2 for configuration or input-data errors and 3 for
numerical failures.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

import numpy as np

from . import io
from .errors import (
    ConfigError,
    DataError,
    DegenerateStateError,
    DomainError,
    EstimationError,
    HermetiaError,
    IntegrationError,
    SetupError,
    TranscriptionError,
)

__all__ = ["main", "run_command", "build_parser", "EXIT_CONFIG", "EXIT_NUMERIC"]

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (ConfigError, SetupError, DataError, TranscriptionError, FileNotFoundError)
_NUMERIC_ERRORS = (IntegrationError, EstimationError, DomainError, DegenerateStateError, FloatingPointError)


def _emit(doc: dict, path: str | None, kind: str) -> None:
    text = io.write_json(path, doc, kind)
    if path is None:
        print(text)


# -- simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> None:
    from .scenarios import Thermostat, tg2_run

    cfg = io.load_config(args.config)
    hours = args.hours if args.hours is not None else cfg.hours
    cfg.integrator["hours"] = hours
    model = cfg.model()
    dist = cfg.disturbance_trace()
    x0 = cfg.initial_state(model, dist.at(0.0))
    ctl = cfg.controller
    thermostat = Thermostat(T_set=float(ctl.get("T_set", 29.0)), sample_dt=float(ctl.get("sample_dt", 60.0)))
    traj = tg2_run(model, hours, disturbance=dist, thermostat=thermostat, x0=x0,
                   events=cfg.event_schedule(), method=cfg.integrator.get("method", "rk4"),
                   dt=float(cfg.integrator.get("dt", 3.6)), tol=float(cfg.integrator.get("tol", 1e-7)))
    io.write_trajectory_csv(args.out, traj, model, fluxes=not args.no_fluxes)
    print(json.dumps({"rows": len(traj), "out": args.out, "final_T_sigma": float(traj.column("T_sigma")[-1])}))


# -- estimate ---------------------------------------------------------------------


def cmd_estimate(args) -> None:
    from .estimate import TG2_CHANNELS, fit, synthetic_tg2_data, tg2_problem

    cfg = io.load_config(args.config)
    est = cfg.estimation
    kind = str(est.get("setup", "partial"))
    channels = tuple(est.get("channels", TG2_CHANNELS))
    free = est.get("free", ["k_mat", "k_maint", "k_alpha_assim"])
    if isinstance(free, dict):
        free = {k: (None if v is None else tuple(map(float, v))) for k, v in free.items()}
    if args.data:
        log = io.load_sensor_csv(args.data)
        data = log.to_dataset(channels)
        dist = log.disturbance() if all(c in log.channels for c in io.DISTURBANCES) else None
    else:
        data = synthetic_tg2_data(cfg.params, kind=kind, hours=float(est.get("hours", cfg.hours)),
                                  channels=channels, noise=float(est.get("noise", 0.01)),
                                  seed=int(est.get("seed", 0)))
        dist = None
    problem = tg2_problem(data, free, cfg.params, kind=kind, disturbance=dist, dt=float(est.get("dt", 60.0)))
    n_starts = args.starts if args.starts is not None else int(est.get("n_starts", 8))
    res = fit(problem, n_starts=n_starts, seed=int(est.get("seed", 0)))
    doc = {
        "parameters": res.values,
        "rss": res.rss,
        "r2": res.r2,
        "best_start": res.best_index,
        "starts": [{"index": s.index, "rss": s.rss, "nfev": s.nfev, "success": s.success, "message": s.message,
                    "x": None if s.x is None else s.x} for s in res.starts],
    }
    _emit(doc, args.out, "fit_result")
    if args.residuals:
        mask = data.mask
        cols = {}
        for j, ch in enumerate(data.channels):
            cols[ch] = data.values[:, j]
            cols[f"{ch}_model"] = res.fitted[:, j]
            cols[f"{ch}_residual"] = np.where(mask[:, j], data.values[:, j] - res.fitted[:, j], np.nan)
        io.write_csv(args.residuals, data.times, cols)


# -- optimize / baseline / compare ------------------------------------------------------


def _scenario(args):
    from .ocp.scenarios import scenario

    hours = args.hours if args.hours is not None else 192.0
    return scenario(args.scenario, hours=hours, seed=args.seed)


def _solution_columns(sol) -> dict[str, np.ndarray]:
    spec = sol.nlp.spec
    cols = {n: sol.x[:, i] for i, n in enumerate(spec.state_names)}
    # inputs are held on [t_k, t_k+1); the last node repeats the final input
    U = np.vstack([sol.u, sol.u[-1:]])
    cols.update({n: U[:, j] for j, n in enumerate(spec.input_names)})
    return cols


def cmd_optimize(args) -> None:
    from .ocp import SqpOptions
    from .ocp.scenarios import run_scenario

    sc = _scenario(args)
    res = run_scenario(sc, SqpOptions(max_iter=args.max_iter, time_limit=args.time_limit))
    sol = res.solution
    if args.csv:
        io.write_csv(args.csv, sol.t, _solution_columns(sol))
    doc = {
        "scenario": args.scenario,
        "status": sol.status,
        "iterations": sol.iterations,
        "violation": sol.violation,
        "objective": sol.objective,
        "baseline_objective": res.baseline_objective,
        "terms": sol.terms,
        "account": res.optimal_account.as_dict(),
        "baseline_account": res.baseline.account.as_dict(),
        "comparison": res.comparison,
        "runtime": res.runtime,
        "t": sol.t,
        "x": {n: sol.x[:, i] for i, n in enumerate(sol.nlp.spec.state_names)},
        "u": {n: sol.u[:, j] for j, n in enumerate(sol.nlp.spec.input_names)},
    }
    _emit(doc, args.out, "ocp_solution")
    if not sol.converged:
        raise IntegrationError(f"optimisation ended with status {sol.status!r}")


def cmd_baseline(args) -> None:
    from .ocp.baseline import setpoint_baseline

    sc = _scenario(args)
    spec = sc.spec
    base = setpoint_baseline(spec.model, sc.setpoints, (spec.t0, spec.t_h, spec.dt), sc.disturbance, spec.x0,
                             u_bounds=spec.u_bounds)
    if args.csv:
        io.write_trajectory_csv(args.csv, base.trajectory, spec.model, fluxes=False)
    doc = {
        "scenario": args.scenario,
        "setpoints": {"T_set": sc.setpoints.T_set, "rh_set": sc.setpoints.rh_set, "u_W_med": sc.setpoints.u_W_med},
        "account": base.account.as_dict(),
    }
    _emit(doc, args.out, "baseline")


def _account(path: str):
    from .ocp.baseline import ResourceAccount

    doc = io.read_json(path)
    acct = doc.get("account")
    if not isinstance(acct, dict):
        raise ConfigError(f"{path}: no 'account' block")
    try:
        return ResourceAccount(**{k: float(acct[k]) for k in ResourceAccount.__dataclass_fields__})
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed account ({exc})") from None


def cmd_compare(args) -> None:
    from .ocp.baseline import compare_resources

    opt, base = _account(args.optimal), _account(args.baseline)
    ratios = compare_resources(opt, base)
    if args.out:
        io.write_json(args.out, {"ratios": ratios}, "comparison")
    width = max(map(len, ratios))
    for k, v in ratios.items():
        print(f"{k:<{width}}  {'n/a' if v is None else io.format_number(v)}")


# -- fluxes ---------------------------------------------------------------------


def cmd_fluxes(args) -> None:
    cfg = io.load_config(args.config)
    model = cfg.model()
    dist = cfg.disturbance_trace()
    d = dist.at(args.time)
    x = cfg.initial_state(model, d)
    for item in args.set or []:
        name, _, value = item.partition("=")
        if name not in model.state_names:
            raise ConfigError(f"--set: unknown state {name!r}")
        try:
            x[model.state_names.index(name)] = float(value)
        except ValueError:
            raise ConfigError(f"--set: {item!r} is not NAME=NUMBER") from None
    u = np.zeros(model.nu)
    for item in args.input or []:
        name, _, value = item.partition("=")
        if name not in model.input_names:
            raise ConfigError(f"--input: unknown input {name!r}")
        try:
            u[model.input_names.index(name)] = float(value)
        except ValueError:
            raise ConfigError(f"--input: {item!r} is not NAME=NUMBER") from None
    report = model.fluxes(x, u, d)
    doc = {"fluxes": dict(report), "rates": {k: v for k, v in report.as_row().items() if k not in report},
           "state": dict(zip(model.state_names, x)), "input": dict(zip(model.input_names, u)),
           "disturbance": dict(zip(io.DISTURBANCES, d))}
    _emit(doc, args.out, "flux_report")


# -- driver -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hermetia", description="Hermetia illucens larvae reactor toolkit")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a batch; write trajectory and flux CSV")
    s.add_argument("--config", default="tg2.yaml")
    s.add_argument("--out", required=True)
    s.add_argument("--hours", type=float)
    s.add_argument("--no-fluxes", action="store_true", help="omit the flux columns")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="multi-start parameter fit")
    s.add_argument("--config", default="tg2.yaml")
    s.add_argument("--data", help="sensor CSV (default: synthetic TG2-like data)")
    s.add_argument("--out", help="FitResult JSON (default: stdout)")
    s.add_argument("--residuals", help="residual CSV")
    s.add_argument("--starts", type=int)
    s.set_defaults(func=cmd_estimate)

    for name, func, hlp in (("optimize", cmd_optimize, "resource-optimal control of a built-in scenario"),
                            ("baseline", cmd_baseline, "set-point operation of a built-in scenario")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--scenario", type=int, choices=(1, 2, 3), default=1)
        s.add_argument("--hours", type=float)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", help="JSON result (default: stdout)")
        s.add_argument("--csv", help="time-series CSV")
        if name == "optimize":
            s.add_argument("--max-iter", type=int, default=150)
            s.add_argument("--time-limit", type=float)
        s.set_defaults(func=func)

    s = sub.add_parser("compare", help="resource ratios of two result files")
    s.add_argument("--optimal", required=True)
    s.add_argument("--baseline", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("fluxes", help="flux report at the configured initial state")
    s.add_argument("--config", default="tg2.yaml")
    s.add_argument("--time", type=float, default=0.0, help="disturbance sample time [s]")
    s.add_argument("--set", action="append", metavar="STATE=VALUE")
    s.add_argument("--input", action="append", metavar="INPUT=VALUE")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fluxes)
    return ap


def _error(exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(doc), file=sys.stderr)
    return code


def run_command(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run the command; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except _CONFIG_ERRORS as exc:
        return _error(exc, EXIT_CONFIG)
    except _NUMERIC_ERRORS as exc:
        return _error(exc, EXIT_NUMERIC)
    except HermetiaError as exc:
        return _error(exc, EXIT_CONFIG)
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
