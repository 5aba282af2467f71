"""Command-line front end.

Exit codes: 0 success, 1 bound violation in an audit, 2 configuration or
usage error, 3 domain error, 4 convergence, grid, resolution or step error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config
from .analysis import (
    availability_rate,
    classify_asymmetry,
    horse_carrot_audit,
    isobar,
    iso_mu,
    isotherm,
    mpemba_scenario,
    relaxation_pair,
    solve_equidistant,
    tur_audit,
)
from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    GridError,
    ResolutionError,
    SingularMetric,
    StepError,
)
from .flow import (
    DrivenSpec,
    RelaxSpec,
    dissipation_residual,
    driven_flow,
    pregeodesic_residual,
    relax_analytic,
    relax_ode,
    second_derivative_residual,
)
from .geometry import cubic_values
from .systems import ClassicalIdealGasTP, QuantumRigidGas, State

EXIT_OK, EXIT_BOUND, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3, 4
BOUND_SLACK = 1e-8
SERIES_HEADER = ["t", "T", "eta2", "D_star", "speed_sq", "cubic"]


# -- deterministic writers ------------------------------------------------------


def _num(x):
    x = float(x) + 0.0  # folds -0.0 into 0.0
    return x if math.isfinite(x) else None


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, State):
        return [obj.T, obj.eta2]
    return obj


def write_json(path: Path, payload: dict):
    text = json.dumps(_clean(payload), sort_keys=True, indent=2, ensure_ascii=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, header, columns):
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


def write_series(path: Path, traj):
    eta = traj.eta
    write_csv(
        path,
        SERIES_HEADER,
        [traj.t, eta[:, 0], eta[:, 1], traj.divergence, traj.speed_sq, traj.cubic],
    )


def _out_dir(args, raw=None) -> Path:
    chosen = args.out or os.environ.get("THERMOFLOW_OUT")
    if chosen is None and raw is not None:
        chosen = config.output_dir(raw)
    path = Path(chosen or "thermoflow_out")
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- scenario assembly ----------------------------------------------------------


def _initial_states(cfg, system):
    kind = cfg["system"]["kind"]
    q = config.make_state(kind, cfg["target"])
    init = cfg["initial"]
    if "states" in init:
        return q, [config.make_state(kind, s) for s in init["states"]], None
    eq = init["equidistant"]
    given = config.make_state(kind, eq["given"])
    lo, hi = eq["bracket"]
    if eq["line"] == "isobar":
        line = isobar(given.P)
    elif eq["line"] == "iso-mu":
        line = iso_mu(given.eta2)
    else:
        line = isotherm(eq["value"])
        if kind == "ideal-gas-tp":
            # bracket is given in pressure; the line parameter is -P
            lo, hi = -hi, -lo
    pair = solve_equidistant(system, q, given, line, (lo, hi))
    other = pair.cold if pair.hot == given else pair.hot
    return q, [given, other], pair


def _relax(system, cfg, p0, q):
    r = cfg["relaxation"]
    spec = RelaxSpec(p0, q, r["lambda"], r["horizon"], r["grid_points"])
    return relax_ode(system, spec) if r["method"] == "ode" else relax_analytic(system, spec)


def _residuals(traj):
    return {
        "dissipation": dissipation_residual(traj),
        "second_derivative": second_derivative_residual(traj),
        "pregeodesic": pregeodesic_residual(traj, traj.lam),
    }


def _base_payload(command, cfg):
    return {
        "command": command,
        "config": cfg,
        "config_hash": config.config_hash(cfg),
        "version": __version__,
    }


def _load_config(args):
    raw = config.load(args.config)
    cfg = config.normalize(raw, units=args.units, grid=args.grid, horizon=args.horizon)
    return raw, cfg


# -- commands -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    raw, cfg = _load_config(args)
    out = _out_dir(args, raw)
    system = config.build_system(cfg)
    q, starts, pair = _initial_states(cfg, system)
    trajs = [_relax(system, cfg, p0, q) for p0 in starts]

    payload = _base_payload("simulate", cfg)
    payload["series"] = ["series.csv"]
    write_series(out / "series.csv", trajs[0])
    payload["initial_divergence"] = [float(tr.divergence[0]) for tr in trajs]
    payload["identity_residuals"] = [_residuals(tr) for tr in trajs]
    payload["t_star"] = None
    payload["delta_A"] = None
    payload["faster"] = None
    if pair is not None:
        payload["equidistant"] = {"hot": pair.hot, "cold": pair.cold, "divergence_value": pair.divergence_value}
    if len(trajs) == 2:
        write_series(out / "series_2.csv", trajs[1])
        payload["series"].append("series_2.csv")
        rep = classify_asymmetry(system, trajs[0], trajs[1])
        payload["faster"] = rep.faster
        payload["t_stars"] = list(rep.t_stars)
        payload["critical_point_consistent"] = rep.consistent
        if rep.t_star is not None:
            payload["t_star"] = rep.t_star
            cub = [float(cubic_values(system, *tr.local(rep.t_star))) for tr in trajs]
            payload["delta_A"] = cub[0] - cub[1]
    write_json(out / "report.json", payload)
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def _driven_spec(cfg, system, p0, q):
    sched = cfg["schedule"]
    kind = cfg["system"]["kind"]
    lam = cfg["relaxation"]["lambda"]
    horizon = cfg["relaxation"]["horizon"]
    start = q.eta
    end = config.make_state(kind, sched["target_end"]).eta
    system.check(State.from_eta(end))

    def target(t):
        return start + (end - start) * (t / horizon)

    if sched["rate"] == "sinusoid":
        amp, omega = sched["amplitude"], sched["omega"]

        def rate(t):
            return lam * (1.0 + amp * math.sin(omega * t))

    else:

        def rate(t):
            return lam

    return DrivenSpec(p0, target, rate, horizon, cfg["relaxation"]["grid_points"])


def cmd_audit(args) -> int:
    raw, cfg = _load_config(args)
    out = _out_dir(args, raw)
    system = config.build_system(cfg)
    q, starts, _ = _initial_states(cfg, system)
    payload = _base_payload(f"audit-{args.mode}", cfg)
    worst = math.inf
    if args.mode == "tur":
        lam = cfg["relaxation"]["lambda"]
        tables = []
        for p0 in starts:
            traj = _relax(system, cfg, p0, q)
            taus = [t for t in cfg["audit"]["taus"] if t <= traj.t[-1]]
            rows = tur_audit(traj, lam, taus)
            tables.append([{"tau": r.tau, "dissipated": r.dissipated, "length": r.length,
                            "bound": r.bound, "ratio": r.ratio} for r in rows])
            worst = min([worst] + [r.ratio for r in rows if math.isfinite(r.ratio)])
            payload.setdefault("dissipated_total_vs_initial", []).append(
                {"dissipated": float(traj.dissipated[-1]), "initial_divergence": float(traj.divergence[0])}
            )
        payload["table"] = tables
    else:
        if "schedule" not in cfg:
            raise config.ConfigError("missing table 'schedule' (required for horse-carrot mode)")
        tables = []
        for p0 in starts:
            traj = driven_flow(system, _driven_spec(cfg, system, p0, q))
            row = horse_carrot_audit(traj)
            tables.append({"dissipated": row.dissipated, "mean_inverse_rate": row.mean_inverse_rate,
                           "length": row.length, "bound": row.bound, "ratio": row.ratio})
            if math.isfinite(row.ratio):
                worst = min(worst, row.ratio)
        payload["table"] = tables
    payload["min_ratio"] = worst if math.isfinite(worst) else None
    violated = math.isfinite(worst) and worst < 1.0 - BOUND_SLACK
    payload["bound_violated"] = violated
    write_json(out / "report.json", payload)
    print(f"min ratio {worst!r}; wrote {out / 'report.json'}")
    if violated:
        print("bound violated", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def cmd_tensor(args) -> int:
    _, cfg = _load_config(args)
    system = config.build_system(cfg)
    try:
        T, eta2 = (float(v) for v in args.at.split(","))
    except ValueError:
        print(f"error: --at expects T,ETA2, got {args.at!r}", file=sys.stderr)
        return EXIT_CONFIG
    state = State(T, eta2)
    g = system.metric_eta(state)
    c = system.amari_chentsov_eta(state)
    payload = {
        "state": [T, eta2],
        "metric": {"g11": g.c11, "g12": g.c12, "g22": g.c22},
        "amari_chentsov": {"c111": c.c111, "c112": c.c112, "c122": c.c122, "c222": c.c222},
    }
    print(json.dumps(_clean(payload), sort_keys=True))
    return EXIT_OK


# -- figure data ----------------------------------------------------------------

FIGURE_UNITS = {"fig1": "reduced", "fig2": "reduced", "fig3": "si"}


def _figure_pair(system, q, hot_T, bracket, line, grid, horizon):
    hot = State(hot_T, q.eta2)
    pair = solve_equidistant(system, q, hot, line, bracket)
    # gamma1 warms from the cold side, gamma2 cools from the hot side
    warm, cool = relaxation_pair(system, q, pair.cold, pair.hot, 1.0, horizon, grid)
    return pair, warm, cool


def _fig_rigid_or_isobar(fig, out, grid, horizon):
    if fig == "fig1":
        system = ClassicalIdealGasTP(c=1.5, n0kb=1.0)
        q = State.tp(1.0, 1.0)
        hot_T, bracket, line = 2.0, (1e-3, 1.0 - 1e-9), isobar(1.0)
        T = np.linspace(0.05, 3.0, 296)
        params = {"system": system.kind, "c": 1.5, "n0kb": 1.0, "Tq": 1.0, "Pq": 1.0, "T_hot": hot_T}
    else:
        system = QuantumRigidGas("boson", kappa=1.0, a=0.5, kb=1.0)
        q = State(1.0, -1.0)
        hot_T, bracket, line = 1.25, (0.05, 1.0 - 1e-9), iso_mu(-1.0)
        T = np.linspace(0.05, 2.0, 196)
        params = {"system": system.kind, "kappa": 1.0, "a": 0.5, "mu": -1.0, "Tq": 1.0, "T_hot": hot_T}
    eta = np.stack([T, np.full_like(T, q.eta2)], axis=-1)
    D = system.divergence_delta(np.broadcast_to(q.eta, eta.shape), eta - q.eta)
    write_csv(out / f"{fig}_divergence.csv", ["T", "D_star"], [T, D])

    pair, warm, cool = _figure_pair(system, q, hot_T, bracket, line, grid, horizon)
    gap = cool.divergence - warm.divergence
    write_csv(out / f"{fig}_delta.csv", ["t", "delta_D_star"], [warm.t, gap])
    rep = classify_asymmetry(system, warm, cool)
    interior = gap[1:-1]
    return {
        "figure": fig,
        "parameters": params,
        "parameters_origin": "artifact defaults",
        "pair": {"hot": pair.hot, "cold": pair.cold, "divergence_value": pair.divergence_value},
        "delta_D_star_convention": "D*(cooling branch) - D*(warming branch)",
        "delta_D_star_sign": "positive" if np.all(interior > 0) else "negative" if np.all(interior < 0) else "mixed",
        "faster": {"gamma1": "warming", "gamma2": "cooling"}.get(rep.faster, rep.faster),
        "t_star": rep.t_star,
        "files": [f"{fig}_divergence.csv", f"{fig}_delta.csv"],
    }


def _fig3(out, grid, horizon):
    rep = mpemba_scenario(grid_points=grid, horizon=horizon)
    traj1 = rep.series["gamma1"]
    system, lam = traj1.system, 1.0
    q = traj1.q
    T = np.linspace(270.0, 380.0, 111)
    P = np.linspace(0.9e5, 2.0e5, 111)
    TT, PP = np.meshgrid(T, P, indexing="ij")
    eta = np.stack([TT, -PP], axis=-1)
    A = availability_rate(system, eta, q.eta, lam)
    write_csv(out / "fig3_A_grid.csv", ["T", "P", "A"], [TT.ravel(), PP.ravel(), A.ravel()])
    s = rep.series["pair"]
    write_csv(
        out / "fig3_delta.csv",
        ["t", "delta_D_star", "delta_speed_sq", "delta_A"],
        [s["t"], s["delta_D_star"], s["delta_speed_sq"], s["delta_A"]],
    )
    return {
        "figure": "fig3",
        "parameters": rep.scenario,
        "t_star": rep.t_star,
        "delta_A_at_t_star": rep.delta_A,
        "faster": rep.faster,
        "notes": rep.notes,
        "delta_convention": "gamma2 - gamma1, gamma1 starts at 375 K and 100 kPa",
        "files": ["fig3_A_grid.csv", "fig3_delta.csv"],
    }


def cmd_reproduce(args) -> int:
    fig = args.figure
    preset = FIGURE_UNITS[fig]
    if args.units is not None and args.units != preset:
        print(f"error: {fig} is defined in {preset} units", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    grid = args.grid or 10001
    horizon = args.horizon or 20.0
    payload = _fig3(out, grid, horizon) if fig == "fig3" else _fig_rigid_or_isobar(fig, out, grid, horizon)
    payload.update({"units": preset, "grid_points": grid, "horizon": horizon, "version": __version__})
    write_json(out / f"{fig}_report.json", payload)
    print(f"wrote {fig} data to {out}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        # subcommands repeat the flags with suppressed defaults so that values
        # given before the subcommand are not overwritten
        flags = argparse.ArgumentParser(add_help=False)
        flags.add_argument("--units", choices=sorted(config.UNIT_PRESETS), default=default)
        flags.add_argument("--grid", type=int, default=default, help="time grid points")
        flags.add_argument("--horizon", type=float, default=default, help="integration horizon")
        flags.add_argument("--out", default=default, help="output directory (overrides THERMOFLOW_OUT)")
        return flags

    common = global_flags(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(
        prog="thermoflow", description=__doc__.splitlines()[0], parents=[global_flags(None)]
    )
    parser.add_argument("--version", action="version", version=f"thermoflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="relax one state or an equidistant pair")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", parents=[common], help="write figure data as CSV")
    p.add_argument("figure", choices=sorted(FIGURE_UNITS))
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("audit", parents=[common], help="check dissipation bounds")
    p.add_argument("config")
    p.add_argument("--mode", choices=["tur", "horse-carrot"], required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("tensor", parents=[common], help="print metric and cubic tensor at a state")
    p.add_argument("config")
    p.add_argument("--at", required=True, metavar="T,ETA2")
    p.set_defaults(func=cmd_tensor)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.grid is not None and args.grid < 3:
        parser.error("--grid must be at least 3")
    if args.horizon is not None and not (math.isfinite(args.horizon) and args.horizon > 0):
        parser.error("--horizon must be positive")
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, GridError, ResolutionError, StepError, BracketError, SingularMetric) as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
