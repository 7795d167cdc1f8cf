"""Command-line front end.

Exit status: 0 on PASS, 1 when a check fails or a module raises, 2 on usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from typing import Optional

import numpy as np

from . import bounds, dispersion, lattice, lyapunov, model, profile
from .config import ConfigError, RunConfig, canonical_config, check_option, parse_config
from .errors import LatticeWaveError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# which module an exception came from, for error messages
_MODULE_NAMES = {
    "latticewave.model": "model",
    "latticewave.dispersion": "dispersion",
    "latticewave.bounds": "bounds",
    "latticewave.profile": "profile",
    "latticewave.lyapunov": "lyapunov",
    "latticewave.lattice": "lattice",
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def emit(out, key: str, value) -> None:
    out.write(f"{key} = {fmt(value)}\n")


def verdict(out, ok: bool) -> int:
    out.write("PASS\n" if ok else "FAIL\n")
    return EXIT_OK if ok else EXIT_FAIL


def _speed_arg(args, p) -> float:
    if args.c is not None:
        return args.c
    return 2.0 * dispersion.critical_speed(p)[0]


# -- subcommands ------------------------------------------------------------------


def cmd_r0(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    mu1, mu2, mu3 = model.derived_rates(p)
    emit(out, "mu1", mu1)
    emit(out, "mu2", mu2)
    emit(out, "mu3", mu3)
    emit(out, "R0", model.basic_reproduction_number(p))
    return EXIT_OK


def cmd_equilibria(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    E0 = model.disease_free_equilibrium(p)
    for name, v in zip("SVI", E0):
        emit(out, f"E0.{name}", v)
    emit(out, "E0.residual", float(np.max(np.abs(model.ode_rhs(p, E0)))))
    if model.basic_reproduction_number(p) <= 1.0:
        out.write("Estar = none (R0 <= 1)\n")
        return EXIT_OK
    Es = model.endemic_equilibrium(p)
    for name, v in zip("SVI", Es):
        emit(out, f"Estar.{name}", v)
    emit(out, "Estar.residual", float(np.max(np.abs(model.ode_rhs(p, Es)))))
    return EXIT_OK


def cmd_speed(cfg: RunConfig, args, out) -> int:
    c_star, r_star = dispersion.critical_speed(cfg.params)
    emit(out, "c_star", c_star)
    emit(out, "r_star", r_star)
    return EXIT_OK


def cmd_roots(cfg: RunConfig, args, out) -> int:
    r1, r2 = dispersion.lambda_roots(args.c, cfg.params)
    emit(out, "c", args.c)
    emit(out, "r1", r1)
    emit(out, "r2", r2)
    return EXIT_OK


def cmd_bounds_check(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    c = _speed_arg(args, p)
    k = bounds.default_bounds(p, c)
    overrides = {name: getattr(args, name) for name in ("M1", "M2", "M3") if getattr(args, name) is not None}
    if overrides:
        if any(not v > 0 for v in overrides.values()):
            raise ConfigError("M overrides must be > 0")
        k = k.with_overrides(**overrides)
    grid = bounds.kink_free_grid(k, args.grid_from, args.grid_to, args.grid_n)
    rep = bounds.verify_subsuper(k, p, c, grid)
    emit(out, "c", c)
    for name in ("eps1", "eps2", "eps3", "M1", "M2", "M3"):
        emit(out, name, getattr(k, name))
    for name in ("X1", "X2", "X3"):
        emit(out, name, getattr(k, name))
    emit(out, "points", grid.size)
    emit(out, "max_violation", rep.max_violation)
    out.write(f"worst_inequality = {rep.worst_inequality}\n")
    emit(out, "worst_zeta", rep.worst_zeta)
    if not rep.passed:
        violated = sorted({name for name, _, _ in rep.failures()}, key=bounds.INEQUALITIES.index)
        out.write(f"violated = {','.join(violated)}\n")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["zeta", "ineq_id", "lhs_minus_rhs"])
            for i, z in enumerate(rep.zeta):
                zs = fmt(z)
                for j, name in enumerate(bounds.INEQUALITIES):
                    w.writerow([zs, name, fmt(rep.residuals[i, j])])
    return verdict(out, rep.passed)


def cmd_profile(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    o = cfg.options
    c = _speed_arg(args, p)
    k = bounds.default_bounds(p, c)
    pr, rep = profile.solve_truncated(p, c, o.B, o.h, o.tol, o.max_iter, k=k)
    diag = profile.profile_diagnostics(pr, p, k)
    emit(out, "c", c)
    emit(out, "B", o.B)
    emit(out, "h", o.h)
    emit(out, "converged", rep.converged)
    emit(out, "iterations", rep.iterations)
    emit(out, "last_change", rep.change)
    emit(out, "residual", rep.residual.value)
    emit(out, "residual_zeta", rep.residual.zeta)
    out.write(f"residual_equation = {rep.residual.equation}\n")
    emit(out, "left_gap", rep.left_gap)
    emit(out, "left_gap_allowed", profile.left_envelope_gap(p, k, o.B))
    emit(out, "right_gap", rep.right_gap)
    for key in ("in_envelope", "strict_bounds", "derivatives_bounded", "ratios_bounded"):
        emit(out, key, diag[key])
    if args.out:
        pr.to_csv(args.out)
    ok = rep.converged and all(diag[key] for key in ("in_envelope", "strict_bounds", "derivatives_bounded", "ratios_bounded"))
    return verdict(out, ok)


def cmd_lyapunov(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    c = _speed_arg(args, p)
    pr = profile.read_profile_csv(args.profile, c)
    Es = model.endemic_equilibrium(p)
    trace = lyapunov.lyapunov_derivative_check(pr, p, Es)
    emit(out, "nodes", trace.zeta.size)
    emit(out, "max_dVdzeta", trace.max_dV)
    emit(out, "max_increment", trace.max_increase)
    emit(out, "worst_relative_disagreement", trace.worst_agreement)
    for kind, zeta, value in trace.failures:
        out.write(f"failure = {kind} at zeta {fmt(zeta)} (value {fmt(value)})\n")
    if args.out:
        trace.to_csv(args.out)
    return verdict(out, trace.passed)


def cmd_simulate(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    o = cfg.options
    init = lattice.initial_localized(p, o.N, args.k, args.I0)
    # front tracking needs at least unit-time resolution; CSV output is strided
    csv_steps = max(1, int(round(args.snapshot_every / o.dt)))
    unit_steps = max(1, int(round(1.0 / o.dt)))
    sim_steps = math.gcd(csv_steps, unit_steps)
    traj = lattice.simulate(p, init, o.T, o.dt, sim_steps * o.dt)
    br = lattice.boundedness_report(p, traj, args.k)
    emit(out, "N", o.N)
    emit(out, "T", o.T)
    emit(out, "dt", o.dt)
    emit(out, "clamps", traj.clamps)
    emit(out, "max_S_post_burn_in", br.max_S)
    emit(out, "max_V_post_burn_in", br.max_V)
    emit(out, "min_I_seed", br.min_seed_I)
    emit(out, "sup_I", br.sup_I)
    for msg in br.failures:
        out.write(f"failure = {msg}\n")
    ok = br.passed
    R0 = model.basic_reproduction_number(p)
    front = None
    if R0 > 1.0:
        theta = o.theta if o.theta is not None else 0.5 * model.endemic_equilibrium(p).I
        c_star = dispersion.critical_speed(p)[0]
        emit(out, "theta", theta)
        emit(out, "c_star", c_star)
        try:
            front = lattice.front_speed(traj, theta, clip_at_boundary=True)
        except LatticeWaveError as exc:
            out.write(f"failure = lattice: {exc}\n")
            ok = False
        else:
            emit(out, "c_emp", front.speed)
            emit(out, "relative_gap", (front.speed - c_star) / c_star)
            emit(out, "fit_residual", front.fit_residual)
            emit(out, "fit_from", front.window[0])
            emit(out, "fit_to", front.window[1])
    if args.out:
        keep = [i for i, t in enumerate(traj.t) if int(round(t / o.dt)) % csv_steps == 0 or i == traj.t.size - 1]
        sub = lattice.Trajectory(
            traj.N, traj.t[keep], traj.S[keep], traj.V[keep], traj.I[keep], traj.R[keep],
            traj.clamps, traj.dt, traj.sup_I,
        )
        sub.to_csv(args.out)
    if args.front_out and front is not None:
        front.to_csv(args.front_out)
    return verdict(out, ok)


def cmd_ode(cfg: RunConfig, args, out) -> int:
    p = cfg.params
    o = cfg.options
    E0 = model.disease_free_equilibrium(p)
    init = (
        E0.S if args.S0 is None else args.S0,
        E0.V if args.V0 is None else args.V0,
        args.I0,
    )
    traj = lattice.ode_simulate(p, init, o.T, o.dt, args.record_every)
    final = traj.final
    if model.basic_reproduction_number(p) > 1.0 and init[2] > 0:
        target, label = model.endemic_equilibrium(p), "Estar"
    else:
        target, label = E0, "E0"
    for name, v in zip("SVI", final):
        emit(out, f"final.{name}", v)
    out.write(f"target = {label}\n")
    emit(out, "distance", float(np.max(np.abs(np.array(final) - np.array(target)))))
    if args.out:
        traj.to_csv(args.out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args, out) -> int:
    attr = model.PARAM_KEYS.get(args.param, args.param)
    if attr not in dispersion.SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    values = np.linspace(args.from_, args.to, args.steps)
    fh = open(args.out, "w", newline="") if args.out else out
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "c_star", "r_star", "sensitivity"])
        for v in values:
            try:
                q = cfg.params.replace(**{attr: float(v)})
                crit = dispersion.critical_speed(q)
                sens = dispersion.speed_sensitivity(q, attr, crit)
                row = [fmt(v), fmt(crit[0]), fmt(crit[1]), fmt(sens)]
            except LatticeWaveError:
                # no wave speed here (R0 <= 1 or invalid value)
                row = [fmt(v), "nan", "nan", "nan"]
            w.writerow(row)
    finally:
        if fh is not out:
            fh.close()
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latticewave", description="Traveling waves of a lattice SVIR epidemic model.")
    ap.add_argument("--config", help="model/run configuration file (default: built-in reference parameters)")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sub.add_parser("r0", help="derived rates and R0")
    sub.add_parser("equilibria", help="disease-free and endemic equilibria")
    sub.add_parser("speed", help="critical wave speed c* and exponent r*")

    s = sub.add_parser("roots", help="decay exponents r1 < r2 at speed c")
    s.add_argument("--c", type=float, required=True)

    s = sub.add_parser("bounds-check", help="verify the sub/super-solution inequalities")
    s.add_argument("--c", type=float, help="wave speed (default 2 c*)")
    s.add_argument("--grid-from", type=float, default=-40.0)
    s.add_argument("--grid-to", type=float, default=10.0)
    s.add_argument("--grid-n", type=int, default=4001)
    for name in ("M1", "M2", "M3"):
        s.add_argument(f"--{name}", type=float, help=f"force {name}")
    s.add_argument("--out", help="per-point residual CSV")

    s = sub.add_parser("profile", help="solve the truncated wave-profile problem")
    s.add_argument("--c", type=float, help="wave speed (default 2 c*)")
    s.add_argument("--B", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int, dest="max_iter")
    s.add_argument("--out", default="profile.csv", help="profile CSV (default profile.csv)")

    s = sub.add_parser("lyapunov", help="certify a profile with the Lyapunov functional")
    s.add_argument("--profile", required=True, help="profile CSV written by the profile command")
    s.add_argument("--c", type=float, help="speed the profile was computed at (default 2 c*)")
    s.add_argument("--out", default="lyapunov_trace.csv")

    s = sub.add_parser("simulate", help="lattice simulation and empirical front speed")
    s.add_argument("--N", type=int)
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--k", type=int, default=5, help="seed half-width")
    s.add_argument("--I0", type=float, default=0.1, help="seed level")
    s.add_argument("--snapshot-every", type=float, default=10.0, dest="snapshot_every")
    s.add_argument("--out", default="snapshots.csv")
    s.add_argument("--front-out", default="front.csv", dest="front_out")

    s = sub.add_parser("ode", help="homogeneous ODE trajectory")
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--S0", type=float, help="initial S (default disease-free value)")
    s.add_argument("--V0", type=float, help="initial V (default disease-free value)")
    s.add_argument("--I0", type=float, default=0.01)
    s.add_argument("--record-every", type=float, default=1.0, dest="record_every")
    s.add_argument("--out", default="ode.csv")

    s = sub.add_parser("sweep", help="c*, r* and dc*/dparam over a parameter range")
    s.add_argument("--param", required=True, help="one of " + ", ".join(model.PARAM_KEYS))
    s.add_argument("--from", type=float, required=True, dest="from_")
    s.add_argument("--to", type=float, required=True)
    s.add_argument("--steps", type=int, default=11, help="number of sample points")
    s.add_argument("--out", help="CSV path (default: standard output)")
    return ap


COMMANDS = {
    "r0": cmd_r0,
    "equilibria": cmd_equilibria,
    "speed": cmd_speed,
    "roots": cmd_roots,
    "bounds-check": cmd_bounds_check,
    "profile": cmd_profile,
    "lyapunov": cmd_lyapunov,
    "simulate": cmd_simulate,
    "ode": cmd_ode,
    "sweep": cmd_sweep,
}

_OPTION_FLAGS = ("B", "h", "tol", "max_iter", "N", "dt", "T", "theta")


def _module_of(exc: BaseException) -> str:
    tb = exc.__traceback__
    name = "latticewave"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod in _MODULE_NAMES:
            name = _MODULE_NAMES[mod]
        tb = tb.tb_next
    return name


def main(argv: Optional[list[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = parse_config(args.config) if args.config else canonical_config()
        flags = {name: getattr(args, name, None) for name in _OPTION_FLAGS}
        cfg = cfg.with_options(**flags)
        for name, value in flags.items():
            if value is not None and (msg := check_option(name, value)):
                raise ConfigError(f"--{name}: {msg}")
    except ConfigError as exc:
        err.write(f"error: config: {exc}\n")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        err.write(f"error: {args.command}: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        # unreadable input or unwritable output path
        err.write(f"error: {args.command}: {exc.strerror}: {exc.filename}\n")
        return EXIT_USAGE
    except (LatticeWaveError, ValueError) as exc:
        err.write(f"error: {_module_of(exc)}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
