"""Command-line front end.

Subcommands: velocity, sweep-eps, sweep-alpha, classical-log, evolve,
expansion-check, oracle-check.  All numeric validation happens before any
expensive computation; outputs are CSV/JSON files under --out plus a
manifest.json recording the exact configuration.  Exit codes: 0 success,
2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import (
    alpha_sweep,
    classical_log_check,
    eps_sweep,
    model_comparison,
    write_reports_csv,
    write_reports_json,
    report_payload,
)
from .curve import frenet, load_curve, validate_curve
from .errors import NumericalError, ValidationError
from .evolve import SimConfig, run
from .expansion import remainder_order_fit
from .kernel import (
    ARCLENGTH,
    CLASSICAL,
    FRACTIONAL,
    PARAMETER,
    KernelParams,
    QuadratureSpec,
    v_alpha,
)
from .mollify import MollifierSpec, TubeContext, TubeQuadSpec, u_eps, u_eps_oracle


def _floats(text: str):
    try:
        return [float(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}")


def _vec3(text: str) -> np.ndarray:
    vals = _floats(text)
    if len(vals) != 3:
        raise ValidationError(f"expected x,y,z, got {text!r}")
    return np.array(vals)


def _load(path):
    if not os.path.exists(path):
        raise ValidationError(f"curve file not found: {path}")
    curve = load_curve(path)
    validate_curve(curve)
    return curve


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 0.5:
        raise ValidationError(f"alpha must lie in (0, 1/2), got {alpha}")


def _resolve_threads(args) -> int:
    env = os.environ.get("FILAMENT_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"FILAMENT_THREADS must be an integer, got {env!r}")
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_manifest(args, outputs):
    skip = {"func"}
    payload = {
        "command": args.command,
        "version": __version__,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in skip},
        "outputs": sorted(outputs),
    }
    path = os.path.join(args.out, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                             else v for v in row])


def cmd_velocity(args) -> int:
    curve = _load(args.curve)
    if args.mode == FRACTIONAL:
        _check_alpha(args.alpha)
    if not args.point and not args.tau:
        raise ValidationError("give at least one --point or --tau")
    if args.tau and args.eps is None:
        raise ValidationError("--tau (on-curve evaluation) requires --eps")
    out = _out_dir(args)
    params = (KernelParams(alpha=args.alpha, circulation=args.circulation)
              if args.mode == FRACTIONAL
              else KernelParams(mode=CLASSICAL, circulation=args.circulation))
    quad = QuadratureSpec(base_nodes=args.quad_nodes,
                          graded_levels=args.graded_levels)
    rows = []
    ctx = TubeContext(curve) if (args.eps is not None or args.tau) else None
    moll = MollifierSpec(args.eps) if args.eps is not None else None
    for t in args.tau or []:
        u = u_eps(t, curve, params, moll, context=ctx)
        x = curve.eval(t, 0)
        rows.append([t, x[0], x[1], x[2], u[0], u[1], u[2]])
    for p in args.point or []:
        x = _vec3(p)
        if moll is not None:
            u = u_eps_oracle(x, curve, params, moll, context=ctx,
                             resolution=args.oracle_resolution)
        else:
            u = v_alpha(x, curve, params, quad)
        rows.append(["", x[0], x[1], x[2], u[0], u[1], u[2]])
    path = os.path.join(out, "velocity.csv")
    _write_csv(path, ["tau", "x", "y", "z", "vx", "vy", "vz"], rows)
    _write_manifest(args, ["velocity.csv"])
    print(f"wrote {path} ({len(rows)} samples)")
    return 0


def _eps_ladder(args, minimum=4):
    eps = _floats(args.eps_list)
    if len(eps) < minimum:
        raise ValidationError(f"need >= {minimum} epsilons, got {len(eps)}")
    return eps


def cmd_sweep_eps(args) -> int:
    curve = _load(args.curve)
    _check_alpha(args.alpha)
    eps = _eps_ladder(args)
    taus = _floats(args.tau_list)
    out = _out_dir(args)
    ctx = TubeContext(curve)
    params = KernelParams(alpha=args.alpha)
    moll = MollifierSpec(eps[0])
    reports = [eps_sweep(curve, t, params, moll, eps, context=ctx) for t in taus]
    write_reports_csv(reports, os.path.join(out, "sweep_eps.csv"))
    write_reports_json(reports, os.path.join(out, "sweep_eps.json"))
    _write_manifest(args, ["sweep_eps.csv", "sweep_eps.json"])
    for r in reports:
        print(f"tau={r.tau:g}: uLimit=({r.u_limit[0]:.6g}, {r.u_limit[1]:.6g}, "
              f"{r.u_limit[2]:.6g}) C_hat={r.c_hat:.6g} rate={r.fit_rate:.4g}")
    return 0


def cmd_sweep_alpha(args) -> int:
    curve = _load(args.curve)
    alphas = _floats(args.alpha_list)
    for a in alphas:
        _check_alpha(a)
    eps = _eps_ladder(args)
    taus = _floats(args.tau_list)
    threads = _resolve_threads(args)
    out = _out_dir(args)
    ctx = TubeContext(curve)
    table = alpha_sweep(curve, taus, alphas, MollifierSpec(eps[0]), eps,
                        context=ctx, threads=threads)
    write_reports_csv(table.reports, os.path.join(out, "sweep_alpha.csv"))
    write_reports_json(table.reports, os.path.join(out, "sweep_alpha.json"),
                       meta={"flags": table.flags})
    _write_manifest(args, ["sweep_alpha.csv", "sweep_alpha.json"])
    print(json.dumps(table.flags, indent=2, sort_keys=True))
    return 0


def cmd_classical_log(args) -> int:
    curve = _load(args.curve)
    eps = _eps_ladder(args, minimum=3)
    out = _out_dir(args)
    ctx = TubeContext(curve)
    check = classical_log_check(curve, args.tau, MollifierSpec(eps[0]), eps,
                                context=ctx)
    outputs = ["classical_log.csv", "classical_log.json"]
    _write_csv(os.path.join(out, "classical_log.csv"),
               ["eps", "binormal_component"],
               list(zip(check.epsilons, check.binormal_values)))
    payload = {"slope": check.slope, "intercept": check.intercept,
               "r_squared": check.r_squared}
    print(f"slope={check.slope:.6g} r2={check.r_squared:.6f}")
    if args.compare_alpha is not None:
        _check_alpha(args.compare_alpha)
        params = KernelParams(alpha=args.compare_alpha)
        fr = frenet(curve, args.tau)
        moll = MollifierSpec(eps[0])
        b_vals = [float(np.dot(u_eps(args.tau, curve, params,
                                     moll.with_epsilon(e), context=ctx),
                               fr.binormal)) for e in eps]
        r2_log, r2_pow = model_comparison(eps, b_vals, args.compare_alpha)
        payload["fractional_comparison"] = {
            "alpha": args.compare_alpha, "r2_log": r2_log, "r2_power": r2_pow,
            "binormal_values": b_vals,
        }
        print(f"fractional alpha={args.compare_alpha:g}: "
              f"r2_log={r2_log:.6f} r2_power={r2_pow:.6f}")
    with open(os.path.join(out, "classical_log.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _write_manifest(args, outputs)
    return 0


def cmd_evolve(args) -> int:
    curve = _load(args.curve)
    if args.mode != "classicalMollified":
        _check_alpha(args.alpha)
    out = _out_dir(args)
    cfg = SimConfig(velocity_mode=args.mode, alpha=args.alpha, eps=args.eps,
                    dt=args.dt, steps=args.steps, nodes=args.nodes,
                    refit_k=args.refit_k,
                    recompute_coeff=not args.cache_coefficient,
                    cached_lambda=args.cached_lambda)
    traj = run(curve, cfg, out_dir=out, snapshot_every=args.snapshot_every)
    outputs = sorted(p for p in os.listdir(out) if p != "manifest.json")
    _write_manifest(args, outputs)
    if traj.error is not None:
        print(f"halted after {len(traj.snapshots) - 1} steps: {traj.error}",
              file=sys.stderr)
        return 3
    print(f"completed {cfg.steps} steps; wrote {len(outputs)} files to {out}")
    return 0


def cmd_expansion_check(args) -> int:
    curve = _load(args.curve)
    _check_alpha(args.alpha)
    scales = _floats(args.scales)
    if len(scales) < 3:
        raise ValidationError("need >= 3 scales")
    out = _out_dir(args)
    fit = remainder_order_fit(curve, args.tau, args.alpha, scales)
    _write_csv(os.path.join(out, "expansion_check.csv"),
               ["scale", "residual"], list(zip(fit.scales, fit.residuals)))
    with open(os.path.join(out, "expansion_check.json"), "w", encoding="utf-8") as fh:
        json.dump({"slope": fit.slope, "minimal_budget_exponent": fit.expected},
                  fh, indent=2)
        fh.write("\n")
    _write_manifest(args, ["expansion_check.csv", "expansion_check.json"])
    print(f"fitted slope={fit.slope:.4f} minimal budget exponent={fit.expected:.4f}")
    return 0


def cmd_oracle_check(args) -> int:
    curve = _load(args.curve)
    _check_alpha(args.alpha)
    out = _out_dir(args)
    ctx = TubeContext(curve)
    params = KernelParams(alpha=args.alpha)
    moll = MollifierSpec(args.eps)
    rows = []
    worst = 0.0
    for t in args.tau:
        ut = u_eps(t, curve, params, moll, context=ctx)
        uo = u_eps_oracle(curve.eval(t, 0), curve, params, moll, context=ctx,
                          resolution=args.oracle_resolution)
        rel = float(np.linalg.norm(ut - uo) / max(np.linalg.norm(ut), 1e-300))
        worst = max(worst, rel)
        rows.append([t, ut[0], ut[1], ut[2], uo[0], uo[1], uo[2], rel])
    _write_csv(os.path.join(out, "oracle_check.csv"),
               ["tau", "tube_x", "tube_y", "tube_z",
                "oracle_x", "oracle_y", "oracle_z", "rel_diff"], rows)
    _write_manifest(args, ["oracle_check.csv"])
    print(f"max relative deviation {worst:.3e} (tolerance {args.tol:g})")
    if worst >= args.tol:
        print("oracle disagreement exceeds tolerance", file=sys.stderr)
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filament",
        description="Fractional-kernel vortex filament velocities, "
                    "vanishing-mollification sweeps, and filament evolution.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--curve", required=True, help="curve JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (FILAMENT_THREADS overrides)")

    p = sub.add_parser("velocity", help="kernel velocity at points or on-curve")
    common(p)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--mode", choices=[FRACTIONAL, CLASSICAL], default=FRACTIONAL)
    p.add_argument("--circulation", choices=[ARCLENGTH, PARAMETER],
                   default=ARCLENGTH)
    p.add_argument("--eps", type=float, default=None,
                   help="mollification scale (omit for the unmollified field)")
    p.add_argument("--point", action="append", help="x,y,z (repeatable)")
    p.add_argument("--tau", action="append", type=float,
                   help="on-curve parameter (repeatable, needs --eps)")
    p.add_argument("--quad-nodes", type=int, default=512)
    p.add_argument("--graded-levels", type=int, default=0)
    p.add_argument("--oracle-resolution", type=int, default=32)
    p.set_defaults(func=cmd_velocity)

    p = sub.add_parser("sweep-eps", help="vanishing-eps extrapolation at fixed alpha")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--tau-list", default="0.0")
    p.add_argument("--eps-list", required=True)
    p.set_defaults(func=cmd_sweep_eps)

    p = sub.add_parser("sweep-alpha", help="(alpha, tau) table of limits")
    common(p)
    p.add_argument("--alpha-list", required=True)
    p.add_argument("--tau-list", default="0.0")
    p.add_argument("--eps-list", required=True)
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("classical-log", help="log-divergence fit of the classical kernel")
    common(p)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--eps-list", required=True)
    p.add_argument("--compare-alpha", type=float, default=None,
                   help="also fit the fractional field at this alpha")
    p.set_defaults(func=cmd_classical_log)

    p = sub.add_parser("evolve", help="advance a filament in time")
    common(p)
    p.add_argument("--mode", default="limitingLaw",
                   choices=["mollified", "limitingLaw", "classicalMollified", "zero"])
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--eps", type=float, default=0.02)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--refit-k", type=int, default=8)
    p.add_argument("--cache-coefficient", action="store_true",
                   help="freeze the limiting-law coefficient after step 0")
    p.add_argument("--cached-lambda", type=float, default=None,
                   help="fixed limiting-law coefficient (skips extraction)")
    p.add_argument("--snapshot-every", type=int, default=None)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("expansion-check", help="remainder decay of the kernel expansion")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--scales", default="0.04,0.02,0.01,0.005,0.0025")
    p.set_defaults(func=cmd_expansion_check)

    p = sub.add_parser("oracle-check", help="tube quadrature vs Cartesian oracle")
    common(p)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--eps", type=float, default=0.02)
    p.add_argument("--tau", action="append", type=float, default=None)
    p.add_argument("--oracle-resolution", type=int, default=32)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "tau", None) is None and args.command == "oracle-check":
        args.tau = [0.0]
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
