"""Vanishing-mollification sweeps and the binormal-coefficient extraction.

For a geometric ladder of mollification scales the on-curve velocities are
extrapolated with a single free-exponent power law u_eps = u0 + A eps**beta.
The limit splits algebraically into a binormal part and a remainder:

    u0 = (C_hat / alpha) kappa B + w_hat,      w_hat . B = 0,

so C_hat = alpha (u0 . B) / kappa.  The classical kernel admits no finite
limit; its binormal component grows linearly in log(1/eps), which
classical_log_check quantifies for contrast.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .curve import CurveSpec, FrenetData, frenet
from .errors import ExtrapolationUnstable, FitFailure, ValidationError
from .kernel import CLASSICAL, KernelParams
from .mollify import MollifierSpec, TubeContext, TubeQuadSpec, u_eps


@dataclass(frozen=True)
class AsymptoticsReport:
    alpha: float
    tau: float
    epsilons: np.ndarray
    u_values: np.ndarray       # (n_eps, 3)
    u_limit: np.ndarray        # (3,)
    c_hat: float
    w_hat: np.ndarray          # (3,)
    fit_rate: float
    fit_residual: float


def _check_eps_ladder(eps_list):
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 4:
        raise ValidationError("need >= 4 epsilons for extrapolation")
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValidationError("epsilons must be positive and strictly decreasing")
    ratios = eps[1:] / eps[:-1]
    if np.ptp(ratios) > 0.2 * ratios.mean():
        raise ValidationError("epsilons must form a (roughly) geometric sequence")
    return eps


def fit_power_law(eps, values, beta0: float):
    """Fit values ~ u0 + A * eps**beta componentwise with one shared beta.

    Returns (u0, A, beta, limit_se, rms).  values has shape (n, 3) or (n,).
    limit_se is the standard error of the extrapolated limit u0 propagated
    through the nonlinear fit; it carries the extrapolation leverage (large
    at small beta, where the ladder barely constrains the limit).  rms is
    the plain misfit of the model on the data.
    """
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=float)
    squeeze = vals.ndim == 1
    if squeeze:
        vals = vals[:, None]
    n, m = vals.shape
    scale = max(np.abs(vals).max(), 1e-300)

    def residual(p):
        u0, a, beta = p[:m], p[m:2 * m], p[-1]
        model = u0[None, :] + a[None, :] * eps[:, None] ** beta
        return ((model - vals) / scale).ravel()

    e0 = eps[0] ** beta0 - eps[-1] ** beta0
    a0 = (vals[0] - vals[-1]) / (e0 if abs(e0) > 1e-300 else 1.0)
    p0 = np.concatenate([vals[-1], a0, [beta0]])
    sol = least_squares(residual, p0, method="lm", xtol=1e-15, ftol=1e-15,
                        max_nfev=20000)
    u0, a, beta = sol.x[:m], sol.x[m:2 * m], float(sol.x[-1])
    limit_se = _limit_standard_error(sol, n, m) * scale
    rms = float(np.sqrt(np.mean(sol.fun**2))) * scale
    if squeeze:
        return float(u0[0]), float(a[0]), beta, limit_se, rms
    return u0, a, beta, limit_se, rms


def _limit_standard_error(sol, n: int, m: int) -> float:
    dof = max(n * m - (2 * m + 1), 1)
    s2 = float(np.sum(sol.fun**2)) / dof
    jtj = sol.jac.T @ sol.jac
    cov = np.linalg.pinv(jtj) * s2
    var_u0 = np.clip(np.diag(cov)[:m], 0.0, None)
    return float(np.sqrt(var_u0.sum()))


def extract_C(u_limit, fr: FrenetData, alpha: float):
    """Algebraic split of a limit velocity into (C_hat, w_hat).

    C_hat = alpha (u . B) / kappa and w_hat = u - (C_hat/alpha) kappa B, so
    the reassembly is exact and w_hat is orthogonal to the binormal.
    """
    u = np.asarray(u_limit, dtype=float)
    c_hat = alpha * float(np.dot(u, fr.binormal)) / fr.curvature
    w_hat = u - (c_hat / alpha) * fr.curvature * fr.binormal
    return c_hat, w_hat


def eps_sweep(curve: CurveSpec, tau: float, params: KernelParams,
              moll_template: MollifierSpec, eps_list,
              quad: TubeQuadSpec = TubeQuadSpec(),
              context: TubeContext | None = None) -> AsymptoticsReport:
    """u_eps ladder at one (alpha, tau) plus power-law extrapolation."""
    eps = _check_eps_ladder(eps_list)
    ctx = context if context is not None else TubeContext(curve)
    u_vals = np.array([
        u_eps(tau, curve, params, moll_template.with_epsilon(e), quad=quad,
              context=ctx)
        for e in eps
    ])
    beta0 = params.alpha if params.mode != CLASSICAL else 1.0
    u0, _, beta, limit_se, rms = fit_power_law(eps, u_vals, beta0)
    gap = np.linalg.norm(u0 - u_vals[-1])
    if rms > 0.1 * gap and rms > 1e-9 * np.abs(u_vals).max():
        raise ExtrapolationUnstable(
            f"fit misfit {rms:.3e} exceeds 10% of the last-step gap {gap:.3e}")
    fr = frenet(curve, tau)
    c_hat, w_hat = extract_C(u0, fr, params.alpha)
    return AsymptoticsReport(params.alpha, tau, eps, u_vals, u0, c_hat, w_hat,
                             beta, limit_se)


@dataclass(frozen=True)
class SweepTable:
    reports: list
    flags: dict


def alpha_sweep(curve: CurveSpec, taus, alphas, moll_template: MollifierSpec,
                eps_list, quad: TubeQuadSpec = TubeQuadSpec(),
                context: TubeContext | None = None, threads: int = 1,
                w_floor_rel: float = 1e-3) -> SweepTable:
    """Full (alpha, tau) table of extrapolated limits with band checks.

    Flags record whether all C_hat share one sign, the |C_hat| spread, and
    whether max|w_hat| stays bounded relative to the largest-alpha row.  For
    planar curves w_hat vanishes identically, so the w-band comparison uses
    an absolute floor of w_floor_rel * median|u_limit| to avoid comparing
    noise against noise.
    """
    ctx = context if context is not None else TubeContext(curve)
    cells = [(float(a), float(t)) for a in alphas for t in taus]

    def work(cell):
        a, t = cell
        return eps_sweep(curve, t, KernelParams(alpha=a), moll_template,
                         eps_list, quad=quad, context=ctx)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reports = list(ex.map(work, cells))
    else:
        reports = [work(c) for c in cells]

    c_vals = np.array([r.c_hat for r in reports])
    w_norms = np.array([np.linalg.norm(r.w_hat) for r in reports])
    u_scale = float(np.median([np.linalg.norm(r.u_limit) for r in reports]))
    alpha_max = max(float(a) for a in alphas)
    w_ref = max(w_norms[[r.alpha == alpha_max for r in reports]].max(),
                w_floor_rel * u_scale)
    flags = {
        "c_sign_consistent": bool(np.all(c_vals > 0) or np.all(c_vals < 0)),
        "c_ratio": float(np.abs(c_vals).max() / np.abs(c_vals).min()),
        "c_min": float(np.abs(c_vals).min()),
        "c_max": float(np.abs(c_vals).max()),
        "w_max": float(w_norms.max()),
        "w_ref_alpha_max": float(w_ref),
        "w_bounded": bool(w_norms.max() <= 10.0 * w_ref),
    }
    return SweepTable(reports, flags)


@dataclass(frozen=True)
class LogCheck:
    slope: float
    intercept: float
    r_squared: float
    epsilons: np.ndarray
    binormal_values: np.ndarray


def classical_log_check(curve: CurveSpec, tau: float,
                        moll_template: MollifierSpec, eps_list,
                        quad: TubeQuadSpec = TubeQuadSpec(),
                        context: TubeContext | None = None) -> LogCheck:
    """Regress the mollified classical binormal component on log(1/eps)."""
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 3:
        raise ValidationError("need >= 3 epsilons for the log fit")
    ctx = context if context is not None else TubeContext(curve)
    params = KernelParams(mode=CLASSICAL)
    fr = frenet(curve, tau)
    b_vals = np.array([
        float(np.dot(u_eps(tau, curve, params, moll_template.with_epsilon(e),
                           quad=quad, context=ctx), fr.binormal))
        for e in eps
    ])
    logs = np.log(1.0 / eps)
    slope, intercept = np.polyfit(logs, b_vals, 1)
    r2 = _r_squared(b_vals, slope * logs + intercept)
    return LogCheck(float(slope), float(intercept), r2, eps, b_vals)


def _r_squared(y, model):
    ss_res = float(np.sum((y - model) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        raise FitFailure("constant data admits no r-squared")
    return 1.0 - ss_res / ss_tot


def model_comparison(eps, values, beta0: float):
    """r-squared of the log(1/eps) model vs the free-exponent power model."""
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=float)
    logs = np.log(1.0 / eps)
    slope, intercept = np.polyfit(logs, vals, 1)
    r2_log = _r_squared(vals, slope * logs + intercept)
    u0, a, beta, _, _ = fit_power_law(eps, vals, beta0)
    r2_pow = _r_squared(vals, u0 + a * eps**beta)
    return r2_log, r2_pow


CSV_COLUMNS = ["alpha", "tau", "eps", "ux", "uy", "uz", "C_hat",
               "wx", "wy", "wz", "fitRate", "fitResidual"]


def write_reports_csv(reports, path) -> None:
    """One row per (report, epsilon); per-sweep fields repeat across rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            for e, u in zip(r.epsilons, r.u_values):
                writer.writerow([_fmt(r.alpha), _fmt(r.tau), _fmt(e),
                                 _fmt(u[0]), _fmt(u[1]), _fmt(u[2]),
                                 _fmt(r.c_hat), _fmt(r.w_hat[0]),
                                 _fmt(r.w_hat[1]), _fmt(r.w_hat[2]),
                                 _fmt(r.fit_rate), _fmt(r.fit_residual)])


def report_payload(r: AsymptoticsReport) -> dict:
    return {
        "alpha": r.alpha, "tau": r.tau,
        "epsilons": list(r.epsilons),
        "uValues": [list(u) for u in r.u_values],
        "uLimit": list(r.u_limit),
        "C_hat": r.c_hat,
        "w_hat": list(r.w_hat),
        "fitRate": r.fit_rate,
        "fitResidual": r.fit_residual,
    }


def write_reports_json(reports, path, meta: dict | None = None) -> None:
    payload = {
        "convention": "kernel constant fixed to 1; signs as computed",
        "reports": [report_payload(r) for r in reports],
    }
    if meta:
        payload["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _fmt(x) -> str:
    return repr(float(x))
