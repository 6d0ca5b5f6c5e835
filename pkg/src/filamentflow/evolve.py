"""Exploratory filament evolver.

Marker points advance under one of three velocity laws: the mollified
fractional field evaluated on the current curve, the extracted limiting law
lambda(tau) kappa B, or the mollified classical field.  Each step runs a
classical four-stage Runge-Kutta update, refits the trigonometric series,
and reapplies the near-constant-speed parametrization.

The velocity formula this builds on is an on-curve limit statement, not an
evolution theorem; the simulator is exploratory and its diagnostics (length,
curvature band, self-distance, centroid) are observational only.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .curve import (
    CurveSpec,
    curve_length,
    fit_fourier,
    frenet,
    normal_frame,
    save_curve,
    security_radius,
    validate_curve,
    with_constant_speed,
)
from .errors import FilamentError, SecurityRadiusViolated, ValidationError
from .kernel import CLASSICAL, FRACTIONAL, KernelParams
from .mollify import MollifierSpec, TubeContext, TubeQuadSpec, u_eps
from .asymptotics import eps_sweep, extract_C

MOLLIFIED = "mollified"
LIMITING_LAW = "limitingLaw"
CLASSICAL_MOLLIFIED = "classicalMollified"
ZERO = "zero"  # debug mode: no motion, exercises the refit pipeline

_MODES = (MOLLIFIED, LIMITING_LAW, CLASSICAL_MOLLIFIED, ZERO)


@dataclass(frozen=True)
class SimConfig:
    velocity_mode: str = LIMITING_LAW
    alpha: float = 0.25
    eps: float = 0.02
    dt: float = 0.01
    steps: int = 10
    nodes: int = 64
    refit_k: int = 8
    diag_every: int = 1
    recompute_coeff: bool = True
    cached_lambda: float | None = None
    coeff_eps_ladder: tuple = (0.08, 0.04, 0.02, 0.01)
    tube_quad: TubeQuadSpec = field(default_factory=TubeQuadSpec)
    reparametrize: bool = True

    def __post_init__(self):
        if self.velocity_mode not in _MODES:
            raise ValidationError(f"unknown velocity mode {self.velocity_mode!r}")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.steps < 0:
            raise ValidationError("steps must be >= 0")
        if self.nodes < 2 * self.refit_k + 1:
            raise ValidationError("need nodes >= 2 refit_k + 1")

    def kernel_params(self) -> KernelParams:
        if self.velocity_mode == CLASSICAL_MOLLIFIED:
            return KernelParams(mode=CLASSICAL)
        return KernelParams(alpha=self.alpha, mode=FRACTIONAL)


def _limiting_coefficients(curve: CurveSpec, cfg: SimConfig, taus) -> np.ndarray:
    """lambda(tau) = C_hat/alpha per node, from vanishing-eps sweeps."""
    ctx = TubeContext(curve)
    ladder = [e for e in cfg.coeff_eps_ladder if e < 0.9 * ctx.radius]
    if len(ladder) < 4:
        raise SecurityRadiusViolated(
            "coefficient ladder does not fit inside the security radius")
    lams = np.empty(len(taus))
    for i, t in enumerate(taus):
        rep = eps_sweep(curve, float(t), cfg.kernel_params(),
                        MollifierSpec(ladder[0]), ladder, quad=cfg.tube_quad,
                        context=ctx)
        lams[i] = rep.c_hat / cfg.alpha
    return lams


def _stage_velocity(markers, cfg: SimConfig, taus, lams) -> np.ndarray:
    """Velocity of every marker on the curve refitted through the markers.

    Stages keep the markers' own parametrization (no arc-length refit here:
    that would slide the evaluation stations off the material points and
    destroy the temporal order).
    """
    stage_curve = fit_fourier(markers, cfg.refit_k)
    if cfg.velocity_mode == ZERO:
        return np.zeros_like(markers)
    if cfg.velocity_mode == LIMITING_LAW:
        out = np.empty_like(markers)
        for i, t in enumerate(taus):
            fr = frenet(stage_curve, float(t))
            out[i] = lams[i] * fr.curvature * fr.binormal
        return out
    params = cfg.kernel_params()
    moll = MollifierSpec(cfg.eps)
    ctx = TubeContext(stage_curve, radius=np.inf)  # step() guards the radius
    out = np.empty_like(markers)
    for i, t in enumerate(taus):
        out[i] = u_eps(float(t), stage_curve, params, moll, quad=cfg.tube_quad,
                       context=ctx)
    return out


def step(curve: CurveSpec, cfg: SimConfig, lams: np.ndarray | None = None) -> CurveSpec:
    """One RK4 step of all markers, then spectral refit and reparametrization.

    lams carries per-node limiting-law coefficients; if omitted they are
    resolved from cfg (cached_lambda, or a fresh per-node extraction).
    """
    taus = np.arange(cfg.nodes) / cfg.nodes
    if cfg.velocity_mode == LIMITING_LAW and lams is None:
        if cfg.cached_lambda is not None:
            lams = np.full(cfg.nodes, cfg.cached_lambda)
        else:
            lams = _limiting_coefficients(curve, cfg, taus)
    if cfg.velocity_mode in (MOLLIFIED, CLASSICAL_MOLLIFIED):
        radius = security_radius(curve, grid=2048)
        if cfg.eps >= 0.9 * radius:
            raise SecurityRadiusViolated(
                f"eps {cfg.eps:.4g} no longer fits inside 0.9 x security "
                f"radius ({0.9 * radius:.4g})")
    x0 = curve.eval(taus, 0)
    k1 = _stage_velocity(x0, cfg, taus, lams)
    k2 = _stage_velocity(x0 + 0.5 * cfg.dt * k1, cfg, taus, lams)
    k3 = _stage_velocity(x0 + 0.5 * cfg.dt * k2, cfg, taus, lams)
    k4 = _stage_velocity(x0 + cfg.dt * k3, cfg, taus, lams)
    x1 = x0 + (cfg.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new_curve = fit_fourier(x1, cfg.refit_k)
    if cfg.reparametrize:
        # relabels markers onto arc-uniform stations; switch off to study
        # the time integrator on the fixed semi-discrete system
        new_curve = with_constant_speed(new_curve, k=cfg.refit_k,
                                        nodes=max(1024, 4 * cfg.nodes))
    validate_curve(new_curve)
    return new_curve


@dataclass
class Trajectory:
    snapshots: list
    diagnostics: list
    error: str | None = None

    @property
    def final(self) -> CurveSpec:
        return self.snapshots[-1]


DIAG_COLUMNS = ["step", "time", "length", "kappaMax", "kappaMin",
                "selfDist", "comX", "comY", "comZ"]


def diagnostics_row(curve: CurveSpec, step_idx: int, time: float) -> dict:
    taus = np.arange(512) / 512
    d1 = curve.eval(taus, 1)
    d2 = curve.eval(taus, 2)
    sp = np.linalg.norm(d1, axis=1)
    kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / sp**3
    pts = curve.eval(taus, 0)
    com = (pts * sp[:, None]).sum(axis=0) / sp.sum()
    return {
        "step": step_idx,
        "time": time,
        "length": curve_length(curve),
        "kappaMax": float(kappa.max()),
        "kappaMin": float(kappa.min()),
        "selfDist": _coarse_self_distance(pts),
        "comX": float(com[0]), "comY": float(com[1]), "comZ": float(com[2]),
    }


def _coarse_self_distance(pts) -> float:
    """Min distance between curve samples at least an eighth of a period
    apart; a collision indicator, not a reach estimate."""
    n = pts.shape[0]
    nrm2 = np.einsum("ij,ij->i", pts, pts)
    dist2 = nrm2[:, None] + nrm2[None, :] - 2.0 * (pts @ pts.T)
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    gap = np.minimum(gap, n - gap)
    masked = np.where(gap >= n // 8, np.maximum(dist2, 0.0), np.inf)
    return float(np.sqrt(masked.min()))


def run(curve: CurveSpec, cfg: SimConfig, out_dir=None,
        snapshot_every: int | None = None) -> Trajectory:
    """Advance cfg.steps steps, collecting snapshots and diagnostics.

    On a numerical failure the run halts and reports the last valid state in
    Trajectory.error instead of raising.  With out_dir set, snapshots land
    as curve_NNNN.json plus a diagnostics.csv.
    """
    snapshots = [curve]
    diags = [diagnostics_row(curve, 0, 0.0)]
    lams = None
    error = None
    if (cfg.velocity_mode == LIMITING_LAW and not cfg.recompute_coeff
            and cfg.cached_lambda is None and cfg.steps > 0):
        lams = _limiting_coefficients(curve, cfg, np.arange(cfg.nodes) / cfg.nodes)
    current = curve
    for k in range(cfg.steps):
        try:
            current = step(current, cfg, lams=lams)
        except FilamentError as exc:
            error = f"{type(exc).__name__}: {exc}"
            break
        snapshots.append(current)
        if (k + 1) % cfg.diag_every == 0 or k + 1 == cfg.steps:
            diags.append(diagnostics_row(current, k + 1, (k + 1) * cfg.dt))
    traj = Trajectory(snapshots, diags, error)
    if out_dir is not None:
        _persist(traj, cfg, out_dir, snapshot_every or cfg.diag_every)
    return traj


def _persist(traj: Trajectory, cfg: SimConfig, out_dir, snapshot_every: int):
    os.makedirs(out_dir, exist_ok=True)
    for i, snap in enumerate(traj.snapshots):
        if i % snapshot_every == 0 or i == len(traj.snapshots) - 1:
            save_curve(snap, os.path.join(out_dir, f"curve_{i:04d}.json"))
    with open(os.path.join(out_dir, "diagnostics.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=DIAG_COLUMNS)
        writer.writeheader()
        for row in traj.diagnostics:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})
    if traj.error is not None:
        with open(os.path.join(out_dir, "halted.json"), "w", encoding="utf-8") as fh:
            json.dump({"error": traj.error,
                       "completed_steps": len(traj.snapshots) - 1}, fh, indent=2)
            fh.write("\n")
