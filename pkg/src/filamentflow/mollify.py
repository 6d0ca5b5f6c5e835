"""Mollified on-curve velocities via tube coordinates, plus a brute-force
Cartesian oracle.

The mollified velocity at a curve point is

    u_eps(gamma(tau)) = int eta_eps(gamma(tau) - z) v(z) dz

computed in tube coordinates Psi(s, y) = gamma(s) + y1 n1(s) + y2 n2(s) with
the exact Jacobian |det grad Psi| = |gamma'(s)| + y . (n'.T).  The disk
integral runs in polar coordinates with logarithmic radial grading, which
absorbs the |y|**(alpha-1) growth of the unmollified field near the curve.

The oracle integrates the same convolution on a midpoint grid over the
support ball, subdividing cells near the curve until they are small compared
to their distance; it shares no code path with the tube quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad as scipy_quad

from .curve import CurveSpec, FrameField, normal_frame, security_radius
from .errors import EpsilonTooLarge, ValidationError
from .expansion import leading_kernel_profile
from .kernel import (
    ARCLENGTH,
    CurveContext,
    KernelParams,
    QuadratureSpec,
    nearest_parameter_batch,
    velocity_shared_rule,
    velocity_template_batch,
)
from .quadrature import disk_radial_rule, graded_periodic_rule, uniform_panel_rule


def bump_profile(r):
    """Standard smooth bump exp(-1/(1-r**2)) on [0, 1), zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    ri = r[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ri * ri))
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """Radial mollifier eta_eps = eps**-3 c eta(|x|/eps), unit total mass.

    The profile must be supported in [0, 1]; the normalizing constant is
    computed by adaptive radial quadrature at construction.
    """

    epsilon: float
    profile: callable = bump_profile
    normalization: float = field(default=None, compare=False)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValidationError("mollifier scale epsilon must be positive")
        if self.normalization is None:
            mass, _ = scipy_quad(lambda r: self.profile(r) * r * r, 0.0, 1.0,
                                 epsabs=1e-14, epsrel=1e-13, limit=200)
            object.__setattr__(self, "normalization", 1.0 / (4.0 * np.pi * mass))

    def with_epsilon(self, epsilon: float) -> "MollifierSpec":
        return MollifierSpec(epsilon, self.profile, self.normalization)

    def eta(self, offsets) -> np.ndarray:
        """eta_eps evaluated at 3-vector offsets (broadcast over leading axes)."""
        r = np.linalg.norm(np.asarray(offsets, dtype=float), axis=-1)
        return self.eta_of_norm(r)

    def eta_of_norm(self, r) -> np.ndarray:
        """eta_eps as a function of the offset magnitude."""
        r = np.asarray(r, dtype=float)
        return (self.normalization / self.epsilon**3) * self.profile(r / self.epsilon)

    def radial_mass_check(self, n: int = 2001) -> float:
        """Total mass by an independent midpoint rule in the radius."""
        r = (np.arange(n) + 0.5) / n
        return float(4.0 * np.pi * self.normalization * np.mean(self.profile(r) * r * r))


@dataclass(frozen=True)
class TubeQuadSpec:
    """Resolution of the tube quadrature: parameter direction, disk radius
    (log-graded toward the curve) and disk angle."""

    s_nodes: int = 48
    radial_nodes: int = 32
    angular_nodes: int = 16
    kernel_base_intervals: int = 32
    kernel_gl_order: int = 6
    rho_floor: float | None = None

    def __post_init__(self):
        if min(self.s_nodes, self.radial_nodes, self.angular_nodes) < 8:
            raise ValidationError("tube quadrature needs >= 8 nodes per direction")

    def doubled(self) -> "TubeQuadSpec":
        return TubeQuadSpec(2 * self.s_nodes, 2 * self.radial_nodes,
                            2 * self.angular_nodes, self.kernel_base_intervals * 2,
                            self.kernel_gl_order, self.rho_floor)


class TubeContext:
    """Frame, kernel context and security radius cached for one curve."""

    def __init__(self, curve: CurveSpec, frame: FrameField | None = None,
                 frame_samples: int = 512, kernel_context: CurveContext | None = None,
                 radius: float | None = None):
        self.curve = curve
        self.frame = frame if frame is not None else normal_frame(curve, frame_samples)
        self.kernel = kernel_context if kernel_context is not None else CurveContext(curve)
        self.radius = radius if radius is not None else security_radius(curve)


def _require_epsilon_fits(eps: float, ctx: TubeContext):
    if eps >= 0.9 * ctx.radius:
        raise EpsilonTooLarge(
            f"epsilon {eps:.4g} must stay below 0.9 x security radius "
            f"({0.9 * ctx.radius:.4g})")


def _tube_geometry(tau, eps, ctx: TubeContext, quad: TubeQuadSpec):
    """Per-s-node support data for the tube patch around gamma(tau)."""
    vmin, vmax = ctx.kernel.min_speed, ctx.kernel.max_speed
    half_window = 1.5 * eps / vmin
    panels = max(2, quad.s_nodes // 8)
    s_nodes, s_weights = uniform_panel_rule(tau - half_window, tau + half_window,
                                            panels, max(8, quad.s_nodes // panels))
    base = ctx.curve.eval(tau, 0)
    g = ctx.curve.eval(s_nodes, 0)
    d1 = ctx.curve.eval(s_nodes, 1)
    speed = np.linalg.norm(d1, axis=1)
    tang = d1 / speed[:, None]
    chord = base - g
    p = np.einsum("ij,ij->i", chord, tang)
    q = chord - p[:, None] * tang
    qn = np.linalg.norm(q, axis=1)
    disk_r2 = eps * eps - p * p
    alive = disk_r2 > 0.0
    r_outer = np.where(alive, qn + np.sqrt(np.maximum(disk_r2, 0.0)), 0.0)
    r_outer = np.minimum(r_outer, 0.95 * ctx.radius)
    return {
        "s_nodes": s_nodes, "s_weights": s_weights, "gamma": g,
        "speed": speed, "tangent": tang, "base": base,
        "alive": alive, "r_outer": r_outer, "vmax": vmax,
    }


def _resolve_rho_floor(ctx: TubeContext, quad: TubeQuadSpec) -> float:
    if quad.rho_floor is not None:
        return quad.rho_floor
    return 2e-7 * ctx.kernel.diameter


def u_eps(tau: float, curve: CurveSpec, params: KernelParams,
          moll: MollifierSpec, frame: FrameField | None = None,
          quad: TubeQuadSpec = TubeQuadSpec(),
          context: TubeContext | None = None) -> np.ndarray:
    """Mollified velocity at gamma(tau) by tube-coordinate quadrature."""
    ctx = context if context is not None else TubeContext(curve, frame=frame)
    _require_epsilon_fits(moll.epsilon, ctx)
    geo = _tube_geometry(tau, moll.epsilon, ctx, quad)
    rho_floor = _resolve_rho_floor(ctx, quad)
    total = np.zeros(3)
    for i, s in enumerate(geo["s_nodes"]):
        if not geo["alive"][i] or geo["r_outer"][i] <= rho_floor:
            continue
        pts, w = _disk_points(s, i, geo, ctx, moll, quad, rho_floor)
        live = w != 0.0
        if not live.any():
            continue
        pts, w = pts[live], w[live]
        min_scale = rho_floor / (4.0 * geo["vmax"])
        nodes, weights = graded_periodic_rule(float(s), min_scale,
                                              quad.kernel_base_intervals,
                                              quad.kernel_gl_order)
        v = velocity_shared_rule(pts, curve, params, nodes, weights)
        total += geo["s_weights"][i] * (w[:, None] * v).sum(axis=0)
    return total


def _disk_points(s, i, geo, ctx, moll, quad, rho_floor):
    """Polar quadrature points of one normal-plane disk with their
    mollifier-times-Jacobian weights (eta already applied)."""
    r_outer = geo["r_outer"][i]
    rho, w_rho = disk_radial_rule(rho_floor, r_outer, quad.radial_nodes,
                                  top_panels=max(4, quad.radial_nodes // 8))
    n_theta = quad.angular_nodes
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    w_theta = 2.0 * np.pi / n_theta
    n1 = ctx.frame.n1(float(s))
    n2 = ctx.frame.n2(float(s))
    dn1 = ctx.frame.n1(float(s), 1)
    dn2 = ctx.frame.n2(float(s), 1)
    tang = geo["tangent"][i]
    y1 = rho[:, None] * np.cos(theta)[None, :]
    y2 = rho[:, None] * np.sin(theta)[None, :]
    pts = (geo["gamma"][i][None, None, :]
           + y1[..., None] * n1[None, None, :]
           + y2[..., None] * n2[None, None, :])
    det = np.abs(geo["speed"][i] + y1 * np.dot(dn1, tang) + y2 * np.dot(dn2, tang))
    eta = moll.eta(geo["base"][None, None, :] - pts)
    w = eta * det * (w_rho[:, None] * rho[:, None]) * w_theta
    return pts.reshape(-1, 3), w.ravel()


def u_eps_oracle(x, curve: CurveSpec, params: KernelParams, moll: MollifierSpec,
                 resolution: int = 32, context: TubeContext | None = None,
                 min_cell_factor: float = 1e-3,
                 min_distance: float | None = None) -> np.ndarray:
    """Brute-force convolution on a refined Cartesian midpoint grid.

    Cells start at (2 eps / resolution) and are split in octants until they
    are far from the curve relative to their size or reach
    min_cell_factor * eps; cells within the minimum kernel distance of the
    curve are skipped.  Independent of the tube-coordinate machinery.
    """
    ctx = context if context is not None else TubeContext(curve)
    _require_epsilon_fits(moll.epsilon, ctx)
    x = np.asarray(x, dtype=float)
    eps = moll.epsilon
    if min_distance is None:
        min_distance = 2e-7 * ctx.kernel.diameter
    h0 = 2.0 * eps / resolution
    grid = (np.arange(resolution) + 0.5) * h0 - eps
    cx, cy, cz = np.meshgrid(grid, grid, grid, indexing="ij")
    centers = x + np.stack([cx.ravel(), cy.ravel(), cz.ravel()], axis=1)
    inside = np.linalg.norm(centers - x, axis=1) <= eps + h0
    centers = centers[inside]
    h = h0
    h_min = max(min_cell_factor * eps, 2.0 * min_distance)
    total = np.zeros(3)
    quad_spec = QuadratureSpec(base_nodes=64, gl_order=4, panel_fraction=2.0)
    while centers.shape[0]:
        tau_hat, dist = _nearest_chunked(centers, ctx.kernel)
        far = dist > 3.0 * np.sqrt(3.0) * h
        stop = (~far) & (h * 0.5 < h_min)
        keep = far | (stop & (dist > min_distance))
        total += _accumulate_cells(centers[keep], tau_hat[keep], dist[keep],
                                   h, x, moll, ctx, params, quad_spec)
        refine = ~(far | stop)
        # cells whose whole volume sits outside the mollifier ball are dead
        refine &= np.linalg.norm(centers - x, axis=1) <= eps + 0.87 * h
        if not refine.any():
            break
        centers = _split_octants(centers[refine], h)
        h *= 0.5
    return total


def _nearest_chunked(centers, kctx, chunk=65536):
    taus = np.empty(centers.shape[0])
    dists = np.empty(centers.shape[0])
    for lo in range(0, centers.shape[0], chunk):
        sl = slice(lo, lo + chunk)
        taus[sl], dists[sl] = nearest_parameter_batch(centers[sl], kctx,
                                                      newton_iters=2)
    return taus, dists


def _accumulate_cells(centers, tau_hat, dist, h, x, moll, ctx, params, quad_spec):
    if centers.shape[0] == 0:
        return np.zeros(3)
    eta = moll.eta(x[None, :] - centers)
    live = eta > 0.0
    if not live.any():
        return np.zeros(3)
    v = velocity_template_batch(centers[live], tau_hat[live], dist[live],
                                ctx.kernel, params, quad_spec, dtype=np.float32)
    return h**3 * (eta[live, None] * v).sum(axis=0)


def _split_octants(centers, h):
    offs = 0.25 * h * np.array([[sx, sy, sz]
                                for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    return (centers[:, None, :] + offs[None, :, :]).reshape(-1, 3)


def leading_term_contribution(tau: float, curve: CurveSpec, params: KernelParams,
                              moll: MollifierSpec, frame: FrameField | None = None,
                              quad: TubeQuadSpec = TubeQuadSpec(),
                              context: TubeContext | None = None,
                              symmetric_surrogate: bool = False) -> np.ndarray:
    """Mollification of only the first expansion term; the result is the
    residual left after the odd-in-y cancellation, expected O(eps**alpha).

    With symmetric_surrogate=True the mollifier is recentred on the straight
    tangent line and the Jacobian frozen, which makes the cancellation exact.
    """
    if params.mode != "fractional":
        raise ValidationError("leading term is defined for the fractional kernel")
    ctx = context if context is not None else TubeContext(curve, frame=frame)
    _require_epsilon_fits(moll.epsilon, ctx)
    geo = _tube_geometry(tau, moll.epsilon, ctx, quad)
    rho_floor = _resolve_rho_floor(ctx, quad)
    include_speed = params.circulation == ARCLENGTH
    total = np.zeros(3)
    for i, s in enumerate(geo["s_nodes"]):
        if not geo["alive"][i] or geo["r_outer"][i] <= rho_floor:
            continue
        rho, w_rho = disk_radial_rule(rho_floor, geo["r_outer"][i], quad.radial_nodes,
                                      top_panels=max(4, quad.radial_nodes // 8))
        g_prof = leading_kernel_profile(curve, float(s), rho, params.alpha,
                                        max_speed=geo["vmax"],
                                        base_intervals=quad.kernel_base_intervals,
                                        gl_order=quad.kernel_gl_order,
                                        include_speed=include_speed)
        n_theta = quad.angular_nodes
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        w_theta = 2.0 * np.pi / n_theta
        n1 = ctx.frame.n1(float(s))
        n2 = ctx.frame.n2(float(s))
        d1 = geo["speed"][i] * geo["tangent"][i]
        cross1 = np.cross(n1, d1)
        cross2 = np.cross(n2, d1)
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        y1 = rho[:, None] * cos_t[None, :]
        y2 = rho[:, None] * sin_t[None, :]
        if symmetric_surrogate:
            arg2 = ((tau - float(s)) * geo["speed"][i]) ** 2 + rho[:, None] ** 2 + 0.0 * y1
            eta = moll.eta_of_norm(np.sqrt(arg2))
            det = geo["speed"][i] * np.ones_like(y1)
        else:
            pts = (geo["gamma"][i][None, None, :]
                   + y1[..., None] * n1[None, None, :]
                   + y2[..., None] * n2[None, None, :])
            eta = moll.eta(geo["base"][None, None, :] - pts)
            dn1 = ctx.frame.n1(float(s), 1)
            dn2 = ctx.frame.n2(float(s), 1)
            det = np.abs(geo["speed"][i] + y1 * np.dot(dn1, geo["tangent"][i])
                         + y2 * np.dot(dn2, geo["tangent"][i]))
        w = eta * det * (w_rho * rho * g_prof * rho)[:, None] * w_theta
        vec = (w[..., None] * (cos_t[None, :, None] * cross1[None, None, :]
                               + sin_t[None, :, None] * cross2[None, None, :]))
        total += geo["s_weights"][i] * params.c_alpha * vec.sum(axis=(0, 1))
    return total
