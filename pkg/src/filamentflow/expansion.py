"""Taylor-expansion oracle for the fractional kernel integrand near the curve.

For a curve translated so the base point sits at the origin, the integrand

    (x - gamma(s)) x gamma'(s) / |x - gamma(s)|**(3 - alpha)

splits into a main 1/R**(3-alpha) group, a (3-alpha)/(2 R**(5-alpha))
correction, and a remainder whose size is tracked by a fixed list of
monomials in (|s|, |x|, R) with R = sqrt(|x|**2 + speed**2 s**2).  The
remainder monomials use the arc-scaled variable speed*|s| so the comparison
constants stay O(1) regardless of parametrization speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .curve import CurveSpec
from .errors import FitFailure, NotOrthogonal, ValidationError
from .kernel import ARCLENGTH, PARAMETER, FRACTIONAL, KernelParams, kernel_integrand
from .quadrature import graded_periodic_rule

# (k, m, n): arc**k * |x|**m / R**(n - alpha)
BUDGET_MONOMIALS = (
    (3, 0, 3),
    (2, 1, 3),
    (3, 2, 5),
    (4, 1, 5),
    (5, 0, 5),
    (4, 3, 7),
    (6, 2, 7),
    (8, 0, 7),
)


@dataclass(frozen=True)
class ExpansionTerms:
    R: float
    main_order: np.ndarray
    correction: np.ndarray
    remainder_budget: np.ndarray

    @property
    def budget_total(self) -> float:
        return float(self.remainder_budget.sum())


def R_value(x, sigma: float, speed: float) -> float:
    """sqrt(|x|**2 + speed**2 sigma**2); x may be a 3-vector or a magnitude."""
    xm = np.linalg.norm(x) if np.ndim(x) else float(abs(x))
    return float(np.hypot(xm, speed * sigma))


def expansion_terms(x, sigma: float, alpha: float, d1, d2, d3,
                    orth_tol: float = 1e-8) -> ExpansionTerms:
    """Expansion groups from raw derivatives at the base point.

    x must be orthogonal to d1 (the base point is assumed translated to the
    origin).  d3 enters only through the remainder budget scale.
    """
    x = np.asarray(x, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    xm = float(np.linalg.norm(x))
    speed = float(np.linalg.norm(d1))
    if xm > 0 and abs(float(np.dot(x, d1))) > orth_tol * xm * speed:
        raise NotOrthogonal("offset x is not orthogonal to the tangent")
    R = R_value(xm, sigma, speed)
    if R == 0.0:
        raise ValidationError("expansion undefined at x=0, sigma=0")
    x_cross_d1 = np.cross(x, d1)
    main = (x_cross_d1 + sigma * np.cross(x, d2)
            - 0.5 * sigma**2 * np.cross(d1, d2)) / R ** (3.0 - alpha)
    corr = ((3.0 - alpha) / (2.0 * R ** (5.0 - alpha))
            * (sigma**2 * float(np.dot(x, d2)) - sigma**3 * float(np.dot(d1, d2)))
            * x_cross_d1)
    arc = speed * abs(sigma)
    budget = np.array([arc**k * xm**m / R ** (n - alpha)
                       for k, m, n in BUDGET_MONOMIALS])
    return ExpansionTerms(R, main, corr, budget)


def expansion_terms_at(curve: CurveSpec, tau: float, x_offset, sigma: float,
                       alpha: float) -> ExpansionTerms:
    """Expansion at gamma(tau) with the curve translated so gamma(tau) = 0."""
    return expansion_terms(x_offset, sigma, alpha,
                           curve.eval(tau, 1), curve.eval(tau, 2),
                           curve.eval(tau, 3))


def exact_integrand_at(curve: CurveSpec, tau: float, x_offset, sigma: float,
                       alpha: float) -> np.ndarray:
    """Exact kernel integrand in the translated frame (no |gamma'| factor)."""
    x_abs = curve.eval(tau, 0) + np.asarray(x_offset, dtype=float)
    params = KernelParams(alpha=alpha, mode=FRACTIONAL, circulation=PARAMETER)
    return kernel_integrand(x_abs, tau + sigma, curve, params)


def minimal_budget_exponent(alpha: float) -> float:
    """Smallest decay exponent of the budget along |x| ~ arc ~ h."""
    return alpha + min(k + m - n for k, m, n in BUDGET_MONOMIALS)


@dataclass(frozen=True)
class RemainderFit:
    slope: float
    expected: float
    scales: np.ndarray
    residuals: np.ndarray


def remainder_order_fit(curve: CurveSpec, tau: float, alpha: float,
                        scales, direction=None) -> RemainderFit:
    """Fit the decay rate of |exact - (main + correction)| on the diagonal.

    The offset is x = h * direction (default: Frenet normal) and sigma = h
    for each h in scales.  Raises FitFailure when the residual sequence is
    not monotone above the noise floor.
    """
    scales = np.asarray(scales, dtype=float)
    if scales.size < 3 or np.any(np.diff(scales) >= 0):
        raise FitFailure("need at least 3 strictly decreasing scales")
    if direction is None:
        from .curve import frenet
        direction = frenet(curve, tau).normal
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    res = []
    for h in scales:
        x = h * direction
        terms = expansion_terms_at(curve, tau, x, h, alpha)
        exact = exact_integrand_at(curve, tau, x, h, alpha)
        res.append(np.linalg.norm(exact - terms.main_order - terms.correction))
    res = np.asarray(res)
    floor = 1e-12 * max(1.0, res.max())
    live = res > floor
    if live.sum() < 3:
        raise FitFailure("residuals at noise floor; nothing to fit")
    r = res[live]
    if np.any(r[1:] > r[:-1] * 1.15):
        raise FitFailure("residuals not monotone above the noise floor")
    slope = float(np.polyfit(np.log(scales[live]), np.log(r), 1)[0])
    return RemainderFit(slope, minimal_budget_exponent(alpha), scales, res)


def binormal_integral(z_mag: float, alpha: float, speed: float = 1.0) -> float:
    """I(z) = int_{-1/2}^{1/2} s**2 speed / (z**2 + speed**2 s**2)**((3-alpha)/2) ds.

    At z = 0 the closed form is speed**(alpha-2) * 2**(1-alpha) / alpha; the
    adaptive rule resolves the |s|**(alpha-1) endpoint singularity there.
    """
    if z_mag < 0:
        raise ValidationError("z magnitude must be >= 0")
    if not 0.0 < alpha < 0.5:
        raise ValidationError("alpha must lie in (0, 1/2)")
    z2 = z_mag * z_mag

    def f(s):
        return s * s * speed / (z2 + (speed * s) ** 2) ** (0.5 * (3.0 - alpha))

    val, _ = quad(f, 0.0, 0.5, epsabs=1e-13, epsrel=1e-12, limit=400)
    return 2.0 * val


def binormal_integral_at_zero(alpha: float, speed: float = 1.0) -> float:
    """Closed form of the binormal integral at z = 0."""
    return speed ** (alpha - 2.0) * 2.0 ** (1.0 - alpha) / alpha


def leading_kernel_profile(curve: CurveSpec, s: float, rho, alpha: float,
                           max_speed: float | None = None,
                           base_intervals: int = 32, gl_order: int = 6,
                           include_speed: bool = True):
    """g(rho) = int_T |gamma'(s+t)| / (rho**2 + speed(s)**2 t**2)**((3-alpha)/2) dt.

    This is the parameter integral of the first expansion term at offset
    magnitude rho in the normal plane at s; it scales like rho**(alpha-2).
    Vectorized over rho with one graded rule sized for the smallest rho.
    include_speed=False drops the |gamma'(s+t)| factor (the parameter-measure
    circulation convention).
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0):
        raise ValidationError("rho must be positive")
    speed_s = float(np.linalg.norm(curve.eval(s, 1)))
    vmax = max_speed if max_speed is not None else speed_s
    min_scale = rho.min() / (4.0 * vmax)
    nodes, weights = graded_periodic_rule(0.0, min_scale, base_intervals, gl_order)
    if include_speed:
        w = np.linalg.norm(curve.eval(s + nodes, 1), axis=1) * weights
    else:
        w = weights
    R2 = rho[:, None] ** 2 + (speed_s * nodes[None, :]) ** 2
    vals = R2 ** (-0.5 * (3.0 - alpha)) * w[None, :]
    return vals.sum(axis=1)
