"""Quadrature rules shared by the kernel, mollification and expansion modules.

Everything here returns plain ``(nodes, weights)`` pairs so the callers can
evaluate integrands in vectorised batches.  Two constructions matter:

* a periodic rule for integrals over the unit torus with dyadic grading toward
  a near-singular parameter value, and
* an exponentially graded radial rule that resolves integrable ``rho**(alpha-1)``
  singularities at the origin of a disk.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    """Nodes and weights of the Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def periodic_trapezoid(n: int):
    """Uniform trapezoid rule on the unit torus (spectrally accurate for
    smooth periodic integrands)."""
    nodes = np.arange(n) / n
    weights = np.full(n, 1.0 / n)
    return nodes, weights


def composite_gauss(edges, order: int):
    """Composite Gauss-Legendre rule over the panels defined by ``edges``.

    ``edges`` must be increasing; one panel spans each consecutive pair.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo = edges[:-1]
    width = np.diff(edges)
    nodes = (lo[:, None] + 0.5 * width[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (0.5 * width[:, None] * w[None, :]).ravel()
    return nodes, weights


def dyadic_edges(outer: float, inner: float):
    """Decreasing panel edges [outer, outer/2, ..., ~inner, 0].

    Halving stops once the next edge would fall below ``inner``; the final
    panel [0, e_min] absorbs the remaining core.
    """
    if inner >= outer:
        return np.array([0.0, outer])
    edges = [outer]
    while edges[-1] * 0.5 > inner:
        edges.append(edges[-1] * 0.5)
    edges.append(0.0)
    return np.array(edges[::-1])


def graded_periodic_rule(center: float, min_scale: float,
                         base_intervals: int = 32, gl_order: int = 6):
    """Rule for one period of a torus integrand peaked at ``center``.

    Dyadic panels shrink toward ``center`` until their width reaches
    ``min_scale``; panels wider than ``1/base_intervals`` are split uniformly
    so the smooth far field keeps the base resolution.  Nodes are returned in
    ``(center - 1/2, center + 1/2)`` without wrapping; integrands must be
    evaluated periodically.
    """
    base_w = 1.0 / base_intervals
    min_scale = min(max(min_scale, 1e-16), 0.25)
    side_edges = dyadic_edges(0.5, min_scale)
    refined = [0.0]
    for lo, hi in zip(side_edges[:-1], side_edges[1:]):
        width = hi - lo
        pieces = max(1, int(np.ceil(width / base_w)))
        refined.extend(lo + width * np.arange(1, pieces + 1) / pieces)
    side = np.asarray(refined)
    edges = np.concatenate([-side[::-1], side[1:]])
    nodes, weights = composite_gauss(edges, gl_order)
    return nodes + center, weights


def log_radial_rule(r_min: float, r_max: float, n_nodes: int = 32,
                    gl_order: int = 8):
    """Rule for ``int_{r_min}^{r_max} f(rho) d rho`` with logarithmic grading.

    Uses the substitution ``rho = r_min * (r_max/r_min)**u`` and a composite
    Gauss-Legendre rule in ``u``, which resolves every dyadic scale between
    the two limits.  Requires ``0 < r_min < r_max``.
    """
    if not (0.0 < r_min < r_max):
        raise ValueError("log_radial_rule needs 0 < r_min < r_max")
    panels = max(1, int(np.ceil(n_nodes / gl_order)))
    u_edges = np.linspace(0.0, 1.0, panels + 1)
    u, wu = composite_gauss(u_edges, gl_order)
    lam = np.log(r_max / r_min)
    rho = r_min * np.exp(lam * u)
    weights = wu * lam * rho
    return rho, weights


def uniform_panel_rule(a: float, b: float, n_panels: int, gl_order: int = 8):
    """Composite Gauss-Legendre rule with equal panels on [a, b]."""
    edges = np.linspace(a, b, n_panels + 1)
    return composite_gauss(edges, gl_order)


def disk_radial_rule(r_floor: float, r_outer: float, n_log: int = 32,
                     top_panels: int = 4, gl_order: int = 8):
    """Radial rule on [r_floor, r_outer] for disk integrands that combine an
    algebraic singularity at 0 with O(r_outer)-scale smooth structure.

    A logarithmically graded rule covers [r_floor, r_outer/8] (every dyadic
    scale of the singular field) and uniform Gauss panels cover the outer
    band where the smooth structure lives.
    """
    if not (0.0 < r_floor < r_outer):
        raise ValueError("disk_radial_rule needs 0 < r_floor < r_outer")
    r_break = r_outer / 8.0
    if r_break <= 2.0 * r_floor:
        return uniform_panel_rule(r_floor, r_outer, max(top_panels, 4), gl_order)
    r_log, w_log = log_radial_rule(r_floor, r_break, n_log)
    r_top, w_top = uniform_panel_rule(r_break, r_outer, top_panels, gl_order)
    return np.concatenate([r_log, r_top]), np.concatenate([w_log, w_top])
