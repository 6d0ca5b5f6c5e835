"""Closed curves as truncated trigonometric series.

A curve is gamma(tau) = a0 + sum_k [a_k cos(2 pi k tau) + b_k sin(2 pi k tau)]
with 3-vector coefficients and tau on the unit torus.  The representation
gives exact derivatives up to any order, which the kernel expansion machinery
needs through order three (plus one more for error control).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCurvature,
    InsufficientNodes,
    NonSimpleCurve,
    ValidationError,
)

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class CurveSpec:
    """Truncated trigonometric series for a closed curve in R^3.

    cos_coeffs has shape (K+1, 3) (index 0 is the constant term) and
    sin_coeffs has shape (K, 3).
    """

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        cos = np.atleast_2d(np.asarray(self.cos_coeffs, dtype=float))
        sin = np.atleast_2d(np.asarray(self.sin_coeffs, dtype=float))
        if sin.size == 0:
            sin = np.zeros((0, 3))
        if cos.shape[1] != 3 or (sin.size and sin.shape[1] != 3):
            raise ValidationError("curve coefficients must be 3-vectors")
        if cos.shape[0] != sin.shape[0] + 1:
            raise ValidationError(
                "need K+1 cosine and K sine coefficient rows, got "
                f"{cos.shape[0]} and {sin.shape[0]}")
        cos.setflags(write=False)
        sin.setflags(write=False)
        object.__setattr__(self, "cos_coeffs", cos)
        object.__setattr__(self, "sin_coeffs", sin)

    @property
    def order(self) -> int:
        return self.sin_coeffs.shape[0]

    def eval(self, tau, order: int = 0) -> np.ndarray:
        """Evaluate the curve or one of its derivatives (order 0..4).

        Differentiation is term-wise and exact: each harmonic k picks up a
        factor (2 pi k)**order and a quarter-period phase shift.
        """
        if not 0 <= order <= 4:
            raise ValidationError("derivative order must be in 0..4")
        tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
        k = np.arange(1, self.order + 1)
        ang = _TWO_PI * np.outer(tau_arr, k)
        c, s = np.cos(ang), np.sin(ang)
        # one derivative maps coefficient pair (a, b) -> 2 pi k (b, -a)
        a = self.cos_coeffs[1:].copy()
        b = self.sin_coeffs.copy()
        for _ in range(order):
            a, b = (_TWO_PI * k)[:, None] * b, -(_TWO_PI * k)[:, None] * a
        out = c @ a + s @ b
        if order == 0:
            out = out + self.cos_coeffs[0]
        if np.isscalar(tau) or np.asarray(tau).ndim == 0:
            return out[0]
        return out

    def translated(self, offset) -> "CurveSpec":
        cos = self.cos_coeffs.copy()
        cos[0] = cos[0] + np.asarray(offset, dtype=float)
        return CurveSpec(cos, self.sin_coeffs)

    def scaled(self, factor: float) -> "CurveSpec":
        return CurveSpec(self.cos_coeffs * factor, self.sin_coeffs * factor)

    def rotated(self, matrix) -> "CurveSpec":
        q = np.asarray(matrix, dtype=float)
        return CurveSpec(self.cos_coeffs @ q.T, self.sin_coeffs @ q.T)


@dataclass(frozen=True)
class FrenetData:
    position: np.ndarray
    speed: float
    tangent: np.ndarray
    normal: np.ndarray
    binormal: np.ndarray
    curvature: float
    torsion: float


def frenet(curve: CurveSpec, tau: float, tol: float = 1e-10) -> FrenetData:
    """Frenet data at one parameter value.

    Raises DegenerateCurvature where |gamma' x gamma''| < tol * |gamma'|**3,
    i.e. where the binormal is undefined.
    """
    pos = curve.eval(tau, 0)
    d1 = curve.eval(tau, 1)
    d2 = curve.eval(tau, 2)
    d3 = curve.eval(tau, 3)
    speed = float(np.linalg.norm(d1))
    if speed == 0.0:
        raise DegenerateCurvature(f"vanishing tangent at tau={tau}")
    cross = np.cross(d1, d2)
    ncross = float(np.linalg.norm(cross))
    if ncross < tol * speed**3:
        raise DegenerateCurvature(f"curvature below tolerance at tau={tau}")
    tangent = d1 / speed
    binormal = cross / ncross
    normal = np.cross(binormal, tangent)
    curvature = ncross / speed**3
    torsion = float(np.dot(cross, d3)) / ncross**2
    return FrenetData(pos, speed, tangent, normal, binormal, curvature, torsion)


class FrameField:
    """Smooth periodic orthonormal frame spanning the normal planes.

    Built by double-reflection marching with the closure holonomy spread
    linearly over the parameter, then resampled as trigonometric series so
    that the frame and its derivative can be evaluated anywhere.
    """

    def __init__(self, curve: CurveSpec, taus, n1_samples, n2_samples):
        self.curve = curve
        self.taus = taus
        self.n1_samples = n1_samples
        self.n2_samples = n2_samples
        k_fit = (len(taus) - 1) // 2
        self._n1_series = fit_fourier(n1_samples, k_fit)
        self._n2_series = fit_fourier(n2_samples, k_fit)

    def n1(self, tau, order: int = 0) -> np.ndarray:
        return self._n1_series.eval(tau, order)

    def n2(self, tau, order: int = 0) -> np.ndarray:
        return self._n2_series.eval(tau, order)

    def rotated(self, angle: float) -> "FrameField":
        """Same frame turned by a constant angle in every normal plane."""
        c, s = np.cos(angle), np.sin(angle)
        return FrameField(self.curve, self.taus,
                          c * self.n1_samples + s * self.n2_samples,
                          -s * self.n1_samples + c * self.n2_samples)


def normal_frame(curve: CurveSpec, k: int = 512) -> FrameField:
    """Rotation-minimizing frame on k uniform nodes, periodically closed.

    The double-reflection transport keeps the frame orthonormal exactly; the
    angle by which the transported frame misses its start after one loop is
    distributed linearly in tau so the result is continuous and periodic.
    The triad (n1, n2, T) is right handed: n1 x n2 = T.
    """
    if k < 64:
        raise ValidationError("normal_frame needs at least 64 samples")
    taus = np.arange(k) / k
    pts = curve.eval(taus, 0)
    d1 = curve.eval(taus, 1)
    speeds = np.linalg.norm(d1, axis=1)
    if speeds.min() <= 0:
        raise DegenerateCurvature("vanishing tangent on frame grid")
    tang = d1 / speeds[:, None]

    u0 = _seed_normal(curve, tang[0])
    u = np.empty((k + 1, 3))
    u[0] = u0
    # double-reflection marching, wrapping back to node 0 at the end
    for i in range(k):
        j = (i + 1) % k
        u[i + 1] = _double_reflection(pts[i], tang[i], u[i], pts[j], tang[j])
    v0 = np.cross(tang[0], u0)
    holonomy = float(np.arctan2(np.dot(u[k], v0), np.dot(u[k], u0)))
    phase = holonomy * taus
    v = np.cross(tang, u[:k])
    n1 = np.cos(phase)[:, None] * u[:k] - np.sin(phase)[:, None] * v
    n2 = np.cross(tang, n1)
    return FrameField(curve, taus, n1, n2)


def _seed_normal(curve: CurveSpec, t0) -> np.ndarray:
    try:
        return frenet(curve, 0.0).normal
    except DegenerateCurvature:
        trial = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(trial, t0)) > 0.9:
            trial = np.array([1.0, 0.0, 0.0])
        n = trial - np.dot(trial, t0) * t0
        return n / np.linalg.norm(n)


def _double_reflection(x0, t0, u0, x1, t1):
    v1 = x1 - x0
    c1 = np.dot(v1, v1)
    if c1 == 0.0:
        return u0.copy()
    ul = u0 - (2.0 / c1) * np.dot(v1, u0) * v1
    tl = t0 - (2.0 / c1) * np.dot(v1, t0) * v1
    v2 = t1 - tl
    c2 = np.dot(v2, v2)
    if c2 == 0.0:
        return ul
    return ul - (2.0 / c2) * np.dot(v2, ul) * v2


def fit_fourier(nodes, k: int) -> CurveSpec:
    """Least-squares trigonometric fit of uniformly spaced 3-vector samples.

    With count == 2k+1 this is exact interpolation; with more nodes it is the
    uniform-grid least-squares projection (the truncated DFT).
    """
    pts = np.asarray(nodes, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError("fit_fourier expects an (n, 3) array")
    n = pts.shape[0]
    if n < 2 * k + 1:
        raise InsufficientNodes(f"need >= {2 * k + 1} nodes for order {k}, got {n}")
    spec = np.fft.rfft(pts, axis=0)
    cos = np.zeros((k + 1, 3))
    sin = np.zeros((k, 3))
    cos[0] = spec[0].real / n
    cos[1:] = 2.0 * spec[1:k + 1].real / n
    sin[:] = -2.0 * spec[1:k + 1].imag / n
    return CurveSpec(cos, sin)


def curve_length(curve: CurveSpec, n: int = 4096) -> float:
    taus = np.arange(n) / n
    return float(np.linalg.norm(curve.eval(taus, 1), axis=1).mean())


def curve_diameter(curve: CurveSpec, n: int = 512) -> float:
    pts = curve.eval(np.arange(n) / n, 0)
    diffs = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diffs**2).sum(-1)).max())


def speed_range(curve: CurveSpec, n: int = 2048):
    sp = np.linalg.norm(curve.eval(np.arange(n) / n, 1), axis=1)
    return float(sp.min()), float(sp.max())


def validate_curve(curve: CurveSpec, grid: int = 2048,
                   simplicity_tol: float = 1e-3):
    """Check the closed-curve invariants on a dense grid.

    Verifies a non-vanishing tangent and that the chord/parameter-gap ratio
    over non-adjacent node pairs stays above simplicity_tol times the curve
    length.  Returns the measured metrics.
    """
    grid = max(grid, 1024)
    taus = np.arange(grid) / grid
    sp = np.linalg.norm(curve.eval(taus, 1), axis=1)
    if sp.min() <= 0.0:
        raise ValidationError("tangent vanishes on the validation grid")
    pts = curve.eval(taus, 0)
    nrm2 = np.einsum("ij,ij->i", pts, pts)
    min_ratio = np.inf
    for i0 in range(0, grid, 1024):
        sl = slice(i0, min(i0 + 1024, grid))
        dist2 = nrm2[sl][:, None] + nrm2[None, :] - 2.0 * (pts[sl] @ pts.T)
        chord = np.sqrt(np.maximum(dist2, 0.0))
        idx = np.arange(i0, i0 + chord.shape[0])
        gap_idx = np.abs(idx[:, None] - np.arange(grid)[None, :])
        gap_idx = np.minimum(gap_idx, grid - gap_idx)
        gap = gap_idx / grid
        ratio = np.where(gap_idx > 1, chord / np.maximum(gap, 1e-300), np.inf)
        min_ratio = min(min_ratio, float(ratio.min()))
    length = float(sp.mean())
    if min_ratio < simplicity_tol * length:
        raise NonSimpleCurve(
            f"chord/gap ratio {min_ratio:.3e} below {simplicity_tol:.1e} x length")
    return {"min_speed": float(sp.min()), "max_speed": float(sp.max()),
            "min_chord_gap_ratio": min_ratio, "length": length}


def security_radius(curve: CurveSpec, grid: int = 8192) -> float:
    """Certified-from-below tubular radius (reach) estimate.

    Combines the curvature bound 1/max(kappa) with half the smallest
    doubly-critical self-distance found on the grid: pairs whose chord is
    orthogonal (within tolerance) to the tangent at both ends.  Raises
    NonSimpleCurve when the simplicity metric fails.
    """
    validate_curve(curve, grid=min(grid, 2048))
    taus = np.arange(grid) / grid
    pts = curve.eval(taus, 0)
    d1 = curve.eval(taus, 1)
    d2 = curve.eval(taus, 2)
    sp = np.linalg.norm(d1, axis=1)
    tang = d1 / sp[:, None]
    kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / sp**3
    kappa_bound = 1.0 / kappa.max() if kappa.max() > 0 else np.inf

    dc_tol = 0.02
    best = np.inf
    while not np.isfinite(best) and dc_tol <= 0.5:
        best = _min_doubly_critical(pts, tang, dc_tol)
        dc_tol *= 4.0
    return float(min(kappa_bound, 0.5 * best))


def _min_doubly_critical(pts, tang, dc_tol):
    # chord (p_i - p_j) dotted with both tangents, assembled from BLAS
    # matrix products; filtering runs in float32 on squared quantities and
    # the surviving distances are recomputed in float64
    n = pts.shape[0]
    pts32 = pts.astype(np.float32)
    tang32 = tang.astype(np.float32)
    nrm2 = np.einsum("ij,ij->i", pts32, pts32)
    pt_dot_t = np.einsum("ij,ij->i", pts32, tang32)
    tol2 = np.float32(dc_tol**2)
    best = np.inf
    block = 2048
    for i0 in range(0, n, block):
        sl = slice(i0, min(i0 + block, n))
        dist2 = nrm2[sl][:, None] + nrm2[None, :] - 2.0 * (pts32[sl] @ pts32.T)
        np.maximum(dist2, np.float32(0.0), out=dist2)
        ci = pt_dot_t[sl][:, None] - tang32[sl] @ pts32.T
        cj = pts32[sl] @ tang32.T - pt_dot_t[None, :]
        crit = (ci * ci < tol2 * dist2) & (cj * cj < tol2 * dist2)
        rows = np.arange(dist2.shape[0])
        for off in (-1, 0, 1):  # mask self and immediate neighbours
            crit[rows, (i0 + rows + off) % n] = False
        if crit.any():
            d2 = float(dist2[crit].min())
            best = min(best, np.sqrt(d2))
    return best


def with_constant_speed(curve: CurveSpec, k: int | None = None,
                        nodes: int = 4096) -> CurveSpec:
    """Refit the curve with a near-constant-speed parametrization.

    Arc length is accumulated on a dense grid, inverted, and the curve is
    resampled at uniform arc-length fractions before refitting.
    """
    dense = 16 * nodes
    taus = np.arange(dense + 1) / dense
    sp = np.linalg.norm(curve.eval(taus, 1), axis=1)
    s_cum = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) / dense)])
    total = s_cum[-1]
    targets = np.arange(nodes) / nodes * total
    tau_of_s = np.interp(targets, s_cum, taus)
    resampled = curve.eval(tau_of_s, 0)
    if k is None:
        k = max(16, 2 * curve.order)
    k = min(k, (nodes - 1) // 2)
    return fit_fourier(resampled, k)


class CurveTable:
    """Dense samples of gamma and gamma' with cubic interpolation.

    Used by the brute-force mollification oracle, where millions of curve
    evaluations at scattered parameters would otherwise dominate the cost.
    Interpolation error is O(n**-4) and far below the oracle tolerances.
    """

    def __init__(self, curve: CurveSpec, n: int = 32768):
        self.n = n
        taus = np.arange(n) / n
        self.gamma = curve.eval(taus, 0)
        self.dgamma = curve.eval(taus, 1)

    def eval_batch(self, tau):
        t = np.asarray(tau, dtype=float) * self.n
        j = np.floor(t).astype(np.int64)
        f = t - j
        w_m1 = -f * (f - 1.0) * (f - 2.0) / 6.0
        w_0 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
        w_1 = -(f + 1.0) * f * (f - 2.0) / 2.0
        w_2 = (f + 1.0) * f * (f - 1.0) / 6.0
        idx = [(j - 1) % self.n, j % self.n, (j + 1) % self.n, (j + 2) % self.n]
        ws = [w_m1, w_0, w_1, w_2]
        g = np.zeros(t.shape + (3,))
        dg = np.zeros_like(g)
        for ii, ww in zip(idx, ws):
            g += ww[..., None] * self.gamma[ii]
            dg += ww[..., None] * self.dgamma[ii]
        return g, dg


def circle_curve(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> CurveSpec:
    cos = np.array([center, [radius, 0.0, 0.0]])
    sin = np.array([[0.0, radius, 0.0]])
    return CurveSpec(cos, sin)


def ellipse_curve(a: float = 2.0, b: float = 1.0) -> CurveSpec:
    cos = np.array([[0.0, 0.0, 0.0], [a, 0.0, 0.0]])
    sin = np.array([[0.0, b, 0.0]])
    return CurveSpec(cos, sin)


def random_smooth_curve(seed: int, order: int = 4, amplitude: float = 0.25,
                        constant_speed: bool = True) -> CurveSpec:
    """Perturbed circle with geometrically decaying random harmonics."""
    rng = np.random.default_rng(seed)
    cos = np.zeros((order + 1, 3))
    sin = np.zeros((order, 3))
    cos[1] = [1.0, 0.0, 0.0]
    sin[0] = [0.0, 1.0, 0.0]
    for k in range(2, order + 1):
        decay = amplitude * 0.5 ** (k - 2) / k
        cos[k] = rng.standard_normal(3) * decay
        sin[k - 1] += rng.standard_normal(3) * decay
    curve = CurveSpec(cos, sin)
    if constant_speed:
        curve = with_constant_speed(curve, k=max(12, 3 * order))
    validate_curve(curve)
    return curve


def save_curve(curve: CurveSpec, path) -> None:
    payload = {
        "K": curve.order,
        "cos": curve.cos_coeffs.tolist(),
        "sin": curve.sin_coeffs.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_curve(path) -> CurveSpec:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        k = int(payload["K"])
        cos = np.asarray(payload["cos"], dtype=float)
        sin = np.asarray(payload["sin"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed curve file {path}: {exc}") from None
    if cos.shape != (k + 1, 3) or (k > 0 and sin.shape != (k, 3)):
        raise ValidationError(
            f"curve file {path}: expected {k + 1} cos and {k} sin rows")
    return CurveSpec(cos, sin if sin.size else np.zeros((0, 3)))
