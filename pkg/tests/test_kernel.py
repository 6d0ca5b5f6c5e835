import numpy as np
import pytest

from filamentflow import (
    KernelParams,
    QuadratureSpec,
    circle_curve,
    classical_v,
    fit_fourier,
    kernel_integrand,
    nearest_parameter,
    v_alpha,
)
from filamentflow.curve import normal_frame
from filamentflow.errors import SingularPoint, TooCloseToCurve, ValidationError
from filamentflow.kernel import ARCLENGTH, CLASSICAL, PARAMETER

from conftest import rotation_matrix

FOUR_PI_SQ = 4.0 * np.pi**2
CENTER_VALUE = np.array([0.0, 0.0, -FOUR_PI_SQ])


class TestParams:
    def test_alpha_domain(self):
        with pytest.raises(ValidationError):
            KernelParams(alpha=0.7)
        with pytest.raises(ValidationError):
            KernelParams(alpha=0.0)
        KernelParams(alpha=0.7, mode=CLASSICAL)  # ignored in classical mode

    def test_quadrature_domain(self):
        with pytest.raises(ValidationError):
            QuadratureSpec(base_nodes=32)
        with pytest.raises(ValidationError):
            QuadratureSpec(graded_levels=-1)


class TestCircleCenter:
    @pytest.mark.parametrize("alpha", [0.05, 0.25, 0.45])
    def test_alpha_independent_closed_form(self, circle, alpha):
        v = v_alpha((0, 0, 0), circle, KernelParams(alpha=alpha),
                    QuadratureSpec(base_nodes=4096))
        assert np.linalg.norm(v - CENTER_VALUE) < 1e-6 * FOUR_PI_SQ

    def test_scaled_circle_center(self):
        alpha = 0.3
        for r in (0.5, 2.0):
            v = v_alpha((0, 0, 0), circle_curve(r), KernelParams(alpha=alpha),
                        QuadratureSpec(base_nodes=2048))
            expect = CENTER_VALUE * r**alpha
            assert np.linalg.norm(v - expect) < 1e-8 * np.linalg.norm(expect)

    def test_classical_center(self, circle):
        v = classical_v((0, 0, 0), circle, QuadratureSpec(base_nodes=2048))
        assert np.linalg.norm(v - np.array([0, 0, np.pi])) < 1e-8


class TestSymmetries:
    def test_scaling_law(self, ellipse):
        pars = KernelParams(alpha=0.3)
        quad = QuadratureSpec(base_nodes=512, graded_levels=8)
        x = np.array([0.3, 0.2, 0.4])
        v1 = v_alpha(x, ellipse, pars, quad)
        for lam in (0.5, 2.0, 10.0):
            v2 = v_alpha(lam * x, ellipse.scaled(lam), pars, quad)
            assert (np.linalg.norm(v2 - lam**0.3 * v1)
                    < 1e-8 * np.linalg.norm(v2))

    def test_rotation_equivariance(self, wavy_curve):
        pars = KernelParams(alpha=0.25)
        quad = QuadratureSpec(base_nodes=1024)
        x = np.array([0.2, -0.1, 0.6])
        q = rotation_matrix(17)
        v1 = v_alpha(x, wavy_curve, pars, quad)
        v2 = v_alpha(q @ x, wavy_curve.rotated(q), pars, quad)
        assert np.linalg.norm(v2 - q @ v1) < 1e-10 * np.linalg.norm(v1)

    def test_translation_equivariance(self, wavy_curve):
        pars = KernelParams(alpha=0.25)
        quad = QuadratureSpec(base_nodes=1024)
        x = np.array([0.2, -0.1, 0.6])
        shift = np.array([3.0, -2.0, 1.0])
        v1 = v_alpha(x, wavy_curve, pars, quad)
        v2 = v_alpha(x + shift, wavy_curve.translated(shift), pars, quad)
        assert np.linalg.norm(v2 - v1) < 1e-10 * np.linalg.norm(v1)

    def test_reparametrization_invariance_parameter_measure(self, circle):
        # same geometric circle, smoothly re-timed
        taus = np.arange(128) / 128
        warped = taus + 0.08 * np.sin(2 * np.pi * taus)
        curve2 = fit_fourier(circle.eval(warped, 0), 16)
        pars = KernelParams(alpha=0.25, circulation=PARAMETER)
        quad = QuadratureSpec(base_nodes=2048)
        x = np.array([0.0, 0.0, 0.4])
        v1 = v_alpha(x, circle, pars, quad)
        v2 = v_alpha(x, curve2, pars, quad)
        assert np.linalg.norm(v2 - v1) < 1e-8 * np.linalg.norm(v1)


class TestQuadratureBehavior:
    def test_node_doubling_far_field(self, ellipse):
        pars = KernelParams(alpha=0.25)
        x = np.array([0.0, 1.15, 0.0])  # about 0.15 off the curve
        v1 = v_alpha(x, ellipse, pars, QuadratureSpec(base_nodes=512))
        v2 = v_alpha(x, ellipse, pars, QuadratureSpec(base_nodes=1024))
        assert np.linalg.norm(v2 - v1) < 1e-8 * np.linalg.norm(v2)

    def test_graded_matches_uniform_far_field(self, ellipse):
        pars = KernelParams(alpha=0.25)
        x = np.array([0.0, 1.15, 0.0])
        v1 = v_alpha(x, ellipse, pars, QuadratureSpec(base_nodes=2048))
        v2 = v_alpha(x, ellipse, pars,
                     QuadratureSpec(base_nodes=512, graded_levels=6))
        assert np.linalg.norm(v2 - v1) < 1e-8 * np.linalg.norm(v2)

    def test_near_field_growth_exponent(self, circle):
        alpha = 0.25
        pars = KernelParams(alpha=alpha)
        frame = normal_frame(circle, 128)
        n1 = frame.n1(0.0)
        base = circle.eval(0.0, 0)
        dists = np.array([1e-2, 1e-3, 1e-4])
        mags = []
        for d in dists:
            quad = QuadratureSpec(base_nodes=256,
                                  graded_levels=int(np.ceil(np.log2(1.0 / d))) + 4)
            mags.append(np.linalg.norm(v_alpha(base + d * n1, circle, pars, quad)))
        slope = np.polyfit(np.log(dists), np.log(mags), 1)[0]
        assert abs(slope - (alpha - 1.0)) < 0.05

    def test_classical_log_divergence(self, circle):
        # approach along the binormal so the 1/d swirl stays orthogonal to it
        base = circle.eval(0.0, 0)
        fr_binormal = np.array([0.0, 0.0, 1.0])
        dists = np.array([1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
        vals = []
        for d in dists:
            quad = QuadratureSpec(base_nodes=256,
                                  graded_levels=int(np.ceil(np.log2(1.0 / d))) + 4)
            vals.append(np.dot(classical_v(base + d * fr_binormal, circle, quad),
                               fr_binormal))
        logs = np.log(1.0 / dists)
        slope, intercept = np.polyfit(logs, vals, 1)
        model = slope * logs + intercept
        r2 = 1 - np.sum((vals - model) ** 2) / np.sum((vals - np.mean(vals)) ** 2)
        assert r2 > 0.999

    def test_too_close_raises(self, circle):
        with pytest.raises(TooCloseToCurve):
            v_alpha(circle.eval(0.3, 0), circle, KernelParams(alpha=0.25))

    def test_axis_velocity_parallel(self, circle):
        v = classical_v((0.0, 0.0, 0.7), circle, QuadratureSpec(base_nodes=1024))
        assert np.linalg.norm(v[:2]) < 1e-10 * abs(v[2])


class TestIntegrand:
    def test_circle_center_sample(self, circle):
        val = kernel_integrand((0, 0, 0), 0.0, circle, KernelParams(alpha=0.25))
        assert np.allclose(val, CENTER_VALUE, atol=1e-10)

    def test_offset_sample_matches_formula(self, circle):
        frame = normal_frame(circle, 128)
        x = circle.eval(0.0, 0) + 0.1 * frame.n1(0.0)
        sigma = 0.4
        pars = KernelParams(alpha=0.25)
        val = kernel_integrand(x, sigma, circle, pars)
        g = circle.eval(sigma, 0)
        dg = circle.eval(sigma, 1)
        expect = (np.cross(x - g, dg) * np.linalg.norm(dg)
                  / np.linalg.norm(x - g) ** 2.75)
        assert np.allclose(val, expect, atol=1e-13)

    def test_planar_reflection(self, ellipse):
        # in-plane evaluation point: the sample is normal to the plane
        val = kernel_integrand((0.5, 0.1, 0.0), 0.3, ellipse,
                               KernelParams(alpha=0.3))
        assert abs(val[0]) < 1e-14 and abs(val[1]) < 1e-14

    def test_singular_point(self, circle):
        with pytest.raises(SingularPoint):
            kernel_integrand(circle.eval(0.2, 0), 0.2, circle,
                             KernelParams(alpha=0.25))


def test_nearest_parameter(circle):
    tau, dist = nearest_parameter(circle, np.array([0.0, 1.3, 0.0]))
    assert abs(tau - 0.25) < 1e-10
    assert abs(dist - 0.3) < 1e-12


def test_circle_center_against_midpoint_oracle(circle):
    # independent dense midpoint rule
    n = 200_000
    s = (np.arange(n) + 0.5) / n
    g = circle.eval(s, 0)
    dg = circle.eval(s, 1)
    diff = -g
    r = np.linalg.norm(diff, axis=1)
    integrand = (np.cross(diff, dg) * np.linalg.norm(dg, axis=1)[:, None]
                 / (r ** 2.75)[:, None])
    oracle = integrand.mean(axis=0)
    v = v_alpha((0, 0, 0), circle, KernelParams(alpha=0.25),
                QuadratureSpec(base_nodes=4096))
    assert np.linalg.norm(v - oracle) < 1e-8 * np.linalg.norm(oracle)
