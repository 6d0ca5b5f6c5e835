import json

import numpy as np
import pytest

from filamentflow import (
    CurveSpec,
    circle_curve,
    ellipse_curve,
    fit_fourier,
    frenet,
    load_curve,
    normal_frame,
    random_smooth_curve,
    save_curve,
    security_radius,
    with_constant_speed,
)
from filamentflow.curve import curve_length, speed_range, validate_curve
from filamentflow.errors import (
    DegenerateCurvature,
    InsufficientNodes,
    NonSimpleCurve,
    ValidationError,
)

TWO_PI = 2.0 * np.pi


class TestEval:
    def test_circle_position(self, circle):
        assert np.allclose(circle.eval(0.0, 0), [1.0, 0.0, 0.0], atol=1e-15)

    def test_circle_first_derivative(self, circle):
        assert np.allclose(circle.eval(0.0, 1), [0.0, TWO_PI, 0.0], atol=1e-13)

    def test_circle_second_derivative_quarter(self, circle):
        assert np.allclose(circle.eval(0.25, 2), [0.0, -TWO_PI**2, 0.0], atol=1e-12)

    def test_vectorized_matches_scalar(self, wavy_curve):
        taus = np.linspace(0.0, 1.0, 17, endpoint=False)
        batch = wavy_curve.eval(taus, 1)
        for t, row in zip(taus, batch):
            assert np.allclose(row, wavy_curve.eval(float(t), 1), atol=1e-14)

    def test_order_bound(self, circle):
        with pytest.raises(ValidationError):
            circle.eval(0.0, 5)

    def test_finite_difference_order(self, wavy_curve):
        # central differences of order-0 should approach order-1 at rate 2
        tau = 0.37
        exact = wavy_curve.eval(tau, 1)
        hs = np.array([1e-3, 5e-4, 2.5e-4])
        errs = []
        for h in hs:
            fd = (wavy_curve.eval(tau + h, 0) - wavy_curve.eval(tau - h, 0)) / (2 * h)
            errs.append(np.linalg.norm(fd - exact))
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert abs(slope - 2.0) < 0.1


class TestFrenet:
    def test_circle(self, circle):
        fr = frenet(circle, 0.0)
        assert abs(fr.curvature - 1.0) < 1e-12
        assert np.allclose(fr.tangent, [0, 1, 0], atol=1e-14)
        assert np.allclose(fr.binormal, [0, 0, 1], atol=1e-14)
        assert abs(fr.torsion) < 1e-12

    def test_radius_scaling(self):
        for r in (0.5, 2.0, 10.0):
            fr = frenet(circle_curve(r), 0.2)
            assert abs(fr.curvature - 1.0 / r) < 1e-12 / r
            assert np.allclose(fr.binormal, [0, 0, 1], atol=1e-12)

    def test_degenerate_raises(self):
        flat = CurveSpec(np.array([[0.0, 0, 0], [1.0, 0, 0]]), np.zeros((1, 3)))
        with pytest.raises(DegenerateCurvature):
            frenet(flat, 0.1)

    @pytest.mark.parametrize("seed", [3, 5, 7, 11, 13])
    def test_orthonormal_frame_random_curves(self, seed):
        curve = random_smooth_curve(seed, order=3)
        rng = np.random.default_rng(seed + 100)
        for tau in rng.uniform(0, 1, 1024):
            fr = frenet(curve, float(tau))
            triad = np.stack([fr.tangent, fr.normal, fr.binormal])
            assert np.allclose(triad @ triad.T, np.eye(3), atol=1e-12)
            assert np.allclose(np.cross(fr.tangent, fr.normal), fr.binormal,
                               atol=1e-12)


class TestNormalFrame:
    def test_circle_inward_radial(self, circle):
        ff = normal_frame(circle, 128)
        assert np.allclose(ff.n1(0.0), [-1.0, 0.0, 0.0], atol=1e-10)

    def test_sample_invariants(self, wavy_curve):
        ff = normal_frame(wavy_curve, 256)
        d1 = wavy_curve.eval(ff.taus, 1)
        tang = d1 / np.linalg.norm(d1, axis=1)[:, None]
        assert np.max(np.abs(np.einsum("ij,ij->i", ff.n1_samples, tang))) < 1e-10
        assert np.max(np.abs(np.einsum("ij,ij->i", ff.n2_samples, tang))) < 1e-10
        assert np.max(np.abs(np.einsum("ij,ij->i", ff.n1_samples, ff.n2_samples))) < 1e-10
        assert np.max(np.abs(np.linalg.norm(ff.n1_samples, axis=1) - 1)) < 1e-10

    def test_refinement_oracle_and_periodicity(self):
        # non-planar third-harmonic wobble; coarse marching against a 8x
        # finer marching of the same construction
        cos = np.array([[0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 0, 0.3]])
        sin = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
        curve = CurveSpec(cos, sin)
        coarse = normal_frame(curve, 512)
        fine = normal_frame(curve, 4096)
        diff = coarse.n1_samples - fine.n1_samples[::8]
        assert np.max(np.linalg.norm(diff, axis=1)) < 1e-8
        # spectral resampling reproduces the samples: the corrected frame is
        # smooth and closes periodically
        recon = np.stack([coarse.n1(float(t)) for t in coarse.taus])
        assert np.max(np.linalg.norm(recon - coarse.n1_samples, axis=1)) < 1e-8

    def test_rotated_frame_still_orthonormal(self, ellipse):
        ff = normal_frame(ellipse, 128).rotated(0.7)
        d1 = ellipse.eval(ff.taus, 1)
        tang = d1 / np.linalg.norm(d1, axis=1)[:, None]
        assert np.max(np.abs(np.einsum("ij,ij->i", ff.n1_samples, tang))) < 1e-10
        assert np.max(np.abs(np.einsum("ij,ij->i", ff.n1_samples, ff.n2_samples))) < 1e-10

    def test_minimum_samples(self, circle):
        with pytest.raises(ValidationError):
            normal_frame(circle, 32)


class TestSecurityRadius:
    def test_circle(self, circle):
        assert abs(security_radius(circle) - 1.0) < 1e-3

    def test_circle_radius_two(self):
        assert abs(security_radius(circle_curve(2.0)) - 2.0) < 2e-3

    def test_ellipse_against_brute_force(self, ellipse_raw):
        value = security_radius(ellipse_raw, grid=8192)
        # independent brute force: curvature bound plus doubly-critical pairs
        n = 8192
        taus = np.arange(n) / n
        pts = ellipse_raw.eval(taus, 0)
        d1 = ellipse_raw.eval(taus, 1)
        d2 = ellipse_raw.eval(taus, 2)
        sp = np.linalg.norm(d1, axis=1)
        kappa_max = (np.linalg.norm(np.cross(d1, d2), axis=1) / sp**3).max()
        best = np.inf
        tang = d1 / sp[:, None]
        for i in range(0, n, 16):  # decimated rows keep the scan affordable
            chord = pts[i] - pts
            dist = np.linalg.norm(chord, axis=1)
            ortho_i = np.abs(chord @ tang[i])
            ortho_j = np.abs(np.einsum("ij,ij->i", chord, tang))
            ok = (dist > 1e-12) & (ortho_i < 0.02 * dist) & (ortho_j < 0.02 * dist)
            if ok.any():
                best = min(best, dist[ok].min())
        expected = min(1.0 / kappa_max, 0.5 * best)
        assert abs(value - expected) < 1e-3

    def test_scale_equivariance(self, wavy_curve):
        base = security_radius(wavy_curve)
        scaled = security_radius(wavy_curve.scaled(3.0))
        assert abs(scaled - 3.0 * base) < 1e-6 * 3.0 * base

    def test_non_simple_raises(self):
        # figure-eight passes through the origin twice
        cos = np.zeros((3, 3))
        sin = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(NonSimpleCurve):
            security_radius(CurveSpec(cos, sin))


class TestFitFourier:
    def test_circle_recovery(self, circle):
        taus = np.arange(64) / 64
        fit = fit_fourier(circle.eval(taus, 0), 1)
        assert np.abs(fit.cos_coeffs - circle.cos_coeffs).max() < 1e-12
        assert np.abs(fit.sin_coeffs - circle.sin_coeffs).max() < 1e-12

    def test_nyquist_exact(self):
        curve = random_smooth_curve(5, order=3, constant_speed=False)
        taus = np.arange(7) / 7
        fit = fit_fourier(curve.eval(taus, 0), 3)
        check = np.linspace(0, 1, 33, endpoint=False)
        assert np.abs(fit.eval(check, 0) - curve.eval(check, 0)).max() < 1e-10

    def test_noisy_least_squares(self):
        curve = random_smooth_curve(9, order=4, constant_speed=False)
        taus = np.arange(256) / 256
        rng = np.random.default_rng(42)
        noisy = curve.eval(taus, 0) + rng.standard_normal((256, 3)) * 1e-6
        fit = fit_fourier(noisy, 8)
        resid = np.abs(fit.eval(taus, 0) - curve.eval(taus, 0)).max()
        assert resid <= 1e-5

    def test_insufficient_nodes(self):
        with pytest.raises(InsufficientNodes):
            fit_fourier(np.zeros((6, 3)), 3)


class TestConstantSpeed:
    def test_ellipse_speed_flattens(self, ellipse_raw):
        refit = with_constant_speed(ellipse_raw, k=16)
        lo, hi = speed_range(refit)
        raw_lo, raw_hi = speed_range(ellipse_raw)
        assert (hi - lo) / lo < 0.01
        assert (raw_hi - raw_lo) / raw_lo > 0.5
        assert abs(curve_length(refit) - curve_length(ellipse_raw)) < 1e-3


class TestCurveIO:
    def test_round_trip(self, tmp_path, wavy_curve):
        path = tmp_path / "curve.json"
        save_curve(wavy_curve, path)
        back = load_curve(path)
        assert np.allclose(back.cos_coeffs, wavy_curve.cos_coeffs, atol=1e-15)
        assert np.allclose(back.sin_coeffs, wavy_curve.sin_coeffs, atol=1e-15)

    def test_schema(self, tmp_path, circle):
        path = tmp_path / "circle.json"
        save_curve(circle, path)
        payload = json.loads(path.read_text())
        assert payload["K"] == 1
        assert len(payload["cos"]) == 2 and len(payload["sin"]) == 1

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"K": 2, "cos": [[0,0,0]], "sin": []}')
        with pytest.raises(ValidationError):
            load_curve(path)


def test_validate_curve_metrics(circle):
    metrics = validate_curve(circle)
    assert abs(metrics["length"] - TWO_PI) < 1e-10
    assert metrics["min_speed"] > 6.0
