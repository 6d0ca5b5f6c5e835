import numpy as np
import pytest

from filamentflow import (
    R_value,
    binormal_integral,
    binormal_integral_at_zero,
    expansion_terms,
    expansion_terms_at,
    frenet,
    minimal_budget_exponent,
    random_smooth_curve,
    remainder_order_fit,
)
from filamentflow.errors import FitFailure, NotOrthogonal, ValidationError
from filamentflow.expansion import exact_integrand_at

TWO_PI = 2.0 * np.pi


class TestRValue:
    def test_formula(self):
        assert abs(R_value(np.array([0.1, 0, 0]), 0.2, TWO_PI)
                   - np.sqrt(0.01 + TWO_PI**2 * 0.04)) < 1e-14

    def test_zero_offset(self):
        assert abs(R_value(0.0, -0.3, 2.0) - 0.6) < 1e-15

    def test_zero_sigma(self):
        assert abs(R_value(np.array([0.0, 0.25, 0.0]), 0.0, 5.0) - 0.25) < 1e-15


class TestExpansionTerms:
    def test_zero_offset_reduces_to_sigma_square_term(self, circle):
        sigma, alpha = 0.02, 0.25
        terms = expansion_terms_at(circle, 0.0, np.zeros(3), sigma, alpha)
        d1, d2 = circle.eval(0.0, 1), circle.eval(0.0, 2)
        r = R_value(0.0, sigma, np.linalg.norm(d1))
        expect = -0.5 * sigma**2 * np.cross(d1, d2) / r ** (3 - alpha)
        assert np.allclose(terms.main_order, expect, atol=1e-12)
        assert np.allclose(terms.correction, 0.0, atol=1e-15)

    def test_residual_within_budget(self, circle):
        fr = frenet(circle, 0.0)
        x = 0.05 * fr.normal
        terms = expansion_terms_at(circle, 0.0, x, 0.02, 0.25)
        exact = exact_integrand_at(circle, 0.0, x, 0.02, 0.25)
        resid = np.linalg.norm(exact - terms.main_order - terms.correction)
        assert resid <= terms.budget_total

    def test_uniform_constant_over_grid(self, circle, wavy_curve):
        for curve, tau, alpha in ((circle, 0.0, 0.25), (wavy_curve, 0.1, 0.45)):
            fr = frenet(curve, tau)
            worst = 0.0
            for xm in np.linspace(0.01, 0.1, 6):
                for sg in np.linspace(0.01, 0.1, 6):
                    x = xm * fr.normal
                    t = expansion_terms_at(curve, tau, x, sg, alpha)
                    ex = exact_integrand_at(curve, tau, x, sg, alpha)
                    ratio = (np.linalg.norm(ex - t.main_order - t.correction)
                             / t.budget_total)
                    worst = max(worst, ratio)
            assert worst <= 50.0

    def test_orientation_flip_changes_sigma_square_sign(self):
        d1 = np.array([0.0, TWO_PI, 0.0])
        d2 = np.array([-TWO_PI**2, 0.0, 0.0])
        d3 = np.array([0.0, -TWO_PI**3, 0.0])
        sigma = 0.05
        fwd = expansion_terms(np.zeros(3), sigma, 0.3, d1, d2, d3)
        rev = expansion_terms(np.zeros(3), sigma, 0.3, -d1, d2, -d3)
        assert np.allclose(fwd.main_order, -rev.main_order, atol=1e-13)

    def test_not_orthogonal(self, circle):
        with pytest.raises(NotOrthogonal):
            expansion_terms_at(circle, 0.0, np.array([0.0, 0.05, 0.0]), 0.01, 0.25)


class TestRemainderFit:
    SCALES = [0.04, 0.02, 0.01, 0.005, 0.0025]

    def test_circle_alpha_quarter(self, circle):
        fit = remainder_order_fit(circle, 0.0, 0.25, self.SCALES)
        assert abs(fit.slope - fit.expected) < 0.2
        assert fit.expected == pytest.approx(minimal_budget_exponent(0.25))

    def test_circle_alpha_large(self, circle):
        fit = remainder_order_fit(circle, 0.0, 0.45, self.SCALES)
        assert abs(fit.slope - fit.expected) < 0.2

    def test_random_curve(self):
        curve = random_smooth_curve(11, order=3)
        fit = remainder_order_fit(curve, 0.2, 0.45, self.SCALES)
        assert abs(fit.slope - fit.expected) < 0.2

    def test_straight_line_exact(self):
        d1 = np.array([0.0, TWO_PI, 0.0])
        x = np.array([0.03, 0.0, 0.0])
        sigma, alpha = 0.01, 0.3
        terms = expansion_terms(x, sigma, alpha, d1, np.zeros(3), np.zeros(3))
        gam = sigma * d1
        exact = np.cross(x - gam, d1) / np.linalg.norm(x - gam) ** (3 - alpha)
        assert np.linalg.norm(exact - terms.main_order - terms.correction) < 1e-14

    def test_fit_failure_on_bad_scales(self, circle):
        with pytest.raises(FitFailure):
            remainder_order_fit(circle, 0.0, 0.25, [0.01, 0.02, 0.04])


class TestBinormalIntegral:
    def test_closed_form_at_zero(self):
        for alpha in (0.05, 0.25, 0.45):
            for speed in (1.0, TWO_PI):
                val = binormal_integral(0.0, alpha, speed)
                expect = binormal_integral_at_zero(alpha, speed)
                assert abs(val - expect) < 1e-6 * expect

    def test_quarter_value(self):
        assert abs(binormal_integral(0.0, 0.25, 1.0)
                   - 2.0**0.75 / 0.25) < 1e-6 * 6.73

    def test_monotone_decreasing(self):
        vals = [binormal_integral(z, 0.25, 1.0) for z in np.linspace(0, 0.4, 9)]
        assert all(np.diff(vals) < 0)

    def test_domain(self):
        with pytest.raises(ValidationError):
            binormal_integral(0.0, 0.5, 1.0)
        with pytest.raises(ValidationError):
            binormal_integral(-0.1, 0.25, 1.0)

    def test_two_sided_band_small_offsets(self):
        # empirical band for alpha * I * speed**(2-alpha), frozen from the
        # z -> 0 regime where the closed form pins 2**(1-alpha)
        alphas = np.linspace(0.05, 0.45, 9)
        zs = np.linspace(0.0, 0.01, 20)
        for speed in (1.0, TWO_PI):
            vals = np.array([[a * binormal_integral(z, a, speed) * speed**(2 - a)
                              for z in zs] for a in alphas])
            assert vals.min() > 0.25
            assert vals.max() < 2.0

    def test_band_constants_wide_grid(self):
        # c_low (1 - z**alpha) <= alpha * I <= c_up with frozen constants
        c_low, c_up = 0.5, 2.0
        alphas = np.linspace(0.05, 0.45, 9)
        zs = np.linspace(0.0, 0.4, 20)
        for a in alphas:
            for z in zs:
                ai = a * binormal_integral(z, a, 1.0)
                assert ai <= c_up
                assert ai >= c_low * (1.0 - z**a)
