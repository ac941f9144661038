import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import special

from nmcavity.crow import CrowParams, crow_spectrum
from nmcavity.errors import NumericalError, QuadratureError, RootFindingError
from nmcavity.numerics import (
    QuadratureResult,
    bessel_j,
    envelope_peaks,
    find_root_complex,
    fit_exponential_rate,
    fit_power_law,
    integrate,
    principal_value,
)


class TestIntegrate:
    def test_polynomial(self):
        res = integrate(lambda x: x, 0.0, 1.0, 1e-10)
        assert isinstance(res, QuadratureResult)
        assert res.value == pytest.approx(0.5, abs=1e-14)
        assert res.error_estimate >= 0 and res.evaluations >= 1

    def test_semicircle(self):
        res = integrate(lambda x: np.sqrt(1 - x * x), -1.0, 1.0, 1e-10)
        assert abs(res.value - math.pi / 2) < 1e-10

    def test_complex_exponential_antiderivative(self):
        a, b = 0.0, math.pi
        res = integrate(lambda x: np.exp(-1j * x), a, b, 1e-10)
        exact = 1j * (np.exp(-1j * b) - np.exp(-1j * a))
        assert abs(res.value - exact) < 1e-10
        assert abs(res.value + 2j) < 1e-10

    def test_endpoint_singularity(self):
        res = integrate(lambda x: x ** -0.5, 0.0, 1.0, 1e-10)
        assert abs(res.value - 2.0) < 1e-9

    def test_vector_valued(self):
        res = integrate(lambda x: np.stack([x, x * x], axis=-1), 0.0, 2.0, 1e-12)
        assert np.allclose(res.value, [2.0, 8.0 / 3.0], atol=1e-13)

    def test_matches_scipy_quad(self):
        f = lambda x: np.cos(5 * x) * np.exp(-x)  # noqa: E731
        ref, _ = sint.quad(f, 0, 3, epsabs=1e-13, epsrel=1e-13)
        assert abs(integrate(f, 0.0, 3.0, 1e-12).value - ref) < 1e-11

    def test_budget_exhaustion_reports_partial(self):
        with pytest.raises(QuadratureError) as exc:
            integrate(lambda x: np.sin(1 / x) / x, 1e-6, 1.0, 1e-14, limit=5)
        assert exc.value.value is not None

    def test_rejects_bad_interval(self):
        with pytest.raises(ValueError):
            integrate(lambda x: x, 1.0, 0.0)

    @given(st.floats(0.1, 5.0), st.integers(1, 4))
    @settings(max_examples=30, deadline=None)
    def test_odd_integrand_vanishes(self, half, power):
        res = integrate(lambda x: x ** (2 * power - 1) * np.exp(-x * x), -half, half, 1e-10)
        assert abs(res.value) <= 1e-10


class TestPrincipalValue:
    def test_constant_symmetric(self):
        assert abs(principal_value(lambda w: np.ones_like(w), -1.0, 1.0, 0.0, 1e-10)) < 1e-12

    def test_linear_antiderivative(self):
        a, b, x0 = -1.0, 1.0, 0.5
        exact = -(b - a) + x0 * math.log(abs((x0 - a) / (b - x0)))
        assert abs(principal_value(lambda w: w, a, b, x0, 1e-12) - exact) < 1e-12

    def test_crow_density_gives_closed_form_shift(self):
        spec = crow_spectrum(CrowParams(kappa=1.0, kappa0=1.0))
        val = principal_value(spec.D, -2.0, 2.0, 1.0, 1e-11)
        assert abs(val - 1.0) < 1e-8

    def test_matches_scipy_cauchy_weight(self):
        f = lambda w: np.exp(w)  # noqa: E731
        ref, _ = sint.quad(lambda w: np.exp(w), -1, 2, weight="cauchy", wvar=0.3, epsabs=1e-13)
        assert abs(principal_value(f, -1.0, 2.0, 0.3, 1e-12) + ref) < 1e-10

    def test_rejects_outside(self):
        with pytest.raises(ValueError):
            principal_value(lambda w: w, -1.0, 1.0, 2.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(NumericalError), np.errstate(divide="ignore"):
            principal_value(lambda w: 1 / (w - 0.2) ** 2, -1.0, 1.0, 0.2)

    @given(st.floats(0.05, 3.0), st.floats(-2.0, 2.0))
    @settings(max_examples=30, deadline=None)
    def test_constant_symmetric_property(self, half, x0):
        val = principal_value(lambda w: np.full_like(w, 2.5), x0 - half, x0 + half, x0, 1e-10)
        assert abs(val) < 1e-10


class TestBessel:
    def test_origin(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0

    def test_first_zero(self):
        assert abs(bessel_j(0, 2.404826)) < 1e-5
        # bisection on the series oracle lands on the same zero
        lo, hi = 2.0, 3.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if bessel_j(0, mid) > 0 else (lo, mid)
        assert abs(lo - 2.404825557695773) < 1e-12

    @pytest.mark.parametrize("n", [0, 1, 2, 5])
    def test_against_scipy(self, n):
        x = np.linspace(0.0, 100.0, 20001)
        assert np.max(np.abs(bessel_j(n, x) - special.jv(n, x))) < 1e-12

    def test_scalar_and_array(self):
        assert isinstance(bessel_j(1, 3.0), float)
        assert bessel_j(1, np.array([1.0, 2.0])).shape == (2,)

    def test_seam_continuity(self):
        for x in (8.0, 25.0):
            for n in (0, 1):
                assert abs(bessel_j(n, x - 1e-12) - bessel_j(n, x + 1e-12)) < 1e-12

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            bessel_j(0, -1.0)
        with pytest.raises(ValueError):
            bessel_j(-1, 1.0)

    def test_derivative_identity(self, rng):
        x = rng.uniform(0.1, 50.0, 50)
        h = 1e-5
        d0 = (bessel_j(0, x + h) - bessel_j(0, x - h)) / (2 * h)
        assert np.max(np.abs(d0 + bessel_j(1, x))) < 1e-6


class TestRoots:
    def test_quadratic(self):
        s = find_root_complex(lambda s: s * s + 4, 1.9j)
        assert abs(s - 2j) < 1e-10

    def test_resonant_critical_denominator(self):
        g = 2.2
        s = find_root_complex(lambda s: -g + np.sqrt(s * s + 4), 1.0)
        assert abs(s - math.sqrt(g * g - 4)) < 1e-10
        assert abs(s - 0.9165) < 1e-4

    def test_failure_carries_diagnostics(self):
        with pytest.raises(RootFindingError) as exc:
            find_root_complex(lambda s: s * s + 1 + 0 * s + 1e3 * (abs(s) < 1e9), 0.5)
        assert exc.value.last is not None and exc.value.residual > 0

    def test_deterministic(self):
        f = lambda s: np.exp(s) - 2 - 1j  # noqa: E731
        assert find_root_complex(f, 0.3) == find_root_complex(f, 0.3)

    @given(st.complex_numbers(max_magnitude=3.0), st.complex_numbers(max_magnitude=0.3))
    @settings(max_examples=40, deadline=None)
    def test_residual_postcondition(self, root, offset):
        F = lambda s: (s - root) * (1 + 0.1 * s)  # noqa: E731
        tol = 1e-11
        try:
            s = find_root_complex(F, root + offset, tol=tol)
        except RootFindingError:
            return
        assert abs(F(s)) <= tol


class TestFits:
    def test_exact_power_law(self):
        t = np.linspace(1, 10, 50)
        assert abs(fit_power_law(t, t ** -1.5) + 1.5) < 1e-10

    def test_j0_envelope(self):
        x = np.linspace(20, 200, 20001)
        tp, yp = envelope_peaks(x, np.abs(bessel_j(0, x)))
        assert abs(fit_power_law(tp, yp) + 0.5) < 0.05

    def test_j1_over_x_envelope(self):
        x = np.linspace(20, 200, 20001)
        tp, yp = envelope_peaks(x, np.abs(2 * bessel_j(1, x) / x))
        assert abs(fit_power_law(tp, yp) + 1.5) < 0.05

    def test_rejects_nonpositive(self):
        t = np.arange(1.0, 12.0)
        y = np.ones_like(t)
        y[3] = 0.0
        with pytest.raises(NumericalError):
            fit_power_law(t, y)

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            fit_power_law(np.arange(1.0, 5.0), np.ones(4))

    def test_peak_refinement(self):
        t = np.linspace(0, 10, 101)
        tp, yp = envelope_peaks(t, np.cos(t - 0.123))
        assert abs(tp[0] - 0.123) < 2e-3 or abs(tp[0] - (0.123 + 2 * math.pi)) < 2e-3
        assert np.all(yp <= 1 + 1e-4)

    def test_exponential_rate(self):
        t = np.linspace(0, 5, 40)
        assert abs(fit_exponential_rate(t, 3 * np.exp(-0.7 * t)) + 0.7) < 1e-12
