import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmcavity.crow import (
    CrowParams,
    critical_coupling,
    crow_lamb_shift,
    crow_self_energy,
    crow_spectrum,
    dispersion,
    lattice_from_phi,
    lattice_to_continuum,
    no_bound_mode_region,
    phi_from_lattice,
)
from nmcavity.errors import RegimeError
from nmcavity.numerics import integrate
from nmcavity.reservoir import bound_modes, lamb_shift, self_energy

from conftest import cut_limit


class TestParams:
    def test_normalized_roundtrip(self):
        p = CrowParams.normalized(0.36, 0.2, kappa=2.0)
        assert p.kappa0 == pytest.approx(1.2)
        assert p.omega_a == pytest.approx(0.8)
        assert p.r2 == pytest.approx(0.36) and p.detuning == pytest.approx(0.2)

    @pytest.mark.parametrize("kw", [dict(kappa=0.0), dict(kappa0=-1.0), dict(gamma_loss=-0.1),
                                    dict(d=0.0)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            CrowParams(**kw)


class TestDispersion:
    def test_band_edges(self):
        p = CrowParams(kappa=1.5, omega0=10.0, d=2.0)
        assert dispersion(p, 0.0) == pytest.approx(7.0)
        assert dispersion(p, math.pi / 2) == pytest.approx(13.0)
        assert dispersion(p, math.pi / 4) == pytest.approx(10.0)

    def test_density_matches_dispersion(self):
        # uniform k over the zone gives the band histogram 1/(pi sqrt(4 - w^2))
        p = CrowParams(kappa=1.0, kappa0=1.0)
        k = (np.arange(400000) + 0.5) / 400000 * 2 * math.pi - math.pi
        w = dispersion(p, k)
        hist, edges = np.histogram(w, bins=40, range=(-2, 2), density=True)
        mid = 0.5 * (edges[1:] + edges[:-1])
        assert np.allclose(hist[5:-5], 1 / (math.pi * np.sqrt(4 - mid[5:-5] ** 2)), rtol=2e-2)
        spec = crow_spectrum(p)
        assert integrate(spec.D, -2.0, 2.0, 1e-12).value == pytest.approx(2.0, abs=1e-10)


class TestSelfEnergy:
    def test_closed_vs_quadrature_first_sheet(self, rng):
        p = CrowParams(kappa=1.3, kappa0=0.7)
        spec = crow_spectrum(p)
        pts = rng.uniform(-4, 4, 100) + 1j * rng.uniform(-4, 4, 100)
        for s in pts:
            if abs(s.real) < 1e-3:
                continue
            exact = crow_self_energy(p, s)
            quad = self_energy(spec, s, method="quadrature")
            assert abs(exact - quad) < 1e-8

    def test_closed_vs_quadrature_second_sheet(self, rng):
        p = CrowParams(kappa=0.8, kappa0=0.5)
        spec = crow_spectrum(p)
        pts = -rng.uniform(1e-2, 3, 100) + 1j * rng.uniform(-3, 3, 100)
        for s in pts:
            exact = crow_self_energy(p, s, "second")
            quad = self_energy(spec, s, "second", method="quadrature")
            assert abs(exact - quad) < 1e-8

    def test_boundary_values_on_cut(self, rng):
        p = CrowParams(kappa=1.0, kappa0=0.9)
        spec = crow_spectrum(p)
        for w in rng.uniform(-1.9, 1.9, 12):
            for side in (1, -1):
                exact = crow_self_energy(p, -1j * w, side=side)
                assert abs(exact - cut_limit(spec, w, side)) < 1e-8
                expected = crow_lamb_shift(p, w) - side * 1j * math.pi * spec.D(w)
                assert abs(exact - expected) < 1e-12

    def test_sheets_match_across_cut(self):
        p = CrowParams(kappa=1.0, kappa0=0.6)
        for w in (-1.2, 0.4, 1.7):
            first_left = crow_self_energy(p, -1e-10 - 1j * w)
            second_right = crow_self_energy(p, 1e-10 - 1j * w, "second")
            assert abs(first_left - crow_self_energy(p, -1j * w, side=-1)) < 1e-8
            assert abs(second_right - crow_self_energy(p, -1j * w, side=-1)) < 1e-8

    def test_cut_requires_side(self):
        with pytest.raises(ValueError):
            crow_self_energy(CrowParams(), -0.5j)

    def test_second_sheet_no_zero_at_critical(self):
        # for kappa0 = kappa the denominator i s - Sigma_II(s) never vanishes
        p = CrowParams(kappa=1.0, kappa0=1.0)
        re = np.linspace(-3, -1e-3, 120)
        im = np.linspace(-3, 3, 121)
        vals = np.array([[1j * (x + 1j * y) - crow_self_energy(p, x + 1j * y, "second")
                          for x in re] for y in im])
        assert np.min(np.abs(vals)) > 1e-3


class TestLambShift:
    def test_piecewise_values(self):
        p = CrowParams(kappa=1.0, kappa0=1.0)
        assert crow_lamb_shift(p, 1.0) == pytest.approx(1.0)
        assert crow_lamb_shift(p, 3.0) == pytest.approx(3 - math.sqrt(5))
        assert crow_lamb_shift(p, -3.0) == pytest.approx(-3 + math.sqrt(5))

    def test_closed_vs_quadrature(self, rng):
        p = CrowParams(kappa=1.1, kappa0=0.8)
        spec = crow_spectrum(p)
        outside = rng.uniform(2.3, 6, 10) * rng.choice([-1.0, 1.0], 10)
        for w in np.concatenate([rng.uniform(-2.19, 2.19, 40), outside]):
            w = float(w)
            assert abs(crow_lamb_shift(p, w) - lamb_shift(spec, w, method="quadrature")) < 1e-6

    def test_vectorised(self):
        w = np.array([-3.0, 0.0, 3.0])
        assert crow_lamb_shift(CrowParams(kappa0=1.0), w).shape == (3,)


class TestRegions:
    @pytest.mark.parametrize("r2,x,inside", [(0.5, 0.4, True), (0.5, 0.6, False),
                                             (0.9, -0.1, True), (1.0, 0.0, True),
                                             (1.2, 0.0, False)])
    def test_membership(self, r2, x, inside):
        assert no_bound_mode_region(CrowParams.normalized(r2, x)) is inside

    def test_boundary_counts_inside(self):
        assert no_bound_mode_region(CrowParams.normalized(0.7, 0.3))

    def test_critical_coupling(self):
        assert critical_coupling(CrowParams.normalized(0.1, 0.36)) == pytest.approx(0.8)
        with pytest.raises(RegimeError):
            critical_coupling(CrowParams.normalized(0.1, 1.2))

    def test_region_matches_bound_mode_grid(self):
        # 20 x 20 grid: bound modes exist exactly outside the region
        mismatches = []
        for r2 in np.linspace(0.02, 1.6, 20):
            for x in np.linspace(-0.95, 0.95, 20):
                p = CrowParams.normalized(float(r2), float(x))
                if abs(abs(x) - (1 - r2)) < 1e-6:
                    continue
                has = bool(bound_modes(crow_spectrum(p), p.omega_a))
                if has == no_bound_mode_region(p):
                    mismatches.append((r2, x))
        assert mismatches == []


class TestLatticeMap:
    def test_roundtrip(self, rng):
        a = rng.normal(size=30) + 1j * rng.normal(size=30)
        back = lattice_from_phi(lambda q: phi_from_lattice(a, q), 30)
        assert np.max(np.abs(back - a)) < 1e-12

    def test_parseval(self, rng):
        kappa = 0.7
        a = rng.normal(size=15) + 1j * rng.normal(size=15)
        res = integrate(lambda w: np.abs(lattice_to_continuum(a, kappa, w)) ** 2,
                        -2 * kappa + 1e-15, 2 * kappa - 1e-15, 1e-11)
        # both halves of the symmetric lattice carry sum |a_n|^2
        assert res.value == pytest.approx(2 * np.sum(np.abs(a) ** 2), rel=1e-8)

    def test_single_site_formula(self):
        kappa, w = 1.0, 0.6
        q = math.acos(-w / 2)
        expected = -math.sqrt(2 / math.pi) * math.sin(q) * (1 - 0.09) ** -0.25
        assert lattice_to_continuum([1.0], kappa, w) == pytest.approx(expected)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            lattice_to_continuum([1.0, 0.5], 1.0, 0.1, a_neg=[1.0, 0.4])
        assert np.isfinite(lattice_to_continuum([1.0, 0.5], 1.0, 0.1, a_neg=[1.0, 0.5]))

    def test_rejects_out_of_band(self):
        with pytest.raises(ValueError):
            lattice_to_continuum([1.0], 1.0, 2.0)

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=12))
    @settings(max_examples=30, deadline=None)
    def test_roundtrip_property(self, coeffs):
        a = np.array(coeffs)
        back = lattice_from_phi(lambda q: phi_from_lattice(a, q), a.size)
        assert np.allclose(back, a, atol=1e-12)
