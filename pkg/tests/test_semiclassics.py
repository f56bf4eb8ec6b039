import math

import numpy as np
import pytest

from phi4well.potential import NumericFailure, Potential, QuadratureRule, quartic_potential
from phi4well.semiclassics import (
    constants_for,
    critical_length,
    gaussian_approximants,
    harmonic_level,
    predicted_gap,
    semiclassical_report,
    tunneling_prefactor,
)
from phi4well.spectral import Grid

from conftest import model_for


class TestHarmonicLevels:
    def test_arithmetic_progression(self, quartic):
        assert harmonic_level(quartic, 0) == pytest.approx(1.0)
        assert harmonic_level(quartic, 2) == pytest.approx(5.0)

    def test_rejects_negative_index(self, quartic):
        with pytest.raises(ValueError):
            harmonic_level(quartic, -1)

    def test_ground_energy_anharmonic_shift(self):
        # The measured E_0 sits within the O(1/beta) window of the frozen-well level.
        m = model_for(12.0)
        assert abs(m.energies[0] - 1.0) <= 2.0 / 12.0


class TestTunnelingPrefactor:
    def test_quartic_closed_form(self, quartic):
        assert tunneling_prefactor(quartic) == pytest.approx(
            8.0 * math.sqrt(2.0 / math.pi), abs=1e-9
        )

    def test_integrand_regular_limit(self, quartic):
        # For the quartic the combination collapses to 2/(1 + x) -> 1 at the well.
        from phi4well.semiclassics import _prefactor_integrand

        f = _prefactor_integrand(quartic)
        for eps in (1e-2, 1e-3, 1e-4):
            assert f(1.0 - eps) == pytest.approx(2.0 / (2.0 - eps), abs=1e-4)

    def test_quadrature_refinement_invariance(self, quartic):
        a = tunneling_prefactor(quartic, QuadratureRule(order=8, tol=1e-10))
        b = tunneling_prefactor(quartic, QuadratureRule(order=16, tol=1e-10))
        assert a == pytest.approx(b, abs=1e-9)

    def test_divergent_combination_rejected(self, quartic):
        # Flipping the sign of W' models the divergent branch: the integrand
        # then grows like 2/(1-x) near the well and must be refused.
        lying = Potential(
            eval=quartic.eval,
            deriv1=lambda x: -np.asarray(quartic.deriv1(x)),
            deriv2=quartic.deriv2,
        )
        with pytest.raises(NumericFailure):
            tunneling_prefactor(lying)


class TestGapLaw:
    def test_predicted_gap_values(self, quartic):
        assert predicted_gap(5.0, quartic) == pytest.approx(1.8164e-2, abs=1e-5)
        assert predicted_gap(10.0, quartic) == pytest.approx(3.27e-5, rel=2e-3)

    def test_critical_length_values(self, quartic):
        assert critical_length(5.0, quartic) == pytest.approx(110.1, abs=0.1)
        assert critical_length(10.0, quartic) == pytest.approx(6.12e4, rel=1e-3)

    def test_length_gap_identity_exact(self, quartic):
        for beta in (3.0, 5.0, 9.5):
            assert critical_length(beta, quartic) * predicted_gap(beta, quartic) == 2.0

    def test_predicted_gap_decreasing(self, quartic):
        betas = np.linspace(1.0, 12.0, 23)
        gaps = [predicted_gap(b, quartic) for b in betas]
        assert (np.diff(gaps) < 0).all()

    def test_rejects_nonpositive_beta(self, quartic):
        with pytest.raises(ValueError):
            predicted_gap(0.0, quartic)


class TestGaussianApproximants:
    def test_norms_and_parity(self, quartic):
        grid = Grid(2.5, 1001)
        ga = gaussian_approximants(quartic, 10.0, grid)
        h = grid.spacing
        assert math.sqrt(h * float(ga.g_plus @ ga.g_plus)) == pytest.approx(1.0, abs=1e-8)
        assert math.sqrt(h * float(ga.g0 @ ga.g0)) == pytest.approx(1.0, abs=1e-12)
        assert math.sqrt(h * float(ga.g1 @ ga.g1)) == pytest.approx(1.0, abs=1e-12)
        assert np.abs(ga.g0 - ga.g0[::-1]).max() < 1e-12
        assert np.abs(ga.g1 + ga.g1[::-1]).max() < 1e-12

    def test_normalizers_near_one(self, quartic):
        c = constants_for(quartic, 10.0)
        assert 0.99 <= c.z0 <= 1.01
        assert 0.99 <= c.z1 <= 1.01

    def test_constants_fields(self, quartic):
        c = constants_for(quartic, 10.0)
        assert c.surface_tension == pytest.approx(4.0 / 3.0, abs=1e-10)
        assert c.prefactor == pytest.approx(8.0 * math.sqrt(2.0 / math.pi), abs=1e-9)
        assert c.curvature == pytest.approx(2.0)
        assert c.harmonic_level(1) == pytest.approx(3.0)


class TestReport:
    def test_requires_four_levels(self, quartic):
        from phi4well.spectral import solve_parity_reduced

        m = solve_parity_reduced(quartic, 5.0, Grid(2.5, 501), k=2)
        with pytest.raises(ValueError):
            semiclassical_report(m)

    def test_gap_ratio_trend_toward_one(self):
        ratios = {b: semiclassical_report(model_for(b)).gap_ratio for b in (4.0, 10.0)}
        assert abs(ratios[10.0] - 1.0) < abs(ratios[4.0] - 1.0)

    def test_pinned_values_beta10(self):
        r = semiclassical_report(model_for(10.0))
        assert r.gap_ratio == pytest.approx(0.92198, abs=2e-4)
        assert r.approximant_mismatch[0] == pytest.approx(0.1749, abs=2e-3)
        assert r.approximant_mismatch[1] == pytest.approx(0.1745, abs=2e-3)
        assert r.efsplitting_ratio == pytest.approx(0.0511, abs=2e-3)
        # Eq-level checks: total integral of psi_1 vanishes; half-line
        # cross overlaps approach +-1/2.
        assert abs(r.psi1_total_integral) < 1e-10
        assert r.cross_overlaps[0] == pytest.approx(0.5, abs=0.05)
        assert r.cross_overlaps[1] == pytest.approx(-0.5, abs=0.05)

    def test_well_integrals_beta10(self):
        r = semiclassical_report(model_for(10.0))
        t = (math.pi / 20.0) ** 0.25
        assert r.well_integral_target == pytest.approx(t)
        for k in (0, 1):
            plus, minus = r.well_integrals[k]
            assert plus == pytest.approx(t, rel=0.1)
            assert minus == pytest.approx(t if k % 2 == 0 else -t, rel=0.1)

    def test_mismatch_bounded_in_beta(self):
        # beta ||psi_0 - g_0||^2 stays O(1): decreasing along 4, 6, 8, 10.
        vals = [semiclassical_report(model_for(b)).approximant_mismatch[0] for b in (4.0, 6.0, 8.0, 10.0)]
        assert all(x > y for x, y in zip(vals, vals[1:]))
        assert vals[0] < 0.5

    def test_efsplitting_spread(self):
        vals = [semiclassical_report(model_for(b)).efsplitting_ratio for b in (4.0, 6.0, 8.0, 10.0)]
        assert max(vals) / min(vals) <= 5.0

    def test_rows_schema(self):
        rows = semiclassical_report(model_for(6.0)).rows()
        names = [r[0] for r in rows]
        assert names[0] == "E0" and "gap_ratio" in names and "efsplitting_ratio" in names
        assert all(len(r) == 3 for r in rows)
