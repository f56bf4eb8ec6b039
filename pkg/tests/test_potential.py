import numpy as np
import pytest

from phi4well.potential import (
    NumericFailure,
    Potential,
    QuadratureRule,
    agmon_distance,
    quartic_potential,
    surface_tension,
)


def test_quartic_values():
    p = quartic_potential()
    assert p.eval(1.0) == 0.0
    assert p.eval(-1.0) == 0.0
    assert p.eval(0.0) == 0.5
    assert p.deriv1(1.0) == 0.0
    assert p.deriv2(1.0) == 4.0
    assert p.curvature_at_well == 4.0
    assert p.well_locations == (-1.0, 1.0)


def test_quartic_derivatives_consistent():
    p = quartic_potential()
    x = np.linspace(-2.2, 2.2, 37)
    eps = 1e-6
    fd1 = (p.eval(x + eps) - p.eval(x - eps)) / (2 * eps)
    fd2 = (p.deriv1(x + eps) - p.deriv1(x - eps)) / (2 * eps)
    assert np.abs(fd1 - p.deriv1(x)).max() < 5e-9
    assert np.abs(fd2 - p.deriv2(x)).max() < 5e-9


def test_negative_curvature_rejected():
    with pytest.raises(ValueError):
        Potential(
            eval=lambda x: -((np.asarray(x) ** 2 - 1.0) ** 2),
            deriv1=lambda x: -4.0 * np.asarray(x) * (np.asarray(x) ** 2 - 1.0),
            deriv2=lambda x: -(12.0 * np.asarray(x) ** 2 - 4.0),
        )


def test_surface_tension_is_four_thirds():
    # int_{-1}^{1} sqrt(2 W) dx = int (1 - x^2) dx = 4/3, exactly.
    p = quartic_potential()
    assert surface_tension(p) == pytest.approx(4.0 / 3.0, abs=1e-10)


def test_surface_tension_scaling():
    # W -> 4 W multiplies sqrt(2W) by 2, hence the tension by 2.
    p = quartic_potential()
    q = Potential(
        eval=lambda x: 4.0 * p.eval(x),
        deriv1=lambda x: 4.0 * p.deriv1(x),
        deriv2=lambda x: 4.0 * p.deriv2(x),
    )
    assert surface_tension(q) == pytest.approx(8.0 / 3.0, abs=1e-9)


class TestAgmonDistance:
    def test_well_values_are_zero(self):
        p = quartic_potential()
        assert agmon_distance(p, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert agmon_distance(p, -1.0) == pytest.approx(0.0, abs=1e-12)

    def test_pinned_values(self):
        p = quartic_potential()
        # U(0) = 2/3: half the instanton action.
        assert agmon_distance(p, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-9)
        assert agmon_distance(p, 0.5) == pytest.approx(0.2083333, abs=1e-6)
        assert agmon_distance(p, 2.5) == pytest.approx(3.375, abs=1e-8)

    def test_matches_closed_form_inside(self):
        # On [0, 1] the distance from the nearer well has the closed form
        # (1 - x)^2 (2 + x) / 3.
        p = quartic_potential()
        x = np.linspace(0.0, 1.0, 21)
        expected = (1.0 - x) ** 2 * (2.0 + x) / 3.0
        got = agmon_distance(p, x)
        assert np.abs(got - expected).max() < 1e-8

    def test_even(self):
        p = quartic_potential()
        x = np.linspace(0.0, 2.4, 17)
        assert np.abs(agmon_distance(p, x) - agmon_distance(p, -x)).max() < 1e-10

    def test_eikonal_derivative(self):
        # |dU/dx| = sqrt(2 W) away from the wells.
        p = quartic_potential()
        eps = 1e-6
        for x in (0.3, 1.7, -0.6, 2.2):
            du = (agmon_distance(p, x + eps) - agmon_distance(p, x - eps)) / (2 * eps)
            assert abs(abs(du) - np.sqrt(2.0 * p.eval(x))) < 1e-6

    def test_vector_matches_scalar(self):
        p = quartic_potential()
        xs = np.array([-1.5, 0.2, 0.9, 2.0])
        vec = agmon_distance(p, xs)
        for i, x in enumerate(xs):
            assert vec[i] == pytest.approx(agmon_distance(p, float(x)), abs=1e-12)


class TestQuadratureRule:
    def test_polynomial_exactness(self):
        # A 12-point Gauss-Legendre panel is exact up to degree 23.
        rule = QuadratureRule()
        got = rule.integrate(lambda x: x**20, -1.0, 2.0)
        exact = (2.0**21 - (-1.0) ** 21) / 21.0
        assert got == pytest.approx(exact, rel=1e-13)

    def test_tolerance_failure_raises(self):
        rule = QuadratureRule(order=2, tol=1e-15, max_depth=3)
        with pytest.raises(NumericFailure):
            rule.integrate(lambda x: np.sqrt(np.abs(x)), -1.0, 1.0)

    def test_orientation(self):
        rule = QuadratureRule()
        a = rule.integrate(np.sin, 0.0, 2.0)
        b = rule.integrate(np.sin, 2.0, 0.0)
        assert a == pytest.approx(-b, abs=1e-12)
