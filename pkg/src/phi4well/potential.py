"""Double-well potential, geometric constants, and the quadrature they need.

The two quantities computed here are pure functionals of the potential:
the surface tension ``C_W = integral of sqrt(2 W) across the barrier`` and
the Agmon distance ``U(x)``, the sqrt(2 W)-weighted distance from ``x`` to
the nearest well.  Both are evaluated by adaptive Gauss-Legendre quadrature;
for the quartic well they have closed forms that the tests pin down.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Potential",
    "QuadratureRule",
    "NumericFailure",
    "quartic_potential",
    "surface_tension",
    "agmon_distance",
]


class NumericFailure(RuntimeError):
    """A numerical contract was violated (non-convergence, lost positivity...)."""


@dataclass(frozen=True)
class Potential:
    """A symmetric double well with minima pinned at -1 and +1.

    Attributes:
        eval: x -> W(x), vectorized over NumPy arrays.
        deriv1: x -> W'(x).
        deriv2: x -> W''(x).
        well_locations: the pair (-1.0, 1.0).
        curvature_at_well: W''(1), strictly positive.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    deriv1: Callable[[np.ndarray], np.ndarray]
    deriv2: Callable[[np.ndarray], np.ndarray]
    well_locations: tuple[float, float] = (-1.0, 1.0)
    curvature_at_well: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.curvature_at_well == 0.0:
            object.__setattr__(
                self, "curvature_at_well", float(self.deriv2(np.asarray(1.0)))
            )
        if not self.curvature_at_well > 0:
            raise ValueError("wells must have positive curvature")


def quartic_potential() -> Potential:
    """The reference quartic double well W(x) = (x^2 - 1)^2 / 2."""

    def w(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (x * x - 1.0) ** 2

    def w1(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x * (x * x - 1.0)

    def w2(x):
        x = np.asarray(x, dtype=float)
        return 6.0 * x * x - 2.0

    return Potential(eval=w, deriv1=w1, deriv2=w2)


@dataclass(frozen=True)
class QuadratureRule:
    """Adaptive Gauss-Legendre panels with an absolute tolerance.

    A panel is accepted when the order-``order`` estimate and the sum of the
    two half-panel estimates agree within the tolerance allotted to it;
    otherwise it is bisected.  Weights are the classical positive GL weights.
    """

    order: int = 12
    tol: float = 1e-12
    max_depth: int = 48

    def __post_init__(self) -> None:
        nodes, weights = np.polynomial.legendre.leggauss(self.order)
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_weights", weights)

    def _panel(self, f, a: float, b: float) -> float:
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        return half * float(np.dot(self._weights, f(mid + half * self._nodes)))

    def integrate(self, f, a: float, b: float) -> float:
        """Integrate ``f`` over ``[a, b]`` to the rule's absolute tolerance."""
        if a == b:
            return 0.0
        sign = 1.0
        if b < a:
            a, b = b, a
            sign = -1.0
        total = 0.0
        stack = [(a, b, self._panel(f, a, b), self.tol, 0)]
        while stack:
            lo, hi, coarse, tol, depth = stack.pop()
            mid = 0.5 * (lo + hi)
            left = self._panel(f, lo, mid)
            right = self._panel(f, mid, hi)
            if abs(left + right - coarse) <= tol:
                total += left + right
            elif depth >= self.max_depth:
                raise NumericFailure(f"quadrature did not converge on [{lo}, {hi}]")
            else:
                stack.append((lo, mid, left, 0.5 * tol, depth + 1))
                stack.append((mid, hi, right, 0.5 * tol, depth + 1))
        return sign * total


def _sqrt2w(p: Potential):
    def f(x):
        return np.sqrt(np.maximum(2.0 * p.eval(x), 0.0))

    return f


def surface_tension(p: Potential, rule: QuadratureRule | None = None) -> float:
    """Surface tension C_W, the sqrt(2 W) integral between the wells.

    Equals 4/3 for the quartic well.
    """
    rule = rule or QuadratureRule()
    return rule.integrate(_sqrt2w(p), -1.0, 1.0)


def agmon_distance(p: Potential, x, rule: QuadratureRule | None = None):
    """Agmon distance U(x) from ``x`` to the nearest well.

    U(x) = min over the two wells of |integral of sqrt(2 W)| along the
    straight segment.  Even in x; U(+-1) = 0; 2 U(0) equals the surface
    tension.  Accepts a scalar or an array.
    """
    rule = rule or QuadratureRule()
    f = _sqrt2w(p)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0

    def one(xi: float) -> float:
        d_plus = abs(rule.integrate(f, 1.0, xi))
        d_minus = abs(rule.integrate(f, -1.0, xi))
        return min(d_plus, d_minus)

    out = np.array([one(v) for v in np.atleast_1d(arr)])
    return float(out[0]) if scalar else out
