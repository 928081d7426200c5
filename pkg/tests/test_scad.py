"""SCAD penalty pieces against quadrature and brute-force minimizer oracles."""

import numpy as np
import pytest
from scipy.integrate import quad

from dplc import (ScadConfig, scad_derivative, scad_threshold, scad_value,
                  soft_threshold)

CFG = ScadConfig(lam=1.0, a=3.7)


def penalty_reference(theta, cfg):
    """Numerical integral of the derivative spline from 0 to theta."""
    value, _ = quad(lambda t: scad_derivative(t, cfg), 0.0, theta, limit=200)
    return value


def brute_force_threshold(h, v, cfg, radius=10.0):
    """Dense grid plus golden-section refinement of the 1-d objective

        0.5 * v * (b - h / v)**2 + p(|b|),

    whose minimizer scad_threshold must reproduce at v = 1.
    """
    def objective(b):
        return 0.5 * v * (b - h / v) ** 2 + scad_value(abs(b), cfg)

    grid = np.linspace(-radius, radius, 4001)
    values = 0.5 * v * (grid - h / v) ** 2 + scad_value(np.abs(grid), cfg)
    k = int(np.argmin(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    while b - a > 1e-10:
        if objective(c) < objective(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    return 0.5 * (a + b)


class TestConfig:
    def test_rejects_small_a(self):
        with pytest.raises(ValueError):
            ScadConfig(lam=1.0, a=2.0)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            ScadConfig(lam=-0.1)

    def test_default_shape(self):
        assert ScadConfig(lam=0.5).a == 3.7


class TestDerivative:
    def test_flat_at_lambda_inside(self):
        assert scad_derivative(0.5, CFG) == pytest.approx(1.0)
        assert scad_derivative(0.0, CFG) == pytest.approx(1.0)
        assert scad_derivative(1.0, CFG) == pytest.approx(1.0)

    def test_zero_beyond_a_lambda(self):
        assert scad_derivative(5.0, CFG) == 0.0
        assert scad_derivative(3.7, CFG) == pytest.approx(0.0, abs=1e-15)

    def test_middle_branch_value(self):
        assert scad_derivative(2.0, CFG) == pytest.approx((3.7 - 2.0) / 2.7,
                                                          rel=1e-12)

    def test_continuity_at_knots(self):
        eps = 1e-9
        for knot in (CFG.lam, CFG.a * CFG.lam):
            left = scad_derivative(knot - eps, CFG)
            right = scad_derivative(knot + eps, CFG)
            assert abs(left - right) < 1e-6

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            scad_derivative(-0.1, CFG)

    def test_vectorized(self):
        out = scad_derivative(np.array([0.5, 2.0, 5.0]), CFG)
        assert out == pytest.approx([1.0, 1.7 / 2.7, 0.0])

    @pytest.mark.parametrize("theta", [0.2, 0.8, 1.5, 2.5, 3.2, 4.5])
    def test_is_derivative_of_value(self, theta):
        step = 1e-6
        fd = (scad_value(theta + step, CFG) - scad_value(theta - step, CFG)) \
            / (2.0 * step)
        assert fd == pytest.approx(scad_derivative(theta, CFG), rel=1e-6,
                                   abs=1e-9)


class TestValue:
    def test_zero_at_zero(self):
        assert scad_value(0.0, CFG) == 0.0

    def test_first_knot(self):
        assert scad_value(1.0, CFG) == pytest.approx(1.0, rel=1e-12)

    def test_constant_tail(self):
        assert scad_value(10.0, CFG) == pytest.approx(2.35, rel=1e-12)
        assert scad_value(100.0, CFG) == pytest.approx(2.35, rel=1e-12)

    @pytest.mark.parametrize("theta", [0.3, 1.0, 1.7, 2.9, 3.7, 6.0])
    def test_matches_quadrature_oracle(self, theta):
        assert scad_value(theta, CFG) == pytest.approx(
            penalty_reference(theta, CFG), rel=1e-8)

    def test_lambda_zero(self):
        cfg = ScadConfig(lam=0.0)
        assert scad_value(3.0, cfg) == 0.0
        assert scad_derivative(3.0, cfg) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            scad_value(-1.0, CFG)


class TestSoftThreshold:
    def test_shrinks(self):
        assert soft_threshold(3.0, 1.0) == 2.0

    def test_dead_zone(self):
        assert soft_threshold(-0.5, 1.0) == 0.0

    def test_sign_zero(self):
        assert soft_threshold(0.0, 0.0) == 0.0

    def test_odd(self):
        assert soft_threshold(-3.0, 1.0) == -2.0

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.5)


class TestScadThreshold:
    def test_unpenalized_branch(self):
        assert scad_threshold(5.0, 1.0, CFG) == 5.0

    def test_dead_zone(self):
        assert scad_threshold(0.5, 1.0, CFG) == 0.0

    def test_middle_branch_frozen(self):
        # golden-section oracle agrees to 1e-8 (verified by the grid test)
        assert scad_threshold(3.0, 1.0, CFG) == pytest.approx(
            2.588235294117647, rel=1e-12)

    def test_rejects_nonpositive_curvature(self):
        with pytest.raises(ValueError, match="non-positive curvature"):
            scad_threshold(1.0, 0.0, CFG)

    def test_zero_set_is_lambda_ball(self):
        for lam in (0.1, 0.5, 1.0):
            cfg = ScadConfig(lam=lam)
            for h in np.arange(-6.0, 6.0, 0.05):
                result = scad_threshold(float(h), 1.0, cfg)
                assert (result == 0.0) == (abs(h) <= lam)

    @pytest.mark.parametrize("v", [0.5, 1.0, 2.0])
    def test_shrinkage_bound(self, v):
        for h in np.arange(-6.0, 6.0, 0.11):
            out = scad_threshold(float(h), v, CFG)
            assert abs(out) <= abs(h) / v + 1e-12
            if abs(h) > CFG.a * CFG.lam:
                assert out == pytest.approx(h / v, rel=1e-12)

    @pytest.mark.parametrize("lam", [0.1, 0.5, 1.0])
    def test_matches_brute_force_at_unit_curvature(self, lam):
        cfg = ScadConfig(lam=lam, a=3.7)
        for h in np.arange(-6.0, 6.0 + 1e-9, 0.05):
            expected = brute_force_threshold(float(h), 1.0, cfg)
            assert scad_threshold(float(h), 1.0, cfg) == pytest.approx(
                expected, abs=1e-6)
