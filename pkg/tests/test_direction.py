"""Tests for the min-norm direction subproblem and its oracles."""

import numpy as np
import pytest

from mofgd import (
    brute_force_direction,
    solve_direction,
    solve_direction_m2_closed_form,
)


def random_gradients(rng, m, n, scale=1.0):
    return [scale * rng.standard_normal(n) for _ in range(m)]


class TestSolveDirection:
    def test_single_objective(self):
        """m=1: d = -g, t = -||g||^2, theta = -||g||^2/2."""
        r = solve_direction([np.array([3.0, 4.0])])
        np.testing.assert_allclose(r.direction, [-3.0, -4.0])
        assert r.t_value == pytest.approx(-25.0)
        np.testing.assert_allclose(r.multipliers, [1.0])
        assert r.theta == pytest.approx(-12.5)

    def test_orthonormal_pair(self):
        """g1=(1,0), g2=(0,1): midpoint of the segment is the min-norm point."""
        r = solve_direction([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        np.testing.assert_allclose(r.multipliers, [0.5, 0.5], atol=1e-9)
        np.testing.assert_allclose(r.direction, [-0.5, -0.5], atol=1e-9)
        assert r.t_value == pytest.approx(-0.5, abs=1e-9)
        assert r.theta == pytest.approx(-0.25, abs=1e-9)

    def test_opposed_gradients_give_zero(self):
        """0 in conv{g, -g} means the point is critical: d = 0, t = 0."""
        g = np.array([1.3, -0.4, 2.0])
        r = solve_direction([g, -g])
        assert np.linalg.norm(r.direction) <= 1e-8
        assert abs(r.t_value) <= 1e-8

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            solve_direction([np.array([np.inf, 0.0])])

    def test_all_zero_gradients(self):
        r = solve_direction([np.zeros(3), np.zeros(3)])
        np.testing.assert_allclose(r.direction, np.zeros(3))
        assert r.t_value == 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_kkt_residuals(self, seed):
        """Multipliers on the simplex, feasibility and complementary slackness."""
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        r = solve_direction(random_gradients(rng, m, n))
        lam = r.multipliers
        assert lam.min() >= -1e-10
        assert abs(lam.sum() - 1.0) <= 1e-10
        assert r.kkt_residual <= 1e-8
        assert r.theta <= 1e-12
        if r.norm > 0:
            assert r.t_value <= -0.5 * r.norm ** 2 + 1e-8
            assert r.t_value >= -r.norm ** 2 - 1e-8

    @pytest.mark.parametrize("seed", range(10))
    def test_constructed_critical_points(self, seed):
        """Gradients built with sum(lam_bar g) = 0 must yield d ~ 0; gradients
        in an open half-space must not."""
        rng = np.random.default_rng(100 + seed)
        m, n = 3, 4
        lam_bar = rng.dirichlet(np.ones(m))
        gs = [rng.standard_normal(n) for _ in range(m - 1)]
        last = -sum(lam_bar[j] * gs[j] for j in range(m - 1)) / lam_bar[m - 1]
        r = solve_direction(gs + [last])
        assert np.linalg.norm(r.direction) <= 1e-8

        anchor = rng.standard_normal(n)
        anchor /= np.linalg.norm(anchor)
        half = [anchor + 0.3 * rng.standard_normal(n) for _ in range(m)]
        half = [g if g @ anchor > 0.1 else anchor for g in half]
        r2 = solve_direction(half)
        assert np.linalg.norm(r2.direction) > 0

    @pytest.mark.parametrize("scale", [0.01, 1.0, 250.0])
    def test_scale_covariance(self, scale):
        """theta(s g) = s^2 theta(g) for s > 0."""
        rng = np.random.default_rng(5)
        gs = random_gradients(rng, 3, 4)
        base = solve_direction(gs)
        scaled = solve_direction([scale * g for g in gs])
        assert scaled.theta == pytest.approx(scale ** 2 * base.theta,
                                             abs=1e-8 * max(1.0, scale ** 2))
        np.testing.assert_allclose(scaled.direction, scale * base.direction,
                                   atol=1e-6 * max(1.0, scale))

    def test_nearly_collinear_gradients_still_accurate(self):
        """Ill-conditioned duals must still hit the gap target via the polish."""
        g1 = np.array([1.0, 0.0])
        g2 = g1 + np.array([1e-6, 1e-6])
        r = solve_direction([g1, g2])
        rc = solve_direction_m2_closed_form(g1, g2)
        assert abs(0.5 * r.norm ** 2 + r.theta - (0.5 * rc.norm ** 2 + rc.theta)) <= 1e-12
        assert r.kkt_residual <= 1e-8


class TestM2ClosedForm:
    def test_orthonormal(self):
        r = solve_direction_m2_closed_form(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert r.multipliers[0] == pytest.approx(0.5)

    def test_identical_gradients(self):
        g = np.array([2.0, -1.0])
        r = solve_direction_m2_closed_form(g, g)
        assert r.multipliers[0] == pytest.approx(1.0)
        np.testing.assert_allclose(r.direction, -g)

    def test_zero_in_hull(self):
        """g1=(2,0), g2=(-1,0): lambda_1 = 1/3 puts the combination at zero."""
        r = solve_direction_m2_closed_form(np.array([2.0, 0.0]), np.array([-1.0, 0.0]))
        assert r.multipliers[0] == pytest.approx(1.0 / 3.0)
        np.testing.assert_allclose(r.direction, [0.0, 0.0], atol=1e-15)

    @pytest.mark.parametrize("seed", range(30))
    def test_agrees_with_solver(self, seed):
        rng = np.random.default_rng(200 + seed)
        g1, g2 = rng.standard_normal(4), rng.standard_normal(4)
        a = solve_direction([g1, g2])
        b = solve_direction_m2_closed_form(g1, g2)
        # Dual objective values agree even when multipliers are degenerate.
        assert 0.5 * a.norm ** 2 == pytest.approx(0.5 * b.norm ** 2, abs=1e-9)


class TestBruteForce:
    def test_m2_fine_lattice(self):
        rng = np.random.default_rng(3)
        gs = random_gradients(rng, 2, 3)
        exact = solve_direction(gs)
        brute = brute_force_direction(gs, 10 ** 6)
        assert 0.5 * brute.norm ** 2 == pytest.approx(0.5 * exact.norm ** 2, abs=1e-10)

    def test_all_zero(self):
        r = brute_force_direction([np.zeros(2), np.zeros(2)], 10)
        np.testing.assert_allclose(r.direction, np.zeros(2))
        assert r.t_value == 0.0

    def test_m3_lattice_density(self):
        rng = np.random.default_rng(4)
        gs = random_gradients(rng, 3, 3)
        exact = solve_direction(gs)
        brute = brute_force_direction(gs, 500)
        assert 0.5 * brute.norm ** 2 == pytest.approx(0.5 * exact.norm ** 2, abs=1e-4)

    def test_refuses_large_m(self):
        with pytest.raises(ValueError, match="m = 7"):
            brute_force_direction([np.ones(2)] * 7, 10)

    def test_brute_force_never_below_optimum(self):
        """Lattice restriction can only increase the dual objective."""
        rng = np.random.default_rng(6)
        for m in (2, 3, 4):
            gs = random_gradients(rng, m, 4)
            exact = solve_direction(gs)
            brute = brute_force_direction(gs, 50)
            assert 0.5 * brute.norm ** 2 >= 0.5 * exact.norm ** 2 - 1e-12
