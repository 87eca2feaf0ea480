"""Tests for problem models, the quadratic family and Tikhonov solutions."""

import numpy as np
import pytest

from mofgd import (
    FractionalConfig,
    ObjectiveModel,
    QuadraticMop,
    SingularSystemError,
    condition_number,
    load_mop,
    quadratic_effective_gradient,
    quadratic_objective,
    random_quadratic_mop,
    save_mop,
    tikhonov_solve,
)


class TestObjectiveModel:
    def test_gradient_validation_rejects_wrong_gradient(self):
        with pytest.raises(ValueError, match="finite differences"):
            ObjectiveModel(
                value=lambda x: float(x @ x),
                gradient=lambda x: 3.0 * x,  # wrong: should be 2x
                kind="smooth",
            )

    def test_quadratic_requires_hessian(self):
        with pytest.raises(ValueError, match="Hessian"):
            ObjectiveModel(value=lambda x: 0.0, gradient=lambda x: np.zeros(2),
                           kind="quadratic")

    def test_quadratic_objective_roundtrip(self):
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        b = np.array([-1.0, 0.5])
        obj = quadratic_objective(A, b, const=2.0)
        x = np.array([0.3, -0.7])
        assert obj.value(x) == pytest.approx(0.5 * x @ A @ x + b @ x + 2.0)
        np.testing.assert_allclose(obj.gradient(x), A @ x + b)
        np.testing.assert_allclose(obj.hessian(x), A)


class TestRandomQuadraticMop:
    def test_deterministic(self):
        """Identical seed gives an identical instance, bit for bit."""
        a = random_quadratic_mop(2, 2, 2, seed=0)
        b = random_quadratic_mop(2, 2, 2, seed=0)
        for Wa, Wb in zip(a.factors, b.factors):
            assert np.array_equal(Wa, Wb)
        for ya, yb in zip(a.targets, b.targets):
            assert np.array_equal(ya, yb)

    def test_gram_psd(self):
        mop = random_quadratic_mop(5, 3, 2, seed=9)
        for A in mop.gram:
            np.testing.assert_allclose(A, A.T)
            assert np.linalg.eigvalsh(A).min() >= -1e-12

    def test_rtilde_squares_to_gram_diagonal(self):
        mop = random_quadratic_mop(4, 7, 3, seed=1)
        for A, r in zip(mop.gram, mop.rtilde):
            assert np.all(r >= 0)
            np.testing.assert_allclose(r ** 2, np.diag(A), rtol=1e-14)

    def test_large_instance_condition_snapshot(self):
        """Seeded n=100 instance: kappa at gamma=1 is finite and reproducible."""
        mop = random_quadratic_mop(100, 100, 2, seed=42)
        lam = np.array([0.5, 0.5])
        sol = tikhonov_solve(mop, 1.0, lam, np.zeros(100))
        assert np.isfinite(sol.kappa)
        again = tikhonov_solve(random_quadratic_mop(100, 100, 2, seed=42),
                               1.0, lam, np.zeros(100))
        assert sol.kappa == pytest.approx(again.kappa, rel=1e-12)

    def test_targets_consistent_with_ground_truth(self):
        mop = random_quadratic_mop(6, 8, 2, seed=4)
        for W, y in zip(mop.factors, mop.targets):
            np.testing.assert_allclose(W.T @ mop.x_star, y)


class TestEffectiveGradient:
    def test_zero_at_tikhonov_solution(self):
        """Weighted sum of effective gradients vanishes at x_tik (fixed point)."""
        mop = random_quadratic_mop(5, 8, 2, seed=13)
        lam = np.array([0.4, 0.6])
        gamma = 0.3
        cfg = FractionalConfig(alpha=0.5, beta=gamma + 1.0 / 3.0, terminal=np.zeros(5))
        sol = tikhonov_solve(mop, gamma, lam, np.zeros(5))
        total = sum(lam[j] * quadratic_effective_gradient(mop, j, cfg, sol.x_tik)
                    for j in range(2))
        assert np.linalg.norm(total) <= 1e-8 * (1.0 + np.linalg.norm(sol.x_tik))

    def test_classical_when_gamma_zero(self):
        mop = random_quadratic_mop(3, 5, 2, seed=8)
        cfg = FractionalConfig(alpha=1.0, beta=0.0, terminal=np.zeros(3))
        x = np.array([0.2, -0.4, 0.9])
        for j in range(2):
            np.testing.assert_allclose(
                quadratic_effective_gradient(mop, j, cfg, x),
                mop.gram[j] @ x + mop.offsets[j],
            )

    def test_affine_in_x(self):
        """g_j(x) - g_j(z) = A_eff (x - z): the map is affine."""
        mop = random_quadratic_mop(4, 6, 2, seed=3)
        gamma = 0.7
        cfg = FractionalConfig(alpha=0.4, beta=gamma + 0.6 / 1.6, terminal=np.zeros(4))
        rng = np.random.default_rng(0)
        for j in range(2):
            a_eff = mop.gram[j] + cfg.gamma_alpha_beta * np.diag(mop.rtilde[j] ** 2)
            for _ in range(5):
                x, z = rng.normal(size=4), rng.normal(size=4)
                lhs = (quadratic_effective_gradient(mop, j, cfg, x)
                       - quadratic_effective_gradient(mop, j, cfg, z))
                np.testing.assert_allclose(lhs, a_eff @ (x - z), atol=1e-10)


class TestTikhonovSolve:
    def test_gamma_zero_recovers_ground_truth(self):
        mop = random_quadratic_mop(5, 8, 2, seed=21)
        lam = np.array([0.5, 0.5])
        sol = tikhonov_solve(mop, 0.0, lam, np.zeros(5))
        np.testing.assert_allclose(sol.x_tik, mop.x_star, atol=1e-8)

    def test_huge_gamma_pulls_to_terminal(self):
        mop = random_quadratic_mop(4, 6, 2, seed=22)
        c = np.array([0.5, -0.5, 1.0, 0.0])
        sol = tikhonov_solve(mop, 1e8, np.array([0.5, 0.5]), c)
        assert np.linalg.norm(sol.x_tik - c) <= 1e-4

    def test_hand_solved_diagonal_instance(self):
        """W = I, x* = (1,1), c = 0, gamma = 1 gives x_tik = (0.5, 0.5)."""
        mop = QuadraticMop(factors=(np.eye(2),), targets=(np.ones(2),),
                           x_star=np.ones(2))
        sol = tikhonov_solve(mop, 1.0, np.array([1.0]), np.zeros(2))
        np.testing.assert_allclose(sol.x_tik, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(sol.a_matrix, 2.0 * np.eye(2))
        assert sol.kappa == pytest.approx(1.0)

    def test_monotone_shrink_toward_terminal(self):
        """||x_tik(gamma) - c|| is nonincreasing in gamma on SPD instances."""
        mop = random_quadratic_mop(5, 10, 2, seed=30)
        lam = np.array([0.5, 0.5])
        c = np.zeros(5)
        norms = [np.linalg.norm(tikhonov_solve(mop, g, lam, c).x_tik - c)
                 for g in (0.0, 0.05, 0.2, 1.0, 5.0, 50.0)]
        for a, b in zip(norms, norms[1:]):
            assert b <= a + 1e-10

    def test_singular_at_gamma_zero(self):
        """Rank-deficient Gram sum with gamma = 0 raises a singularity error."""
        W = np.zeros((3, 2))
        W[0, 0] = 1.0
        W[1, 1] = 1.0
        mop = QuadraticMop(factors=(W,), targets=(np.zeros(2),),
                           x_star=np.zeros(3))
        with pytest.raises(SingularSystemError):
            tikhonov_solve(mop, 0.0, np.array([1.0]), np.zeros(3))

    def test_outer_variant_differs(self):
        mop = random_quadratic_mop(4, 6, 2, seed=17)
        lam = np.array([0.5, 0.5])
        diag = tikhonov_solve(mop, 0.5, lam, np.zeros(4), regularizer="diag")
        outer = tikhonov_solve(mop, 0.5, lam, np.zeros(4), regularizer="outer")
        assert not np.allclose(diag.x_tik, outer.x_tik)

    def test_bad_multipliers_rejected(self):
        mop = random_quadratic_mop(3, 4, 2, seed=2)
        with pytest.raises(ValueError, match="simplex"):
            tikhonov_solve(mop, 0.1, np.array([0.7, 0.7]), np.zeros(3))


class TestConditionNumber:
    def test_identity(self):
        assert condition_number(np.eye(4)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert condition_number(np.diag([10.0, 1.0])) == pytest.approx(10.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            condition_number(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        mop = random_quadratic_mop(4, 5, 2, seed=77)
        path = tmp_path / "instance.json"
        save_mop(mop, path, terminal=np.zeros(4))
        loaded, c = load_mop(path)
        assert loaded.seed == 77
        np.testing.assert_allclose(c, np.zeros(4))
        for Wa, Wb in zip(mop.factors, loaded.factors):
            np.testing.assert_array_equal(Wa, Wb)
        for ya, yb in zip(mop.targets, loaded.targets):
            np.testing.assert_array_equal(ya, yb)
        np.testing.assert_array_equal(mop.x_star, loaded.x_star)

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bogus.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError, match="format"):
            load_mop(path)
