"""Tests for baselines, theorem verification, sweeps, table and ADRS."""

import numpy as np
import pytest

from mofgd import (
    ExperimentSpec,
    FractionalConfig,
    SolverConfig,
    StageSchedule,
    adrs,
    comparison_table,
    mogd_baseline,
    random_quadratic_mop,
    subgradient_baseline,
    tikhonov_solve,
    verify_rate_theorem5,
    verify_staged_theorem6,
)
from mofgd.fixtures import (
    classical_critical_point,
    default_schedule,
    example3_objective,
    EXAMPLE2_MATRIX,
    EXAMPLE2_OFFSET,
)
from mofgd.lab import pareto_sweep


class TestMogdBaselineLab:
    def test_example2_pair_reaches_criticality(self):
        spec_objs = [
            # example1 and example2 quadratics
        ]
        from mofgd.fixtures import pareto_pair
        cfg = SolverConfig(tolerance=1e-6, max_iterations=3000)
        trace = mogd_baseline(pareto_pair(), np.array([2.0, 2.0]), cfg)
        assert trace.termination == "tolerance"
        assert trace.final_norm_d < 1e-6

    def test_recovers_example2_minimum(self):
        from mofgd.fixtures import fixture_objectives
        cfg = SolverConfig(tolerance=1e-8, max_iterations=3000)
        trace = mogd_baseline(fixture_objectives("example2"), np.array([1.0, 1.0]), cfg)
        x_ref, f_ref = classical_critical_point(EXAMPLE2_MATRIX, EXAMPLE2_OFFSET)
        np.testing.assert_allclose(trace.final_x, x_ref, atol=1e-5)


class TestSubgradientBaseline:
    def test_converges_toward_origin(self):
        obj = example3_objective()
        trace = subgradient_baseline(obj, np.array([3.0, 3.0]), steps=2000)
        assert any(n.startswith("hit:") and n != "hit:none" for n in trace.notes)

    def test_start_at_optimum_stops_immediately(self):
        obj = example3_objective()
        trace = subgradient_baseline(obj, np.zeros(2), steps=100)
        assert trace.notes and trace.notes[0] == "hit:0"
        assert trace.iterations == 0

    def test_slower_than_staged_fractional(self):
        """The memory-driven method needs strictly fewer iterations."""
        from mofgd.descent import run_adaptive
        obj = example3_objective()
        sub = subgradient_baseline(obj, np.array([3.0, 3.0]), steps=2000)
        sub_hit = next(int(n.split(":")[1]) for n in sub.notes
                       if n.startswith("hit:") and n != "hit:none")
        cfg = SolverConfig(tolerance=1e-6, max_iterations=2000)
        trace = run_adaptive([obj], np.array([3.0, 3.0]), cfg, default_schedule())
        xs = [r.x for r in trace.records] + [trace.final_x]
        frac_hit = next(k for k, x in enumerate(xs) if obj.value(x) <= 1e-3)
        assert frac_hit < sub_hit


class TestVerifyRateTheorem5:
    def setup_method(self):
        self.mop = random_quadratic_mop(5, 6, 2, seed=4)
        self.gamma = 0.02
        self.frac = FractionalConfig(alpha=0.5, beta=self.gamma + 1.0 / 3.0,
                                     terminal=np.zeros(5))
        self.lam = np.array([0.5, 0.5])

    def test_geometric_decay_to_fixed_point(self):
        rep = verify_rate_theorem5(self.mop, SolverConfig(step_mode="fixed", eta=1.0),
                                   self.frac, self.lam)
        assert rep.monotone
        assert not rep.rate_violation
        assert rep.fixed_point_gap <= 1e-6
        assert rep.fitted_rate < 1.0

    def test_eta_near_two_still_converges(self):
        rep = verify_rate_theorem5(self.mop, SolverConfig(step_mode="fixed", eta=1.99),
                                   self.frac, self.lam)
        assert not rep.rate_violation
        assert rep.final_error <= 1e-6

    def test_fixed_point_independent_of_start(self):
        rng = np.random.default_rng(9)
        reps = [
            verify_rate_theorem5(self.mop, SolverConfig(step_mode="fixed", eta=1.0),
                                 self.frac, self.lam, x0=rng.normal(size=5) * 5)
            for _ in range(2)
        ]
        assert np.linalg.norm(reps[0].trace.final_x - reps[1].trace.final_x) <= 1e-6

    def test_rate_matches_condition_number_prediction(self):
        """Tail ratio equals max(|1-eta|, |1-eta/kappa|) for the frozen system."""
        rep = verify_rate_theorem5(self.mop, SolverConfig(step_mode="fixed", eta=1.0),
                                   self.frac, self.lam)
        v = rep.ratios[~np.isnan(rep.ratios)]
        predicted = 1.0 - 1.0 / rep.kappa
        assert v[-1] == pytest.approx(predicted, rel=1e-3)

    def test_negative_gamma_rejected(self):
        bad = FractionalConfig(alpha=0.5, beta=0.0, terminal=np.zeros(5))
        with pytest.raises(ValueError):
            verify_rate_theorem5(self.mop, SolverConfig(step_mode="fixed", eta=1.0),
                                 bad, self.lam)


class TestVerifyStagedTheorem6:
    def test_recursion_and_lipschitz_hold(self):
        mop = random_quadratic_mop(5, 8, 2, seed=101)
        sched = StageSchedule.from_gammas([0.5] * 4, [0.5, 0.1, 0.01, 0.001],
                                          [400] * 4, terminal=np.zeros(5))
        cfg = SolverConfig(step_mode="fixed", eta=1.0, max_iterations=400)
        bound, report = verify_staged_theorem6(mop, sched, cfg)
        assert report["recursion_ok"]
        assert report["lipschitz_ok"]
        assert report["bound_ok"]
        assert report["final_bound_ok"]
        assert bound.b_max > 0 and bound.c_const > 0
        # error decreases toward the unregularized truth as gamma shrinks
        errs = report["stage_end_error_to_x_star"]
        assert errs[-1] < errs[0]

    def test_constant_schedule_plateaus_at_bias(self):
        """With gamma fixed, the error to x* plateaus at the Tikhonov bias."""
        mop = random_quadratic_mop(5, 8, 2, seed=55)
        gamma = 0.2
        sched = StageSchedule.from_gammas([0.5] * 3, [gamma] * 3, [300] * 3,
                                          terminal=np.zeros(5))
        cfg = SolverConfig(step_mode="fixed", eta=1.0, max_iterations=300)
        bound, report = verify_staged_theorem6(mop, sched, cfg)
        lam = np.full(2, 0.5)
        bias = np.linalg.norm(
            tikhonov_solve(mop, gamma, lam, np.zeros(5)).x_tik - mop.x_star)
        assert report["final_error"] == pytest.approx(bias, abs=1e-6)
        assert report["final_error"] <= bound.c_const * gamma * 1.1


class TestParetoSweep:
    def test_single_start(self):
        spec = ExperimentSpec(instance="example2_pair", schedule=default_schedule(),
                              start_grid=((1.0, 1.0), (2.0, 2.0), 1))
        front = pareto_sweep(spec)
        assert len(front) <= 1

    def test_duplicates_collapse(self):
        """All starts of a single-objective problem land on one minimizer."""
        spec = ExperimentSpec(instance="example2", schedule=default_schedule(),
                              start_grid=((0.0, 0.0), (2.0, 2.0), 5))
        front = pareto_sweep(spec)
        assert len(front) == 1

    def test_example2_pair_front(self):
        """100 starts trace the efficient curve; every point is critical."""
        spec = ExperimentSpec(instance="example2_pair", schedule=default_schedule(),
                              start_grid=((-2.0, -3.0), (2.0, 1.0), 100))
        cfg = SolverConfig(tolerance=1e-5, max_iterations=3000)
        front = pareto_sweep(spec, cfg)
        assert len(front) >= 10
        for p in front:
            assert p.norm_d < 1e-4
        f1 = [p.objectives[0] for p in front]
        f2 = [p.objectives[1] for p in front]
        assert all(a <= b + 1e-12 for a, b in zip(f1, f1[1:]))
        assert all(a >= b - 1e-9 for a, b in zip(f2, f2[1:]))


class TestAdrs:
    def test_front_equals_reference(self):
        ref = [np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        assert adrs(ref, ref) == 0.0

    def test_hand_evaluated(self):
        """Half the reference covered: mean(0, 1) = 0.5 under unit ranges."""
        ref = [np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        front = [np.array([0.0, 1.0])]
        assert adrs(front, ref) == pytest.approx(0.5)

    def test_adding_points_never_increases(self):
        rng = np.random.default_rng(2)
        ref = [rng.uniform(0, 1, 2) for _ in range(6)]
        front = [rng.uniform(0, 1, 2) for _ in range(3)]
        base = adrs(front, ref)
        assert adrs(front + [ref[0]], ref) <= base + 1e-15

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            adrs([np.zeros(2)], [])


class TestComparisonTable:
    def test_small_instance_table(self):
        """Table rows carry finite condition numbers and converged errors."""
        mop = random_quadratic_mop(20, 20, 2, seed=42)
        rows = comparison_table(mop, (0.25, 1.0), x0=np.full(20, 5.5))
        assert len(rows) == 4
        for r in rows:
            assert np.isfinite(r["condition_number"])
            assert r["iterations"] >= 1
            assert r["wall_seconds"] > 0
        frac_rows = [r for r in rows if r["method"] == "moaocfgd"]
        for r in frac_rows:
            assert r["final_error"] < 1e-2

    def test_fractional_conditioning_beats_outer_regularizer(self):
        """Diagonal regularization conditions far better at small gamma."""
        mop = random_quadratic_mop(30, 30, 2, seed=7)
        rows = comparison_table(mop, (0.15,), x0=np.full(30, 3.0))
        gd = next(r for r in rows if r["method"] == "mogd")
        fr = next(r for r in rows if r["method"] == "moaocfgd")
        assert fr["condition_number"] < gd["condition_number"]
