"""Desk-scale experiment harness: baselines, rate/bound verification, sweeps.

Reproduces the quadratic benchmark study: classical-gradient baselines, the
linear-rate check against the closed-form Tikhonov solution, the staged
error-bound recursion, Pareto-front sweeps from a grid of starts, the
gamma-comparison table, and the average-distance-from-reference-set (ADRS)
front metric.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .descent import (
    IterationRecord,
    IterationTrace,
    SolverConfig,
    StageSchedule,
    run_adaptive,
    run_single_stage,
)
from .direction import solve_direction
from .fractional import FractionalConfig
from .fixtures import fixture_objectives
from .problems import (
    ObjectiveModel,
    QuadraticMop,
    TikhonovSolution,
    condition_number,
    tikhonov_solve,
)

__all__ = [
    "ExperimentSpec",
    "StageErrorBound",
    "RateReport",
    "FrontPoint",
    "mogd_baseline",
    "subgradient_baseline",
    "verify_rate_theorem5",
    "verify_staged_theorem6",
    "pareto_sweep",
    "adrs",
    "comparison_table",
    "PAPER_GAMMA_VALUES",
]

PAPER_GAMMA_VALUES = (0.15, 0.25, 0.5, 0.75, 1.0, 10.0)
DOMINANCE_SLACK = 1e-9


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: instance, regularizers, starts, method, schedule, seed.

    instance is a QuadraticMop or a named analytic fixture ("example1",
    "example2", "example2_pair", "example3_nonsmooth").  start_grid is
    (lb, ub, count): count points uniformly subdividing the segment lb -> ub.
    """

    instance: Union[QuadraticMop, str]
    gamma_values: tuple[float, ...] = PAPER_GAMMA_VALUES
    start_grid: tuple = ((1.01, 1.01), (10.0, 10.0), 100)
    method: str = "moaocfgd"
    schedule: Optional[StageSchedule] = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("moaocfgd", "mogd", "subgradient"):
            raise ValueError(f"unknown method {self.method!r}")
        lb, ub, count = self.start_grid
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if count < 1:
            raise ValueError("start_grid count must be >= 1")
        if not np.all(lb < ub):
            raise ValueError("start_grid lower bound must be below the upper bound")
        if any(g < 0 for g in self.gamma_values):
            raise ValueError("gamma values must be nonnegative")
        object.__setattr__(self, "start_grid", (lb, ub, int(count)))
        object.__setattr__(self, "gamma_values", tuple(float(g) for g in self.gamma_values))

    def objectives(self) -> list[ObjectiveModel]:
        if isinstance(self.instance, QuadraticMop):
            return self.instance.objectives()
        return fixture_objectives(self.instance)

    def starts(self) -> np.ndarray:
        lb, ub, count = self.start_grid
        if count == 1:
            return lb[None, :].copy()
        ts = np.linspace(0.0, 1.0, count)
        return lb[None, :] + ts[:, None] * (ub - lb)[None, :]


@dataclass(frozen=True)
class StageErrorBound:
    """Per-stage quantities of the staged error recursion.

    rates[s] is the per-iteration contraction of the squared error at stage
    s; R[s] = rates[s]^(k_s/2) is the per-stage factor, so the recursion
    epsilon_{s+1} <= R_s epsilon_s + e_s chains stage starts.  bound[s] is
    the recursion unrolled from epsilon_1.
    """

    gammas: tuple[float, ...]
    iterations: tuple[int, ...]
    rates: tuple[float, ...]
    R: tuple[float, ...]
    epsilon: tuple[float, ...]
    e: tuple[float, ...]
    bound: tuple[float, ...]
    b_max: float
    c_const: float


@dataclass(frozen=True)
class RateReport:
    errors: np.ndarray
    ratios: np.ndarray
    fitted_rate: float
    ratio_std_last100: float
    monotone: bool
    geometric: bool
    rate_violation: bool
    kappa: float
    sigma_max: float
    final_error: float
    fixed_point_gap: float
    literal_growth_factor: float
    trace: IterationTrace


@dataclass(frozen=True)
class FrontPoint:
    objectives: np.ndarray
    x: np.ndarray
    start_index: int
    norm_d: float


def mogd_baseline(objectives: Sequence[ObjectiveModel], x0: np.ndarray,
                  cfg: SolverConfig) -> IterationTrace:
    """Classical multi-objective steepest descent: the alpha=1, beta=0 reduction."""
    frac = FractionalConfig(alpha=1.0, beta=0.0,
                            terminal=np.zeros(np.asarray(x0).size),
                            degenerate_policy="clamp")
    return run_single_stage(list(objectives), None, x0, cfg, frac, cfg.max_iterations)


def subgradient_baseline(f: ObjectiveModel, x0: np.ndarray, steps: int,
                         step_scale: float = 0.5, f_min: float = 0.0,
                         target_gap: float = 1e-3) -> IterationTrace:
    """Scalar subgradient descent with diminishing steps a/(k+1).

    At points where several pieces are within 1e-9 of the max, the
    subgradient is their average (a convex combination).  The trace note
    "hit:K" records the first iteration with f <= f_min + target_gap.
    """
    x = np.asarray(x0, dtype=float).copy()
    trace = IterationTrace()
    pieces = getattr(f, "_pieces", None)
    hit: Optional[int] = None
    for k in range(steps):
        start = time.perf_counter()
        fx = f.value(x)
        if hit is None and fx <= f_min + target_gap:
            hit = k
            trace.notes.append(f"hit:{k}")
            trace.termination = "tolerance"
            trace.final_x = x.copy()
            break
        if pieces is not None:
            vals = np.array([p[0](x) for p in pieces])
            active = np.nonzero(vals >= vals.max() - 1e-9)[0]
            g = np.mean([np.asarray(pieces[i][1](x), dtype=float) for i in active], axis=0)
        else:
            g = np.asarray(f.gradient(x), dtype=float)
        eta = step_scale / (k + 1.0)
        trace.records.append(IterationRecord(
            k=k, stage=0, x=x.copy(), f_values=np.array([fx]),
            t_value=float(-g @ g), norm_d=float(np.linalg.norm(g)),
            eta=eta, backtracks=0, wall=time.perf_counter() - start,
        ))
        x = x - eta * g
        trace.final_x = x.copy()
    else:
        trace.termination = "max_iter"
    if hit is None:
        trace.notes.append("hit:none")
    return trace


def _frozen_fixed_run(mop: QuadraticMop, gamma: float, lam: np.ndarray,
                      terminal: np.ndarray, cfg: SolverConfig, k_max: int,
                      x0: np.ndarray, stage_index: int = 0,
                      trace: Optional[IterationTrace] = None) -> IterationTrace:
    """One frozen-multiplier fixed-step segment on the gamma-regularized problem."""
    alpha = 0.5
    beta = gamma + (1.0 - alpha) / (2.0 - alpha)
    frac = FractionalConfig(alpha=alpha, beta=beta, terminal=terminal,
                            degenerate_policy="clamp")
    merit = mop.objectives(gamma, terminal)
    return run_single_stage(
        merit, mop, x0, cfg, frac, k_max,
        frozen_multipliers=lam, stage_index=stage_index,
        trace=trace, k_offset=0 if trace is None else trace.iterations,
    )


def verify_rate_theorem5(mop: QuadraticMop, cfg: SolverConfig, frac: FractionalConfig,
                         multipliers: np.ndarray, x0: Optional[np.ndarray] = None,
                         k_max: int = 2000, stop_error: float = 1e-7) -> RateReport:
    """Frozen-multiplier fixed-step run checked against the closed-form solution.

    Reports per-iteration distances to x_Tik, the fitted geometric rate and
    its stability over the last 100 iterations, the condition number and
    largest singular value of the effective matrix, and whether the decay is
    monotone geometric.  Divergence (error ratio > 1 for 50 consecutive
    iterations) is reported as rate_violation, not raised.
    """
    gamma = frac.gamma_alpha_beta
    if gamma < 0:
        raise ValueError("rate check needs beta >= (1-alpha)/(2-alpha)")
    lam = np.asarray(multipliers, dtype=float)
    c = np.broadcast_to(frac.terminal, (mop.dim,)).astype(float)
    sol = tikhonov_solve(mop, gamma, lam, c)

    rng = np.random.default_rng(0)
    x0 = (sol.x_tik + rng.normal(0, 1.0, mop.dim)) if x0 is None else np.asarray(x0, dtype=float)

    sigma = np.linalg.svd(sol.a_matrix, compute_uv=False)
    sigma_max, kappa = float(sigma[0]), float(sigma[0] / sigma[-1])
    # Stop once the true error is below stop_error: ||d|| >= sigma_min * error.
    tol_d = max(float(sigma[-1]) * stop_error, 1e-300)
    run_cfg = SolverConfig(sigma=cfg.sigma, backtrack=cfg.backtrack,
                           tolerance=tol_d, max_iterations=k_max,
                           step_mode="fixed", eta=cfg.eta)
    trace = _frozen_fixed_run(mop, gamma, lam, c, run_cfg, k_max, x0)

    xs = [r.x for r in trace.records] + [trace.final_x]
    errors = np.array([np.linalg.norm(x - sol.x_tik) for x in xs])
    live = errors[:-1] > 1e-13 * (1.0 + np.linalg.norm(sol.x_tik))
    ratios = np.where(live, errors[1:] / np.maximum(errors[:-1], 1e-300), np.nan)
    valid = ratios[~np.isnan(ratios)]
    fitted = float(np.exp(np.mean(np.log(np.maximum(valid, 1e-300))))) if valid.size else 0.0
    last = valid[-100:] if valid.size else np.array([1.0])
    ratio_std = float(np.std(last))
    monotone = bool(np.all(errors[1:] <= errors[:-1] * (1.0 + 1e-10)))

    run_len = 0
    violation = False
    for r in valid:
        run_len = run_len + 1 if r > 1.0 else 0
        if run_len >= 50:
            violation = True
            break

    eta_k = cfg.eta / sigma_max
    return RateReport(
        errors=errors,
        ratios=ratios,
        fitted_rate=fitted,
        ratio_std_last100=ratio_std,
        monotone=monotone,
        geometric=bool(monotone and valid.size and ratio_std < 0.05 * max(np.mean(last), 1e-300)),
        rate_violation=violation,
        kappa=kappa,
        sigma_max=sigma_max,
        final_error=float(errors[-1]),
        fixed_point_gap=float(np.linalg.norm(trace.final_x - sol.x_tik)),
        literal_growth_factor=float(1.0 + cfg.eta / kappa),
        trace=trace,
    )


def verify_staged_theorem6(mop: QuadraticMop, schedule: StageSchedule,
                           cfg: SolverConfig, x0: Optional[np.ndarray] = None
                           ) -> tuple[StageErrorBound, dict]:
    """Staged frozen-multiplier run checked against the stage error recursion.

    Measures epsilon_s (start-of-stage distance to the stage's regularized
    solution), e_s (drift between consecutive regularized solutions), the
    per-stage contraction factors, and the instance constants B_max and C;
    validates epsilon_{s+1} <= R_s epsilon_s + e_s + 1e-8 and
    e_s <= C |gamma_s - gamma_{s+1}| at every stage.
    """
    m = mop.n_objectives
    lam = np.full(m, 1.0 / m)
    c = schedule.terminal if schedule.terminal is not None else np.zeros(mop.dim)
    gammas = schedule.gammas
    iterations = tuple(s.iterations for s in schedule.stages)
    x_star = mop.least_squares_solution()

    rng = np.random.default_rng(1)
    x = (x_star + rng.normal(0, 1.0, mop.dim)) if x0 is None else np.asarray(x0, dtype=float).copy()

    sols = [tikhonov_solve(mop, g, lam, c) for g in gammas]
    eps, rates, Rs, stage_end_err = [], [], [], []
    run_cfg = SolverConfig(sigma=cfg.sigma, backtrack=cfg.backtrack,
                           tolerance=1e-300, max_iterations=cfg.max_iterations,
                           step_mode="fixed", eta=cfg.eta)
    trace = IterationTrace()
    for s, (gamma, k_s) in enumerate(zip(gammas, iterations)):
        eps.append(float(np.linalg.norm(x - sols[s].x_tik)))
        rho = max(abs(1.0 - cfg.eta), abs(1.0 - cfg.eta / sols[s].kappa))
        rates.append(rho * rho)
        Rs.append(rho ** k_s)
        trace = _frozen_fixed_run(mop, gamma, lam, c, run_cfg, k_s, x,
                                  stage_index=s, trace=trace)
        x = trace.final_x
        stage_end_err.append(float(np.linalg.norm(x - x_star)))

    e = [float(np.linalg.norm(sols[s].x_tik - sols[s + 1].x_tik))
         for s in range(len(gammas) - 1)]

    sys0 = sum(lam[j] * mop.gram[j] for j in range(m))
    eigs = np.linalg.eigvalsh(sys0)
    if eigs[0] <= 0:
        raise ValueError("staged bound needs a positive definite weighted Gram sum")
    b_max = 1.0 / float(eigs[0])
    c_const = (b_max ** 2
               * float(np.linalg.norm(sum(mop.gram), 2))
               * float(np.linalg.norm(sum(mop.rtilde)) ** 2)
               * float(np.linalg.norm(x_star - c)))

    bound = [eps[0]]
    for s in range(len(gammas) - 1):
        bound.append(Rs[s] * bound[s] + e[s])

    recursion_ok = all(
        eps[s + 1] <= Rs[s] * eps[s] + e[s] + 1e-8 for s in range(len(gammas) - 1)
    )
    lipschitz_ok = all(
        e[s] <= c_const * abs(gammas[s] - gammas[s + 1]) + 1e-12 for s in range(len(e))
    )
    bound_ok = all(eps[s] <= bound[s] + 1e-8 for s in range(len(eps)))
    final_error = stage_end_err[-1]
    gamma_final = gammas[-1]
    final_bound_ok = (final_error <= 1.1 * c_const * gamma_final) if gamma_final > 0 else None

    report = {
        "recursion_ok": recursion_ok,
        "lipschitz_ok": lipschitz_ok,
        "bound_ok": bound_ok,
        "final_error": final_error,
        "final_bound_ok": final_bound_ok,
        "stage_end_error_to_x_star": stage_end_err,
        "gamma_final": gamma_final,
        "trace": trace,
    }
    return StageErrorBound(
        gammas=tuple(gammas), iterations=iterations, rates=tuple(rates),
        R=tuple(Rs), epsilon=tuple(eps), e=tuple(e), bound=tuple(bound),
        b_max=b_max, c_const=c_const,
    ), report


def _dominates(a: np.ndarray, b: np.ndarray, slack: float = DOMINANCE_SLACK) -> bool:
    return bool(np.all(a <= b + slack) and np.any(a < b - slack))


def nondominated_filter(points: list[FrontPoint]) -> list[FrontPoint]:
    kept: list[FrontPoint] = []
    for p in points:
        if any(_dominates(q.objectives, p.objectives) for q in points):
            continue
        if any(np.allclose(q.objectives, p.objectives, atol=DOMINANCE_SLACK) for q in kept):
            continue
        kept.append(p)
    kept.sort(key=lambda p: tuple(p.objectives))
    return kept


def pareto_sweep(spec: ExperimentSpec, cfg: Optional[SolverConfig] = None,
                 failures: Optional[list] = None) -> list[FrontPoint]:
    """Run the chosen method from every start and return the sorted
    nondominated subset of final objective vectors.

    Individual run failures are recorded (appended to `failures` as
    (start_index, reason) when a list is passed) and excluded, never fatal.
    """
    cfg = cfg or SolverConfig(tolerance=1e-5, max_iterations=2000)
    objectives = spec.objectives()
    schedule = spec.schedule
    finals: list[FrontPoint] = []
    for idx, x0 in enumerate(spec.starts()):
        try:
            if spec.method == "mogd":
                trace = mogd_baseline(objectives, x0, cfg)
            elif spec.method == "moaocfgd":
                if schedule is None:
                    raise ValueError("moaocfgd sweep needs a schedule")
                trace = run_adaptive(objectives, x0, cfg, schedule)
            else:
                if len(objectives) != 1:
                    raise ValueError("subgradient sweep needs a scalar objective")
                trace = subgradient_baseline(objectives[0], x0, steps=cfg.max_iterations)
            if trace.termination == "error":
                if failures is not None:
                    failures.append((idx, trace.error or "run error"))
                continue
            xf = trace.final_x
            fvals = np.array([obj.value(xf) for obj in objectives])
            finals.append(FrontPoint(objectives=fvals, x=xf, start_index=idx,
                                     norm_d=float(trace.final_norm_d or np.nan)))
        except Exception as exc:
            if failures is not None:
                failures.append((idx, str(exc)))
            continue
    return nondominated_filter(finals)


def adrs(front: Sequence[np.ndarray], reference: Sequence[np.ndarray]) -> float:
    """Mean over reference points of the minimum range-normalized Chebyshev
    distance to the front.

    Normalization is the per-objective range of the reference set (1 where
    the range is zero); 0 exactly when every reference point appears in the
    front.
    """
    ref = np.atleast_2d(np.asarray(list(reference), dtype=float))
    if ref.size == 0:
        raise ValueError("reference set must be nonempty")
    fr = np.atleast_2d(np.asarray(list(front), dtype=float))
    if fr.size == 0:
        raise ValueError("front must be nonempty")
    spread = ref.max(axis=0) - ref.min(axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    dists = [
        float(np.min(np.max(np.abs(fr - r[None, :]) / spread[None, :], axis=1)))
        for r in ref
    ]
    return float(np.mean(dists))


def _outer_regularized(mop: QuadraticMop, gamma: float, c: np.ndarray) -> list[ObjectiveModel]:
    """Rank-one (outer-product) Tikhonov objectives used by the GD baseline."""
    models = []
    for j in range(mop.n_objectives):
        A, b, r = mop.gram[j], mop.offsets[j], mop.rtilde[j]

        def val(x, j=j, r=r):
            return mop.objective_value(j, x) + 0.5 * gamma * float(r @ (x - c)) ** 2

        def grad(x, A=A, b=b, r=r):
            return A @ x + b + gamma * r * float(r @ (x - c))

        def hess(x, A=A, r=r):
            return A + gamma * np.outer(r, r)

        models.append(ObjectiveModel(val, grad, hess, kind="quadratic",
                                     dim=mop.dim, validate=False))
    return models


def comparison_table(mop: QuadraticMop, gamma_values: Sequence[float],
                     cfg: Optional[SolverConfig] = None,
                     x0: Optional[np.ndarray] = None) -> list[dict]:
    """Rows (gamma, method, condition_number, iterations, wall_seconds,
    final_error) comparing classical descent on the outer-product-regularized
    objectives against the fractional method (diagonal regularizer).

    Condition numbers are those of each method's own effective system matrix
    at uniform multipliers; final_error is the distance to the Tikhonov
    solution consistent with the run's final multipliers.
    """
    cfg = cfg or SolverConfig(tolerance=1e-4, max_iterations=2000)
    x0 = np.full(mop.dim, 5.5) if x0 is None else np.asarray(x0, dtype=float)
    m = mop.n_objectives
    lam_uniform = np.full(m, 1.0 / m)
    c = np.zeros(mop.dim)
    rows = []
    for gamma in gamma_values:
        # Classical gradient descent on the outer-product Tikhonov objectives.
        mogd_objs = _outer_regularized(mop, gamma, c)
        system_gd = sum(lam_uniform[j] * (mop.gram[j] + gamma * np.outer(mop.rtilde[j], mop.rtilde[j]))
                        for j in range(m))
        t0 = time.perf_counter()
        trace_gd = mogd_baseline(mogd_objs, x0, cfg)
        wall_gd = time.perf_counter() - t0
        lam_final = _final_multipliers(mogd_objs, trace_gd, m)
        sol_gd = tikhonov_solve(mop, gamma, lam_final, c, regularizer="outer")
        rows.append({
            "gamma": gamma, "method": "mogd",
            "condition_number": condition_number(system_gd),
            "iterations": trace_gd.iterations, "wall_seconds": wall_gd,
            "final_error": float(np.linalg.norm(trace_gd.final_x - sol_gd.x_tik)),
        })

        # Fractional method: alpha = 0.5 with beta matched to gamma.
        alpha = 0.5
        frac = FractionalConfig(alpha=alpha, beta=gamma + (1 - alpha) / (2 - alpha),
                                terminal=c, degenerate_policy="clamp")
        merit = mop.objectives(gamma, c)
        system_fr = sum(lam_uniform[j] * (mop.gram[j] + gamma * np.diag(mop.rtilde[j] ** 2))
                        for j in range(m))
        t0 = time.perf_counter()
        trace_fr = run_single_stage(merit, mop, x0, cfg, frac, cfg.max_iterations)
        wall_fr = time.perf_counter() - t0
        lam_final = _final_multipliers(merit, trace_fr, m)
        sol_fr = tikhonov_solve(mop, gamma, lam_final, c, regularizer="diag")
        rows.append({
            "gamma": gamma, "method": "moaocfgd",
            "condition_number": condition_number(system_fr),
            "iterations": trace_fr.iterations, "wall_seconds": wall_fr,
            "final_error": float(np.linalg.norm(trace_fr.final_x - sol_fr.x_tik)),
        })
    return rows


def _final_multipliers(objectives, trace: IterationTrace, m: int) -> np.ndarray:
    try:
        grads = np.array([obj.gradient(trace.final_x) for obj in objectives])
        return solve_direction(grads).multipliers
    except Exception:
        return np.full(m, 1.0 / m)
