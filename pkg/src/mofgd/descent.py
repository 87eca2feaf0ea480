"""Descent iteration with fractional gradients, Armijo backtracking and stages.

One iteration at x: evaluate the per-objective (fractional) gradients, solve
the direction subproblem for (t, d, lambda), stop if ||d|| < tolerance, pick
a step by Armijo backtracking over {1, r, r^2, ...} (or a fixed eta/sigma_max
step for rate studies) and move to x + eta*d.

Stages: a schedule of (alpha_s, beta_s, k_s) triples runs the iteration in
segments, each continuing from the previous stage's final point.  Each stage
induces the regularizer weight gamma_s = beta_s - (1-alpha_s)/(2-alpha_s);
for quadratic objectives the stage direction is exactly the gradient of the
stage-regularized merit

    f_j(x) + gamma_s/2 * sum_i H_ii (x_i - c_i)^2,

so the line search tests that merit (the raw objectives would reject every
step near the stage's own attractor, where the pull term dominates).  For
non-quadratic objectives the raw values are used.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .direction import DirectionAccuracyError, DirectionResult, solve_direction
from .fractional import FractionalConfig, modified_fractional_gradient
from .problems import ObjectiveModel, QuadraticMop, quadratic_effective_gradient

__all__ = [
    "LineSearchError",
    "SolverConfig",
    "Stage",
    "StageSchedule",
    "IterationRecord",
    "IterationTrace",
    "armijo_step",
    "run_single_stage",
    "run_adaptive",
    "regularized_merit",
]

MAX_BACKTRACKS = 60


class LineSearchError(RuntimeError):
    """No Armijo-acceptable step within 60 halvings (gradient/model mismatch)."""


@dataclass(frozen=True)
class SolverConfig:
    """Armijo and termination parameters of one solver run."""

    sigma: float = 0.1
    backtrack: float = 0.5
    tolerance: float = 1e-6
    max_iterations: int = 1000
    step_mode: str = "backtracking"
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack ratio must lie in (0, 1), got {self.backtrack}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.step_mode not in ("backtracking", "fixed"):
            raise ValueError(f"unknown step_mode {self.step_mode!r}")
        if self.step_mode == "fixed" and not 0.0 < self.eta < 2.0:
            raise ValueError(f"fixed-step eta must lie in (0, 2), got {self.eta}")


@dataclass(frozen=True)
class Stage:
    alpha: float
    beta: float
    iterations: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"stage alpha must lie in (0, 1], got {self.alpha}")
        lower = (1.0 - self.alpha) / (2.0 - self.alpha)
        if self.beta < lower - 1e-12:
            raise ValueError(
                f"stage beta must be >= (1-alpha)/(2-alpha) = {lower:.6g}, got {self.beta}"
            )
        if self.iterations < 1:
            raise ValueError("stage iteration count must be positive")

    @property
    def gamma(self) -> float:
        return self.beta - (1.0 - self.alpha) / (2.0 - self.alpha)


@dataclass(frozen=True)
class StageSchedule:
    """Sequence of (alpha_s, beta_s, k_s) with a fixed or adaptive terminal."""

    stages: tuple[Stage, ...]
    terminal: Optional[np.ndarray] = None
    memory_length: Optional[int] = None

    def __post_init__(self):
        if not self.stages:
            raise ValueError("schedule needs at least one stage")
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.terminal is not None:
            object.__setattr__(self, "terminal", np.asarray(self.terminal, dtype=float))
        if self.memory_length is not None and self.memory_length < 1:
            raise ValueError("memory_length must be positive")

    @property
    def gammas(self) -> tuple[float, ...]:
        return tuple(s.gamma for s in self.stages)

    @classmethod
    def from_gammas(cls, alphas: Sequence[float], gammas: Sequence[float],
                    iterations: Sequence[int], terminal=None, memory_length=None) -> "StageSchedule":
        """Build stages from target regularizers: beta_s = gamma_s + (1-a_s)/(2-a_s)."""
        stages = tuple(
            Stage(a, g + (1.0 - a) / (2.0 - a), int(k))
            for a, g, k in zip(alphas, gammas, iterations)
        )
        return cls(stages=stages, terminal=terminal, memory_length=memory_length)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    stage: int
    x: np.ndarray
    f_values: np.ndarray
    t_value: float
    norm_d: float
    eta: float
    backtracks: int
    wall: float


@dataclass
class IterationTrace:
    """Per-iteration history of one run. termination: tolerance | max_iter | error."""

    records: list[IterationRecord] = field(default_factory=list)
    termination: str = "max_iter"
    error: Optional[str] = None
    notes: list[str] = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    final_norm_d: Optional[float] = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    def iterates(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    def stage_starts(self) -> list[int]:
        starts, seen = [], set()
        for idx, r in enumerate(self.records):
            if r.stage not in seen:
                seen.add(r.stage)
                starts.append(idx)
        return starts

    def to_csv(self, path) -> None:
        """Column order: k, s, eta, t, norm_d, f_1..f_m, x_1..x_n."""
        if not self.records:
            raise ValueError("empty trace")
        m = self.records[0].f_values.size
        n = self.records[0].x.size
        header = (["k", "s", "eta", "t", "norm_d"]
                  + [f"f_{j + 1}" for j in range(m)]
                  + [f"x_{i + 1}" for i in range(n)])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for r in self.records:
                writer.writerow(
                    [r.k, r.stage, repr(r.eta), repr(r.t_value), repr(r.norm_d)]
                    + [repr(float(v)) for v in r.f_values]
                    + [repr(float(v)) for v in r.x]
                )

    def summary(self) -> dict:
        out = {
            "iterations": self.iterations,
            "termination": self.termination,
            "error": self.error,
            "final_norm_d": self.final_norm_d,
            "notes": list(self.notes),
        }
        if self.final_x is not None:
            out["final_x"] = [float(v) for v in self.final_x]
        if self.records:
            out["final_f"] = [float(v) for v in self.records[-1].f_values]
        return out


def armijo_step(objectives: Sequence[ObjectiveModel], x: np.ndarray,
                direction: DirectionResult, cfg: SolverConfig) -> tuple[float, np.ndarray, int]:
    """First eta in {1, r, r^2, ...} with f_j(x + eta d) <= f_j(x) + sigma*eta*t for all j.

    Returns (eta, x_next, backtrack_count); raises LineSearchError after 60
    rejected halvings.
    """
    if not direction.t_value < 0.0:
        raise ValueError("line search requires a descent direction (t < 0)")
    d, t = direction.direction, direction.t_value
    f0 = np.array([obj.value(x) for obj in objectives])
    eta = 1.0
    for backtracks in range(MAX_BACKTRACKS + 1):
        x_next = x + eta * d
        if all(obj.value(x_next) <= f0[j] + cfg.sigma * eta * t
               for j, obj in enumerate(objectives)):
            return eta, x_next, backtracks
        eta *= cfg.backtrack
    raise LineSearchError(
        f"no acceptable step within {MAX_BACKTRACKS} halvings at x = {x} "
        "(direction is not a descent direction for the merit objectives)"
    )


def _quadratic_closed_form_supplier(objectives):
    """Effective gradients for quadratic-kind objectives via their Hessians."""
    hessians = [np.asarray(obj.hessian(np.zeros(obj.dim)), dtype=float) for obj in objectives]
    diags = [np.diag(H) for H in hessians]

    def supply(x, frac):
        c = np.broadcast_to(frac.terminal, x.shape)
        pull = frac.gamma_alpha_beta * (x - c)
        return np.array([
            np.asarray(obj.gradient(x), dtype=float) + dj * pull
            for obj, dj in zip(objectives, diags)
        ])

    return supply


def _gradient_supplier(objectives, mop: Optional[QuadraticMop]):
    """Returns supply(x, frac) -> (m, n) array of modified fractional gradients."""
    if mop is not None:
        def supply(x, frac):
            return np.array([
                quadratic_effective_gradient(mop, j, frac, x)
                for j in range(mop.n_objectives)
            ])
        return supply
    if all(obj.kind == "quadratic" for obj in objectives):
        return _quadratic_closed_form_supplier(objectives)

    def supply(x, frac):
        return np.array([modified_fractional_gradient(obj, frac, x) for obj in objectives])

    return supply


def regularized_merit(obj: ObjectiveModel, gamma: float, terminal: np.ndarray) -> ObjectiveModel:
    """Quadratic objective plus the stage penalty gamma/2 * sum H_ii (x_i-c_i)^2."""
    if gamma == 0.0:
        return obj
    c = np.asarray(terminal, dtype=float)
    dh = np.diag(np.asarray(obj.hessian(c), dtype=float))

    def val(x):
        return obj.value(x) + 0.5 * gamma * float(dh @ (x - c) ** 2)

    def grad(x):
        return np.asarray(obj.gradient(x), dtype=float) + gamma * dh * (x - c)

    def hess(x):
        return np.asarray(obj.hessian(x), dtype=float) + gamma * np.diag(dh)

    return ObjectiveModel(val, grad, hess, kind="quadratic", dim=obj.dim, validate=False)


def _sigma_max(objectives, mop, frac, lam) -> float:
    """Largest singular value of the multiplier-weighted effective system matrix."""
    gamma = frac.gamma_alpha_beta
    if mop is not None:
        system = sum(
            lam[j] * (mop.gram[j] + gamma * np.diag(mop.rtilde[j] ** 2))
            for j in range(mop.n_objectives)
        )
    else:
        if not all(obj.kind == "quadratic" for obj in objectives):
            raise ValueError("fixed-step mode needs quadratic objectives or a QuadraticMop")
        mats = [np.asarray(obj.hessian(np.zeros(obj.dim)), dtype=float) for obj in objectives]
        system = sum(lam[j] * (H + gamma * np.diag(np.diag(H))) for j, H in enumerate(mats))
    return float(np.linalg.svd(system, compute_uv=False)[0])


def run_single_stage(objectives: Sequence[ObjectiveModel],
                     mop_closed_form: Optional[QuadraticMop],
                     x0: np.ndarray,
                     cfg: SolverConfig,
                     frac: FractionalConfig,
                     k_max: int,
                     frozen_multipliers: Optional[np.ndarray] = None,
                     stage_index: int = 0,
                     trace: Optional[IterationTrace] = None,
                     k_offset: int = 0,
                     history: Optional[list] = None) -> IterationTrace:
    """Iterate x <- x + eta*d for up to k_max steps or until ||d|| < tolerance.

    objectives supply the Armijo merit values and the trace's f columns;
    gradients come from mop_closed_form when given, else from the objectives
    themselves (closed form for quadratic kind, singular quadrature
    otherwise).  frozen_multipliers skips the subproblem and uses a fixed
    convex combination (theory-check mode).  history, when given, collects
    iterates for adaptive-terminal staging.
    """
    x = np.asarray(x0, dtype=float).copy()
    trace = trace if trace is not None else IterationTrace()
    supply = _gradient_supplier(objectives, mop_closed_form)
    lam = None if frozen_multipliers is None else np.asarray(frozen_multipliers, dtype=float)

    eta_fixed = None
    if cfg.step_mode == "fixed":
        lam_for_sigma = lam if lam is not None else np.full(len(objectives), 1.0 / len(objectives))
        eta_fixed = cfg.eta / _sigma_max(objectives, mop_closed_form, frac, lam_for_sigma)

    if history is not None and not history:
        history.append(x.copy())

    trace.termination = "max_iter"
    for k in range(k_max + 1):
        start = time.perf_counter()
        frac_k = frac
        if frac.memory_length is not None and history:
            past = history[max(0, len(history) - 1 - frac.memory_length)]
            frac_k = FractionalConfig(frac.alpha, frac.beta, past,
                                      memory_length=frac.memory_length,
                                      degenerate_policy="clamp")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            grads = supply(x, frac_k)
        for w in caught:
            trace.notes.append(str(w.message))

        if lam is None:
            try:
                direction = solve_direction(grads)
            except DirectionAccuracyError as exc:
                trace.termination = "error"
                trace.error = str(exc)
                trace.final_x = x.copy()
                return trace
        else:
            d = -grads.T @ lam
            slopes = grads @ d
            direction = DirectionResult(
                t_value=float(slopes.max()), direction=d, multipliers=lam,
                kkt_residual=float("nan"), theta=float(slopes.max()) + 0.5 * float(d @ d),
            )

        norm_d = direction.norm
        trace.final_x = x.copy()
        trace.final_norm_d = norm_d
        if norm_d < cfg.tolerance:
            trace.termination = "tolerance"
            return trace
        if k == k_max:
            trace.termination = "max_iter"
            return trace

        try:
            if eta_fixed is not None:
                eta, x_next, backtracks = eta_fixed, x + eta_fixed * direction.direction, 0
            else:
                eta, x_next, backtracks = armijo_step(objectives, x, direction, cfg)
        except (LineSearchError, ValueError) as exc:
            trace.termination = "error"
            trace.error = str(exc)
            return trace

        wall = time.perf_counter() - start
        trace.records.append(IterationRecord(
            k=k_offset + k, stage=stage_index, x=x.copy(),
            f_values=np.array([obj.value(x) for obj in objectives]),
            t_value=direction.t_value, norm_d=norm_d,
            eta=eta, backtracks=backtracks, wall=wall,
        ))
        x = x_next
        if history is not None:
            history.append(x.copy())
        trace.final_x = x.copy()
    return trace


def run_adaptive(objectives: Sequence[ObjectiveModel],
                 x0: np.ndarray,
                 cfg: SolverConfig,
                 schedule: StageSchedule,
                 mop_closed_form: Optional[QuadraticMop] = None,
                 frozen_multipliers: Optional[np.ndarray] = None,
                 merit_mode: str = "auto") -> IterationTrace:
    """Run the stages of a schedule sequentially, chaining the iterates.

    merit_mode: "raw" keeps the passed objectives for every stage;
    "regularized" wraps quadratic objectives with the stage penalty so the
    line search matches the stage gradients; "auto" regularizes exactly when
    every objective is quadratic.  The terminal is the schedule's fixed c
    (zeros when omitted) or, with memory_length L, the iterate L steps back.
    """
    if merit_mode not in ("auto", "raw", "regularized"):
        raise ValueError(f"unknown merit_mode {merit_mode!r}")
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    c = schedule.terminal if schedule.terminal is not None else np.zeros(n)
    all_quadratic = all(obj.kind == "quadratic" for obj in objectives)
    regularize = merit_mode == "regularized" or (merit_mode == "auto" and all_quadratic)

    trace = IterationTrace()
    history: list = []
    x = x0
    for s, stage in enumerate(schedule.stages):
        frac = FractionalConfig(
            alpha=stage.alpha, beta=stage.beta, terminal=c,
            memory_length=schedule.memory_length, degenerate_policy="clamp",
        )
        merit = objectives
        if regularize and stage.gamma != 0.0:
            merit = [regularized_merit(obj, stage.gamma, c) for obj in objectives]
        k_offset = trace.iterations
        run_single_stage(
            merit, mop_closed_form, x, cfg, frac, stage.iterations,
            frozen_multipliers=frozen_multipliers, stage_index=s,
            trace=trace, k_offset=k_offset, history=history,
        )
        x = trace.final_x
        if trace.termination == "error":
            return trace
    return trace
