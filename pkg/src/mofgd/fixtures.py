"""Named analytic benchmark problems used by the lab and CLI.

example1:  f(x) = 4 x1^2 + x2^2 - 2 x1 x2 - 3 x1 + 4 x2
           classical critical point (-1/6, -13/6), value -49/12.
example2:  f(x) = x1^2 + 4 x2^2 - 2 x1 x2 - 3 x1 + 4 x2
           classical critical point (4/3, -1/6), value -7/3.
           The Pareto fixture pairs example1 and example2.
example3_nonsmooth:  f(x) = max(5 x1 + x2, x1^2 + x2^2)
           global minimum 0 at the origin (the max dominates ||x||^2 and
           both pieces vanish there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descent import StageSchedule
from .problems import ObjectiveModel, PiecewiseMaxObjective, quadratic_objective

__all__ = [
    "EXAMPLE1_MATRIX",
    "EXAMPLE1_OFFSET",
    "EXAMPLE2_MATRIX",
    "EXAMPLE2_OFFSET",
    "example1_objective",
    "example2_objective",
    "example3_objective",
    "pareto_pair",
    "fixture_objectives",
    "classical_critical_point",
    "fractional_critical_point",
    "recover_terminal",
    "default_schedule",
    "EXAMPLE1_PAPER_POINT",
    "EXAMPLE1_FRACTIONAL_ALPHA",
]

EXAMPLE1_MATRIX = np.array([[8.0, -2.0], [-2.0, 2.0]])
EXAMPLE1_OFFSET = np.array([-3.0, 4.0])
EXAMPLE2_MATRIX = np.array([[2.0, -2.0], [-2.0, 8.0]])
EXAMPLE2_OFFSET = np.array([-3.0, 4.0])

# Reported plain-fractional critical point at alpha = 0.5 (terminal unstated;
# see recover_terminal for the terminal consistent with it).
EXAMPLE1_PAPER_POINT = np.array([0.34313689, -0.12745096])
EXAMPLE1_FRACTIONAL_ALPHA = 0.5


def example1_objective() -> ObjectiveModel:
    return quadratic_objective(EXAMPLE1_MATRIX, EXAMPLE1_OFFSET)


def example2_objective() -> ObjectiveModel:
    return quadratic_objective(EXAMPLE2_MATRIX, EXAMPLE2_OFFSET)


def example3_objective() -> PiecewiseMaxObjective:
    """max(5 x1 + x2, x1^2 + x2^2) with analytic piece derivatives."""
    linear = (
        lambda x: 5.0 * x[0] + x[1],
        lambda x: np.array([5.0, 1.0]),
        lambda x: np.zeros((2, 2)),
    )
    quad = (
        lambda x: float(x[0] ** 2 + x[1] ** 2),
        lambda x: 2.0 * np.asarray(x, dtype=float),
        lambda x: 2.0 * np.eye(2),
    )
    obj = PiecewiseMaxObjective([linear, quad], dim=2)
    # The restriction kinks solve a quadratic equation exactly; replace the
    # sampling locator with the closed form.
    object.__setattr__(obj, "kink_locator", _example3_kinks(obj))
    return obj


def _example3_kinks(obj: PiecewiseMaxObjective):
    def locate(x, i, lo, hi):
        x = np.asarray(x, dtype=float)
        other = x[1 - i]
        # 5 t + other = t^2 + other^2 (i = 0) or 5 other + t = other^2 + t^2.
        if i == 0:
            a, b, c = 1.0, -5.0, other ** 2 - other
        else:
            a, b, c = 1.0, -1.0, other ** 2 - 5.0 * other
        disc = b * b - 4.0 * a * c
        roots = []
        if disc >= 0.0:
            r = math.sqrt(disc)
            roots = sorted(((-b - r) / (2 * a), (-b + r) / (2 * a)))
        ks = tuple(t for t in roots if lo < t < hi)
        return obj._active(x), ks

    return locate


def pareto_pair() -> list[ObjectiveModel]:
    """Bi-objective fixture: example1 and example2 share their linear term,
    so their minimizers differ and the efficient set is a curve between them."""
    return [example1_objective(), example2_objective()]


def fixture_objectives(name: str) -> list[ObjectiveModel]:
    if name == "example1":
        return [example1_objective()]
    if name == "example2":
        return [example2_objective()]
    if name == "example2_pair":
        return pareto_pair()
    if name == "example3_nonsmooth":
        return [example3_objective()]
    raise ValueError(f"unknown fixture {name!r}")


def classical_critical_point(a_matrix: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve grad f = A x + b = 0 and return (x*, f(x*))."""
    x = np.linalg.solve(a_matrix, -b)
    return x, float(0.5 * x @ a_matrix @ x + b @ x)


def fractional_critical_point(a_matrix: np.ndarray, b: np.ndarray, alpha: float,
                              terminal: np.ndarray) -> np.ndarray:
    """Root of the plain fractional gradient of a quadratic (closed form).

    The de-scaled plain fractional gradient is
    (A x + b) - gamma_alpha * diag(diag(A)) (x - c),  gamma_alpha = (1-a)/(2-a),
    so the root solves (A - gamma_alpha D) x = -b - gamma_alpha D c.
    """
    ga = (1.0 - alpha) / (2.0 - alpha)
    D = np.diag(np.diag(a_matrix))
    c = np.asarray(terminal, dtype=float)
    return np.linalg.solve(a_matrix - ga * D, -b - ga * (D @ c))


def recover_terminal(a_matrix: np.ndarray, b: np.ndarray, alpha: float,
                     x_point: np.ndarray) -> np.ndarray:
    """Terminal c making x_point a root of the plain fractional gradient.

    Coordinate-wise inversion of the root equation:
    c_i = x_i - (A x + b)_i / (gamma_alpha * A_ii).
    """
    ga = (1.0 - alpha) / (2.0 - alpha)
    x_point = np.asarray(x_point, dtype=float)
    g = a_matrix @ x_point + b
    return x_point - g / (ga * np.diag(a_matrix))


def default_schedule(terminal=None, iterations=(50, 50, 100)) -> StageSchedule:
    """The three-stage alpha = {0.5, 0.7, 0.9} schedule with regularizers
    {0.1, 0.01, 0} (nonincreasing to zero, as the staged theory requires)."""
    return StageSchedule.from_gammas(
        alphas=(0.5, 0.7, 0.9),
        gammas=(0.1, 0.01, 0.0),
        iterations=iterations,
        terminal=np.zeros(2) if terminal is None else terminal,
    )
