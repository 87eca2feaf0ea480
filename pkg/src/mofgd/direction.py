"""Common descent direction via the min-norm point of the gradient hull.

The primal subproblem

    min_{t, d}  t + 1/2 ||d||^2   s.t.  g_j^T d <= t,  j = 1..m

is solved through its dual: minimize 1/2 ||sum_j lambda_j g_j||^2 over the
unit simplex, then d = -sum_j lambda_j g_j and t = max_j g_j^T d.  The dual
is a tiny simplex-constrained QP handled by projected gradient descent with
exact Euclidean simplex projection, followed by an exact active-support
polish so degenerate instances still reach the target duality gap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DirectionAccuracyError",
    "DirectionResult",
    "solve_direction",
    "solve_direction_m2_closed_form",
    "brute_force_direction",
]

GAP_TARGET = 1e-12
GAP_FAIL = 1e-8
MAX_INNER = 10_000


class DirectionAccuracyError(RuntimeError):
    """Inner iteration budget exhausted with duality gap above 1e-8."""

    def __init__(self, message: str, best: "DirectionResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class DirectionResult:
    """Subproblem solution (t, d, lambda) with verification data.

    theta = t + 1/2 ||d||^2 is the primal objective (<= 0 at any optimum);
    kkt_residual is the largest violation over the simplex constraints,
    stationarity d = -sum lambda_j g_j, feasibility g_j^T d <= t, and
    complementary slackness.
    """

    t_value: float
    direction: np.ndarray
    multipliers: np.ndarray
    kkt_residual: float
    theta: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.direction))


def _simplex_project(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-based, exact)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _result_from(G: np.ndarray, lam: np.ndarray) -> DirectionResult:
    d = -G.T @ lam
    slopes = G @ d
    t = float(slopes.max())
    feas = float(np.maximum(slopes - t, 0.0).max())
    comp = float(np.abs(lam * (slopes - t)).max())
    simplex = max(abs(float(lam.sum()) - 1.0), float(np.maximum(-lam, 0.0).max()))
    # Stationarity d + sum lambda_j g_j = 0 holds by construction.
    kkt = max(feas, comp, simplex)
    theta = t + 0.5 * float(d @ d)
    return DirectionResult(t_value=t, direction=d, multipliers=lam,
                           kkt_residual=kkt, theta=theta)


def _dual_gap(K: np.ndarray, lam: np.ndarray) -> float:
    grad = K @ lam
    return float(lam @ grad - grad.min())


def _support_polish(K: np.ndarray, lam: np.ndarray, obj: float) -> tuple[np.ndarray, float]:
    """Try exact KKT solves on candidate supports; keep the best valid one.

    Candidates are the current support and, for small m, every support.  A
    candidate is accepted only if it is simplex-feasible and improves the
    dual objective.
    """
    m = K.shape[0]
    candidates = [tuple(np.nonzero(lam > 1e-12)[0])]
    if m <= 6:
        idx = range(m)
        candidates += [s for r in range(1, m + 1) for s in itertools.combinations(idx, r)]
    best_lam, best_obj = lam, obj
    seen = set()
    for sup in candidates:
        if not sup or sup in seen:
            continue
        seen.add(sup)
        sup = list(sup)
        k = len(sup)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = K[np.ix_(sup, sup)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        cand = np.zeros(m)
        cand[sup] = sol[:k]
        if cand.min() < -1e-12:
            continue
        cand = _simplex_project(cand)
        val = 0.5 * float(cand @ K @ cand)
        if val < best_obj - 1e-18 or (val <= best_obj and _dual_gap(K, cand) < _dual_gap(K, best_lam)):
            best_lam, best_obj = cand, val
    return best_lam, best_obj


def solve_direction(gradients) -> DirectionResult:
    """Solve the direction subproblem for a list of m gradient n-vectors.

    Projected gradient on the dual simplex QP (uniform warm start, step
    1/||K||, Frank-Wolfe gap target 1e-12 at the squared-gradient scale,
    10,000-iteration budget) plus an exact support polish.  Raises
    DirectionAccuracyError carrying the best iterate if the scaled gap still
    exceeds 1e-8.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if not np.all(np.isfinite(G)):
        raise ValueError("gradients must be finite")
    m = G.shape[0]
    if m == 1:
        return _result_from(G, np.ones(1))

    K = G @ G.T
    # The dual objective scales as ||g||^2, so the gap thresholds apply at the
    # problem's own scale; otherwise scale covariance (theta(s g) = s^2
    # theta(g)) would be unreachable in floating point for large gradients.
    scale = max(1.0, float(np.mean(np.diag(K))))
    Kn = K / scale
    lam = np.full(m, 1.0 / m)
    lipschitz = float(np.linalg.eigvalsh(Kn)[-1])
    if lipschitz <= 0.0:
        # All gradients are zero: any simplex point is optimal.
        return _result_from(G, lam)
    step = 1.0 / lipschitz
    gap = _dual_gap(Kn, lam)
    for _ in range(MAX_INNER):
        if gap <= GAP_TARGET:
            break
        lam = _simplex_project(lam - step * (Kn @ lam))
        gap = _dual_gap(Kn, lam)

    lam, _ = _support_polish(Kn, lam, 0.5 * float(lam @ Kn @ lam))
    gap = _dual_gap(Kn, lam)

    result = _result_from(G, lam)
    if gap > GAP_FAIL:
        raise DirectionAccuracyError(
            f"scaled duality gap {gap:.3e} above {GAP_FAIL} after {MAX_INNER} iterations",
            result,
        )
    assert result.kkt_residual <= 1e-8 * scale, \
        f"KKT residual {result.kkt_residual:.3e} at scale {scale:.3e}"
    return result


def solve_direction_m2_closed_form(g1, g2) -> DirectionResult:
    """Exact two-objective solution: the min-norm point of a segment.

    lambda_1 = clamp((g2 - g1)^T g2 / ||g1 - g2||^2, 0, 1), with the
    degenerate g1 = g2 case giving lambda_1 = 1.
    """
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    diff = g1 - g2
    den = float(diff @ diff)
    lam1 = 1.0 if den == 0.0 else min(1.0, max(0.0, float((g2 - g1) @ g2) / den))
    return _result_from(np.vstack([g1, g2]), np.array([lam1, 1.0 - lam1]))


def _pairs_by_sum(total: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (i, j) >= 0 with i + j <= total, sorted by s = i + j ascending."""
    counts = np.arange(total + 1, dtype=np.int64) + 1  # s = i+j has s+1 pairs
    s = np.repeat(np.arange(total + 1, dtype=np.int64), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    i = np.arange(s.size, dtype=np.int64) - np.repeat(offsets, counts)
    return i, s - i, s


def _lattice_blocks(total: int, parts: int):
    """Yield integer weight blocks (rows summing to total) without
    materializing the full lattice for parts >= 4."""
    if parts == 1:
        yield np.array([[total]], dtype=np.int64)
        return
    if parts == 2:
        i = np.arange(total + 1, dtype=np.int64)
        yield np.column_stack([i, total - i])
        return
    if parts == 3:
        i, j, s = _pairs_by_sum(total)
        yield np.column_stack([i, j, total - s])
        return
    if parts == 4:
        i, j, s = _pairs_by_sum(total)
        for first in range(total + 1):
            rem = total - first
            cut = int(np.searchsorted(s, rem, side="right"))
            yield np.column_stack([
                np.full(cut, first, dtype=np.int64),
                i[:cut], j[:cut], rem - s[:cut],
            ])
        return
    for first in range(total + 1):
        for block in _lattice_blocks(total - first, parts - 1):
            yield np.column_stack([np.full(len(block), first, dtype=np.int64), block])


def brute_force_direction(gradients, grid_resolution: int) -> DirectionResult:
    """Exhaustive dual minimization over the simplex lattice {w/R : |w| = R}.

    Test oracle only; refuses m > 6 to bound the combinatorial cost.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    m = G.shape[0]
    if m > 6:
        raise ValueError(f"brute force refused for m = {m} > 6 objectives")
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be positive")
    best_val, best_w = np.inf, None
    for block in _lattice_blocks(grid_resolution, m):
        V = block.astype(float) @ G
        vals = np.einsum("ij,ij->i", V, V)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_w = float(vals[k]), block[k].copy()
    lam = best_w.astype(float) / grid_resolution
    return _result_from(G, lam)
