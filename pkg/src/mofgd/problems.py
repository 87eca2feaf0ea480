"""Multi-objective problem representations.

Covers general smooth objectives, piecewise-smooth max-type objectives, and
the quadratic least-squares family

    f_j(x) = 1/2 ||W_j^T x - y_j||^2  =  1/2 x^T A_j x + b_j^T x + const,
    A_j = W_j W_j^T,  b_j = -W_j y_j,

together with its Tikhonov-regularized closed-form solutions.  The
regularizer attached to objective j is the diagonal quadratic penalty

    gamma/2 * || diag(rtilde_j) (x - c) ||^2,   rtilde_j,i = sqrt((A_j)_ii),

whose gradient gamma * diag(diag(A_j)) (x - c) is exactly the pull term the
fractional gradient of f_j produces; a rank-one outer-product variant
(rtilde_j rtilde_j^T) is available behind a flag for comparison runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fractional import FractionalConfig

__all__ = [
    "SingularSystemError",
    "ObjectiveModel",
    "PiecewiseMaxObjective",
    "QuadraticMop",
    "TikhonovSolution",
    "quadratic_objective",
    "random_quadratic_mop",
    "quadratic_effective_gradient",
    "tikhonov_solve",
    "condition_number",
    "save_mop",
    "load_mop",
]

_FD_CHECK_STEP = 1e-6
_FD_CHECK_TOL = 1e-5


class SingularSystemError(np.linalg.LinAlgError):
    """Regularized normal equations are singular (gamma = 0 with a rank-deficient Gram sum)."""


@dataclass(frozen=True)
class ObjectiveModel:
    """One objective: value, classical gradient, optional Hessian.

    kind is "quadratic" (constant symmetric Hessian), "smooth", or
    "piecewise"; piecewise objectives also carry a kink_locator with
    signature (x, i, lo, hi) -> (active_piece_index, kink_abscissae) giving
    the non-differentiability points of the coordinate-i restriction inside
    (lo, hi).

    The gradient is validated against central finite differences of the
    value at construction (10 seeded points; piecewise kinds are checked at
    points where the active piece is locally stable).
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "smooth"
    kink_locator: Optional[Callable] = None
    dim: int = 2
    validate: bool = True

    def __post_init__(self):
        if self.kind not in ("quadratic", "smooth", "piecewise"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind == "quadratic" and self.hessian is None:
            raise ValueError("quadratic objectives must provide a Hessian")
        if self.validate:
            self._check_gradient()

    def _check_gradient(self):
        rng = np.random.default_rng(1234)
        checked = 0
        while checked < 10:
            x = rng.uniform(-2.0, 2.0, self.dim)
            g = np.asarray(self.gradient(x), dtype=float)
            fd = np.empty_like(g)
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = _FD_CHECK_STEP
                fd[i] = (self.value(x + e) - self.value(x - e)) / (2 * _FD_CHECK_STEP)
            if self.kind == "piecewise" and self.kink_locator is not None:
                # Skip draws whose FD stencil straddles a kink.
                near_kink = False
                for i in range(self.dim):
                    _, ks = self.kink_locator(x, i, x[i] - 10 * _FD_CHECK_STEP, x[i] + 10 * _FD_CHECK_STEP)
                    near_kink = near_kink or len(ks) > 0
                if near_kink:
                    continue
            if not np.allclose(g, fd, atol=_FD_CHECK_TOL, rtol=_FD_CHECK_TOL):
                raise ValueError(
                    f"gradient disagrees with finite differences at x = {x}: {g} vs {fd}"
                )
            checked += 1


def quadratic_objective(a_matrix: np.ndarray, b: np.ndarray, const: float = 0.0) -> ObjectiveModel:
    """f(x) = 1/2 x^T A x + b^T x + const as an ObjectiveModel."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.allclose(a_matrix, a_matrix.T):
        raise ValueError("quadratic matrix must be symmetric")
    return ObjectiveModel(
        value=lambda x: float(0.5 * x @ a_matrix @ x + b @ x + const),
        gradient=lambda x: a_matrix @ x + b,
        hessian=lambda x: a_matrix,
        kind="quadratic",
        dim=b.size,
    )


class PiecewiseMaxObjective(ObjectiveModel):
    """max of finitely many smooth pieces, with kink discovery along lines.

    Pieces are (value, gradient, hessian) triples.  The gradient/Hessian of
    the max are those of the active (largest) piece; ties pick the first.
    Restricted kinks are found by sampling the piece gap along the segment
    and bisecting each sign change.
    """

    def __init__(self, pieces: Sequence[tuple[Callable, Callable, Callable]], dim: int):
        object.__setattr__(self, "_pieces", list(pieces))

        def value(x):
            return max(p[0](x) for p in self._pieces)

        def active(x):
            vals = [p[0](x) for p in self._pieces]
            return int(np.argmax(vals))

        def gradient(x):
            return np.asarray(self._pieces[active(x)][1](x), dtype=float)

        def hessian(x):
            return np.asarray(self._pieces[active(x)][2](x), dtype=float)

        object.__setattr__(self, "_active", active)
        super().__init__(
            value=value,
            gradient=gradient,
            hessian=hessian,
            kind="piecewise",
            kink_locator=self._locate_kinks,
            dim=dim,
        )

    def _locate_kinks(self, x, i, lo, hi, samples: int = 256):
        if hi <= lo:
            return self._active(np.asarray(x, dtype=float)), ()
        x = np.asarray(x, dtype=float)

        def act(t):
            z = np.array(x)
            z[i] = t
            return self._active(z)

        ts = np.linspace(lo, hi, samples)
        labels = [act(t) for t in ts]
        kinks = []
        for t0, t1, l0, l1 in zip(ts, ts[1:], labels, labels[1:]):
            if l0 == l1:
                continue
            a, b = t0, t1
            for _ in range(60):
                mid = 0.5 * (a + b)
                if act(mid) == l0:
                    a = mid
                else:
                    b = mid
            kinks.append(0.5 * (a + b))
        return act(x[i]) if lo <= x[i] <= hi else act(hi), tuple(kinks)


@dataclass(frozen=True)
class QuadraticMop:
    """Least-squares multi-objective problem built from factors W_j and targets y_j.

    Derived arrays: gram A_j = W_j W_j^T, offsets b_j = -W_j y_j, and
    rtilde_j = sqrt(diag(A_j)) (all nonnegative, rtilde_j,i^2 = (A_j)_ii).
    x_star is the common least-squares ground truth, stored by the random
    generator or recovered from the normal equations otherwise.
    """

    factors: tuple[np.ndarray, ...]
    targets: tuple[np.ndarray, ...]
    x_star: Optional[np.ndarray] = None
    seed: Optional[int] = None
    gram: tuple[np.ndarray, ...] = field(init=False)
    offsets: tuple[np.ndarray, ...] = field(init=False)
    rtilde: tuple[np.ndarray, ...] = field(init=False)

    def __post_init__(self):
        ws = tuple(np.asarray(W, dtype=float) for W in self.factors)
        ys = tuple(np.asarray(y, dtype=float) for y in self.targets)
        if len(ws) != len(ys) or not ws:
            raise ValueError("factors and targets must be nonempty and equally long")
        n = ws[0].shape[0]
        for W, y in zip(ws, ys):
            if W.ndim != 2 or W.shape[0] != n:
                raise ValueError("all factors must be n x m_j matrices with a common n")
            if y.shape != (W.shape[1],):
                raise ValueError("target length must match the factor column count")
        object.__setattr__(self, "factors", ws)
        object.__setattr__(self, "targets", ys)
        object.__setattr__(self, "gram", tuple(W @ W.T for W in ws))
        object.__setattr__(self, "offsets", tuple(-W @ y for W, y in zip(ws, ys)))
        object.__setattr__(self, "rtilde", tuple(np.sqrt(np.diag(A)) for A in self.gram))
        if self.x_star is not None:
            xs = np.asarray(self.x_star, dtype=float)
            if xs.shape != (n,):
                raise ValueError("x_star must be an n-vector")
            object.__setattr__(self, "x_star", xs)

    @property
    def dim(self) -> int:
        return self.factors[0].shape[0]

    @property
    def n_objectives(self) -> int:
        return len(self.factors)

    def objective_value(self, j: int, x: np.ndarray) -> float:
        r = self.factors[j].T @ x - self.targets[j]
        return float(0.5 * r @ r)

    def objective_gradient(self, j: int, x: np.ndarray) -> np.ndarray:
        return self.gram[j] @ x + self.offsets[j]

    def objectives(self, gamma: float = 0.0, terminal: Optional[np.ndarray] = None) -> list[ObjectiveModel]:
        """ObjectiveModels of the (optionally diag-regularized) objectives."""
        c = np.zeros(self.dim) if terminal is None else np.asarray(terminal, dtype=float)
        models = []
        for j in range(self.n_objectives):
            dj = self.rtilde[j] ** 2
            A, b = self.gram[j], self.offsets[j]

            def val(x, j=j, dj=dj):
                return self.objective_value(j, x) + 0.5 * gamma * float(dj @ (x - c) ** 2)

            def grad(x, A=A, b=b, dj=dj):
                return A @ x + b + gamma * dj * (x - c)

            def hess(x, A=A, dj=dj):
                return A + gamma * np.diag(dj)

            models.append(ObjectiveModel(val, grad, hess, kind="quadratic",
                                         dim=self.dim, validate=False))
        return models

    def least_squares_solution(self) -> np.ndarray:
        """The stored ground truth, or the unregularized normal-equations solution."""
        if self.x_star is not None:
            return self.x_star
        S = sum(self.gram)
        rhs = sum(W @ y for W, y in zip(self.factors, self.targets))
        try:
            return np.linalg.solve(S, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("unregularized Gram sum is singular") from exc


@dataclass(frozen=True)
class TikhonovSolution:
    """Closed-form regularized minimizer with its effective system matrix."""

    gamma: float
    x_tik: np.ndarray
    a_matrix: np.ndarray
    sigma_max: float
    kappa: float
    multipliers: np.ndarray
    terminal: np.ndarray
    regularizer: str = "diag"


def random_quadratic_mop(n: int, m_data: int, m: int, seed: int) -> QuadraticMop:
    """Seeded random instance: W_j entries iid uniform(-1,1), y_j = W_j^T x*.

    The draw order (W_1, ..., W_m, then x*) is fixed, so one seed pins the
    instance bit-for-bit.
    """
    if min(n, m_data, m) < 1:
        raise ValueError("n, m_data and m must all be positive")
    rng = np.random.default_rng(seed)
    ws = tuple(rng.uniform(-1.0, 1.0, (n, m_data)) for _ in range(m))
    x_star = rng.uniform(-1.0, 1.0, n)
    ys = tuple(W.T @ x_star for W in ws)
    return QuadraticMop(factors=ws, targets=ys, x_star=x_star, seed=seed)


def quadratic_effective_gradient(mop: QuadraticMop, j: int, cfg: FractionalConfig,
                                 x: np.ndarray) -> np.ndarray:
    """Closed form of the modified fractional gradient of objective j.

    g_j(x) = (A_j x + b_j) + gamma_{alpha,beta} * diag(diag(A_j)) (x - c)
    with gamma_{alpha,beta} = beta - (1-alpha)/(2-alpha) and diag(A_j) =
    rtilde_j^2.
    """
    x = np.asarray(x, dtype=float)
    c = np.broadcast_to(cfg.terminal, x.shape)
    pull = cfg.gamma_alpha_beta * mop.rtilde[j] ** 2 * (x - c)
    return mop.gram[j] @ x + mop.offsets[j] + pull


def tikhonov_solve(mop: QuadraticMop, gamma: float, multipliers: np.ndarray,
                   terminal: np.ndarray, regularizer: str = "diag") -> TikhonovSolution:
    """Closed-form solution of the multiplier-weighted regularized problem.

    Solves sum_j lambda_j [ (A_j + gamma * REG_j) (x - c) ] = sum_j lambda_j A_j (x* - c)
    where REG_j = diag(rtilde_j^2) (default) or the rank-one comparison form
    rtilde_j rtilde_j^T, and x* is the least-squares ground truth.  The
    returned a_matrix is the weighted system matrix, with its largest
    singular value and condition number.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if regularizer not in ("diag", "outer"):
        raise ValueError(f"unknown regularizer {regularizer!r}")
    lam = np.asarray(multipliers, dtype=float)
    if lam.shape != (mop.n_objectives,) or lam.min() < -1e-12 or abs(lam.sum() - 1.0) > 1e-10:
        raise ValueError("multipliers must lie on the unit simplex")
    c = np.asarray(terminal, dtype=float)
    if c.size == 1:
        c = np.full(mop.dim, float(c))

    system = np.zeros((mop.dim, mop.dim))
    for j in range(mop.n_objectives):
        if regularizer == "diag":
            reg = np.diag(mop.rtilde[j] ** 2)
        else:
            reg = np.outer(mop.rtilde[j], mop.rtilde[j])
        system += lam[j] * (mop.gram[j] + gamma * reg)
    x_star = mop.least_squares_solution()
    rhs = sum(lam[j] * (mop.gram[j] @ (x_star - c)) for j in range(mop.n_objectives))

    try:
        shift = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "regularized system is singular (gamma = 0 with rank-deficient Gram sum?)"
        ) from exc
    if not np.all(np.isfinite(shift)):
        raise SingularSystemError("regularized system solve produced non-finite values")
    x_tik = c + shift

    residual = sum(
        lam[j] * (mop.gram[j] @ x_tik + mop.offsets[j]
                  + (gamma * mop.rtilde[j] ** 2 * (x_tik - c) if regularizer == "diag"
                     else gamma * np.outer(mop.rtilde[j], mop.rtilde[j]) @ (x_tik - c)))
        for j in range(mop.n_objectives)
    )
    assert np.linalg.norm(residual) <= 1e-8 * (1.0 + np.linalg.norm(x_tik)), \
        f"normal-equation residual {np.linalg.norm(residual):.3e} too large"

    sigma = np.linalg.svd(system, compute_uv=False)
    return TikhonovSolution(
        gamma=float(gamma),
        x_tik=x_tik,
        a_matrix=system,
        sigma_max=float(sigma[0]),
        kappa=float(sigma[0] / sigma[-1]) if sigma[-1] > 0 else float("inf"),
        multipliers=lam,
        terminal=c,
        regularizer=regularizer,
    )


def condition_number(a_matrix: np.ndarray) -> float:
    """Ratio of extreme singular values of a dense matrix."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    if not np.all(np.isfinite(a_matrix)):
        raise ValueError("matrix entries must be finite")
    sigma = np.linalg.svd(a_matrix, compute_uv=False)
    if sigma[-1] == 0.0:
        return float("inf")
    return float(sigma[0] / sigma[-1])


_FORMAT_TAG = "mofgd-quadratic-mop/1"


def save_mop(mop: QuadraticMop, path, terminal: Optional[np.ndarray] = None) -> None:
    """Serialize an instance (seed, dimensions, W_j, y_j, optional c) as JSON."""
    doc = {
        "format": _FORMAT_TAG,
        "seed": mop.seed,
        "n": mop.dim,
        "m": mop.n_objectives,
        "m_data": [W.shape[1] for W in mop.factors],
        "W": [W.tolist() for W in mop.factors],
        "y": [y.tolist() for y in mop.targets],
        "x_star": None if mop.x_star is None else mop.x_star.tolist(),
        "c": None if terminal is None else np.asarray(terminal, dtype=float).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_mop(path) -> tuple[QuadraticMop, Optional[np.ndarray]]:
    """Load an instance written by save_mop; returns (mop, terminal-or-None)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _FORMAT_TAG:
        raise ValueError(f"unrecognized instance format {doc.get('format')!r}")
    mop = QuadraticMop(
        factors=tuple(np.array(W, dtype=float) for W in doc["W"]),
        targets=tuple(np.array(y, dtype=float) for y in doc["y"]),
        x_star=None if doc.get("x_star") is None else np.array(doc["x_star"], dtype=float),
        seed=doc.get("seed"),
    )
    c = None if doc.get("c") is None else np.array(doc["c"], dtype=float)
    return mop, c
