"""Tikhonov regularization on a global Arnoldi subspace.

The problem

    min_X ||K1 X K2^T - B||_F^2 + mu ||L1 X L2^T||_F^2

with factors ``L_i = P_i Lt_i`` (or ``Lt_i P_i`` or plain ``Lt_i``) is moved
to the coordinates ``Y = Lt_1 X Lt_2^T``. The data-fit operator becomes
``Y -> (K1 Lt_1^{-1}) Y (K2 Lt_2^{-1})^T`` and the penalty becomes
``||M1 Y M2^T||_F`` where ``M_i`` is ``P_i``, ``Lt_i P_i Lt_i^{-1}`` or the
identity. A global Arnoldi basis for the block Krylov space generated by the
transformed operator and ``B`` carries the solution; ``mu`` is fixed by the
discrepancy principle ``||residual|| = eta * eps`` and the number of steps is
the smallest one for which that equation is solvable.
"""

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .arnoldi import GlobalArnoldi, GlobalArnoldiDecomp
from .errors import (
    DegenerateInputError,
    DimensionError,
    DomainError,
    RankError,
    TargetUnreachableError,
)
from .linalg import lstsq, solve_dense, unvec, vec
from .problems import relative_error
from .regmat import RegFactor, Side

__all__ = [
    "TikhonovKronProblem",
    "SolveReport",
    "MuChoice",
    "standard_form_factor",
    "penalty_gram",
    "solve_projected",
    "find_mu",
    "solve_kron",
    "solve_general",
    "direct_solve",
]

DEFAULT_MU_BRACKET = (1e-12, 1e12)
DEFAULT_ETA = 1.01
MU_RTOL = 1e-6
MAX_BISECTIONS = 200
# With eps = 0 there is no discrepancy to match; stop once the projected
# residual is negligible or the Krylov space is invariant.
EXACT_DATA_RTOL = 1e-10


def default_k_max(n):
    return min(n, 60)


@dataclass
class TikhonovKronProblem:
    """Kronecker-structured Tikhonov problem with known noise bound."""

    k1_factor: np.ndarray
    k2_factor: np.ndarray
    data_b: np.ndarray
    reg1: RegFactor
    reg2: RegFactor
    noise_bound_eps: float
    eta: float = DEFAULT_ETA
    k_max: Optional[int] = None
    mu_bracket: Tuple[float, float] = DEFAULT_MU_BRACKET

    def __post_init__(self):
        self.k1_factor = np.asarray(self.k1_factor, dtype=np.float64)
        self.k2_factor = np.asarray(self.k2_factor, dtype=np.float64)
        self.data_b = np.asarray(self.data_b, dtype=np.float64)
        rows, cols = self.data_b.shape
        if self.k1_factor.shape != (rows, rows) or self.k2_factor.shape != (cols, cols):
            raise DimensionError(
                f"factors {self.k1_factor.shape}, {self.k2_factor.shape} do not match "
                f"data of shape {self.data_b.shape}"
            )
        if self.reg1.n != rows or self.reg2.n != cols:
            raise DimensionError("regularization factor orders do not match the data")
        if self.eta < 1:
            raise DomainError(f"eta must be >= 1, got {self.eta}")
        if self.noise_bound_eps < 0:
            raise DomainError("noise bound must be nonnegative")
        lo, hi = self.mu_bracket
        if not 0 < lo < hi:
            raise DomainError(f"invalid mu bracket {self.mu_bracket}")
        if self.k_max is None:
            self.k_max = default_k_max(max(rows, cols))
        if self.k_max < 1:
            raise DomainError("k_max must be positive")


@dataclass
class SolveReport:
    x_solution: np.ndarray
    mu: float
    k_used: int
    discrepancy_residual: float
    converged: bool
    relative_error: Optional[float] = None
    wall_seconds: float = 0.0
    saturated: bool = False
    breakdown: bool = False
    target: float = 0.0
    beta: float = 0.0
    history: list = field(default_factory=list)


class MuChoice(NamedTuple):
    mu: float
    y: np.ndarray
    residual: float
    saturated: bool


def _solve_factor(base, rhs):
    return solve_dense(base, rhs)


def standard_form_factor(k_factor, reg: RegFactor):
    """Transform one Kronecker factor to the ``Y = Lt X Lt^T`` coordinates.

    Returns
    -------
    k1 : ndarray
        ``k_factor @ inv(reg.base)``, computed through a linear solve.
    penalty_m : ndarray
        Penalty operator acting on ``Y``: ``P`` (left side),
        ``base @ P @ inv(base)`` (right side) or the identity.
    """
    k_factor = np.asarray(k_factor, dtype=np.float64)
    base = reg.base
    if k_factor.shape[1] != base.shape[0]:
        raise DimensionError(f"factor {k_factor.shape} incompatible with stencil {base.shape}")
    k1 = _solve_factor(base.T, k_factor.T).T
    if reg.side is Side.LEFT:
        m = reg.projector.p.copy()
    elif reg.side is Side.RIGHT:
        bp = base @ reg.projector.p
        m = _solve_factor(base.T, bp.T).T
    else:
        m = np.eye(base.shape[0])
    return k1, m


def _gram(weighted):
    w = np.stack([blk.reshape(-1) for blk in weighted])
    g = w @ w.T
    return 0.5 * (g + g.T)


def penalty_gram(decomp: GlobalArnoldiDecomp, m1, m2):
    """Gram matrix ``G_ij = <m1 V_i m2^T, m1 V_j m2^T>`` over the first k blocks."""
    m1 = np.asarray(m1, dtype=np.float64)
    m2 = np.asarray(m2, dtype=np.float64)
    n, s = decomp.blocks[0].shape
    if m1.shape[1] != n or m2.shape[1] != s:
        raise DimensionError(f"penalty factors {m1.shape}, {m2.shape} vs blocks {(n, s)}")
    k = decomp.k
    return _gram([m1 @ v @ m2.T for v in decomp.blocks[:k]])


class _ProjectedProblem:
    """Projected Tikhonov problem with the penalty factor precomputed."""

    def __init__(self, hess, beta, gram):
        hess = np.asarray(hess, dtype=np.float64)
        gram = np.asarray(gram, dtype=np.float64)
        k = hess.shape[1]
        if hess.shape[0] != k + 1 or gram.shape != (k, k):
            raise DimensionError(f"hess {hess.shape} and gram {gram.shape} are incompatible")
        evals, evecs = np.linalg.eigh(0.5 * (gram + gram.T))
        self.c = np.sqrt(np.clip(evals, 0.0, None))[:, None] * evecs.T
        self.hess = hess
        self.rhs = np.zeros(2 * k + 1)
        self.rhs[0] = beta
        self.k = k
        self._filter = None

    def solve(self, mu):
        if not mu > 0:
            raise DomainError(f"mu must be positive, got {mu}")
        stacked = np.vstack([self.hess, np.sqrt(mu) * self.c])
        try:
            y = lstsq(stacked, self.rhs)
        except RankError:
            raise RankError(
                "projected problem is singular: hess and penalty share a null vector"
            ) from None
        res = float(np.linalg.norm(self.hess @ y - self.rhs[: self.k + 1]))
        return y, res

    def residual_function(self):
        """Cheap ``mu -> ||hess y_mu - beta e_1||``, or None if hess is rank deficient.

        With ``hess = Q R`` and the SVD ``C R^{-1} = U diag(s) V^T`` the
        residual is ``sqrt(r0^2 + sum (mu s^2 / (1 + mu s^2))^2 c^2)`` where
        ``c = V^T Q^T beta e_1`` and ``r0`` is the part of ``beta e_1`` outside
        the range of ``hess``. Each evaluation costs O(k).
        """
        if self._filter is None:
            q, r = np.linalg.qr(self.hess, mode="complete")
            diag = np.abs(np.diag(r[: self.k]))
            if diag.min() <= 1e-12 * diag.max():
                self._filter = False
            else:
                qb = self.rhs[0] * q[0]
                f = solve_triangular(r[: self.k], self.c.T, trans="T").T
                _, sv, vt = np.linalg.svd(f)
                self._filter = (sv**2, vt @ qb[: self.k], abs(qb[self.k]))
        if self._filter is False:
            return None
        s2, coef, r0 = self._filter

        def residual(mu):
            damp = mu * s2 / (1.0 + mu * s2)
            return float(np.sqrt(r0**2 + np.sum((damp * coef) ** 2)))

        return residual


def solve_projected(hess, beta, gram, mu):
    """Minimize ``||hess y - beta e_1||^2 + mu y^T gram y``.

    Returns ``(y, residual)`` where ``residual = ||hess y - beta e_1||``.
    """
    return _ProjectedProblem(hess, beta, gram).solve(mu)


def _bisect(evaluate, target, mu_bracket, rtol):
    """Bisection on log10(mu); `evaluate` maps mu to ``(payload, residual)``."""
    lo_mu, hi_mu = mu_bracket
    y_lo, r_lo = evaluate(lo_mu)
    if r_lo > target:
        raise TargetUnreachableError(
            f"residual {r_lo:.3e} at mu={lo_mu:g} exceeds target {target:.3e}",
            residual_floor=r_lo,
        )
    if abs(r_lo - target) <= rtol * target:
        return MuChoice(lo_mu, y_lo, r_lo, False)
    y_hi, r_hi = evaluate(hi_mu)
    if r_hi < target:
        return MuChoice(hi_mu, y_hi, r_hi, True)
    lo, hi = np.log10(lo_mu), np.log10(hi_mu)
    best = (hi_mu, y_hi, r_hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        mu = 10.0**mid
        y, r = evaluate(mu)
        if abs(r - target) < abs(best[2] - target):
            best = (mu, y, r)
        if abs(r - target) <= rtol * target:
            break
        if r < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return MuChoice(best[0], best[1], best[2], False)


def _bisect_mu(problem, target, mu_bracket, rtol=MU_RTOL):
    if not target > 0:
        raise DomainError("discrepancy target must be positive")
    fast = problem.residual_function()
    if fast is not None:
        # locate mu on the O(k) residual formula, then confirm with one
        # stable solve; fall through to the stable search if they disagree
        try:
            choice = _bisect(lambda mu: (None, fast(mu)), target, mu_bracket, 0.1 * rtol)
        except TargetUnreachableError:
            choice = None
        if choice is not None:
            y, r = problem.solve(choice.mu)
            if choice.saturated and r < target:
                return MuChoice(choice.mu, y, r, True)
            if not choice.saturated and abs(r - target) <= rtol * target:
                return MuChoice(choice.mu, y, r, False)
    return _bisect(problem.solve, target, mu_bracket, rtol)


def find_mu(hess, beta, gram, target, mu_bracket=DEFAULT_MU_BRACKET):
    """Choose ``mu`` so the projected residual equals `target`.

    Bisection on ``log10(mu)`` over `mu_bracket`; the residual is a
    nondecreasing function of ``mu``.

    Returns
    -------
    MuChoice
        ``saturated`` is set when even the largest ``mu`` leaves the
        residual below the target; ``mu`` is then the upper bracket end.

    Raises
    ------
    TargetUnreachableError
        If the residual at the smallest ``mu`` already exceeds `target`.
    """
    return _bisect_mu(_ProjectedProblem(hess, beta, gram), target, mu_bracket)


class _Outcome(NamedTuple):
    y: np.ndarray
    mu: float
    k: int
    residual: float
    converged: bool
    saturated: bool
    history: list


class _GramBuilder:
    """Penalty Gram matrix grown one basis block at a time."""

    def __init__(self, penalize):
        self.penalize = penalize
        self._w = None  # penalized blocks, one flattened block per row
        self._g = np.zeros((8, 8))
        self.size = 0

    def extend(self, builder, k):
        while self.size < k:
            m = self.size
            w = self.penalize(builder.block(m)).reshape(-1)
            if self._w is None:
                self._w = np.empty((8, w.size))
            if m == self._w.shape[0]:
                self._w = np.concatenate([self._w, np.empty_like(self._w)])
                g = np.zeros((2 * m, 2 * m))
                g[:m, :m] = self._g[:m, :m]
                self._g = g
            self._w[m] = w
            row = self._w[: m + 1] @ w
            self._g[m, : m + 1] = row
            self._g[: m + 1, m] = row
            self.size += 1
        return self._g[:k, :k].copy()


def _iterate(builder, penalize, target, k_max, mu_bracket, fixed_mu=None):
    """Grow the Krylov space until the discrepancy equation is solvable.

    `penalize` maps a basis block to its penalty image ``M1 V M2^T``.
    """
    k_max = min(k_max, builder.dim)
    grams = _GramBuilder(penalize)
    history = []

    def projected(k):
        return _ProjectedProblem(builder.hessenberg(), builder.beta, grams.extend(builder, k))

    while True:
        builder.extend(builder.steps + 1)
        k = builder.steps
        done = builder.breakdown_at is not None or k >= k_max

        if fixed_mu is not None:
            if done:
                y, res = projected(k).solve(fixed_mu)
                return _Outcome(y, fixed_mu, k, res, True, False, history)
            continue

        floor = builder.residual_floor
        if target <= 0:
            history.append((k, floor))
            hit = builder.breakdown_at is not None or floor <= EXACT_DATA_RTOL * builder.beta
            if hit or done:
                y, res = projected(k).solve(mu_bracket[0])
                return _Outcome(y, mu_bracket[0], k, res, hit, False, history)
            continue

        if floor <= target:
            try:
                choice = _bisect_mu(projected(k), target, mu_bracket)
            except TargetUnreachableError as exc:
                floor = exc.residual_floor
            else:
                history.append((k, choice.residual))
                return _Outcome(
                    choice.y, choice.mu, k, choice.residual, True, choice.saturated, history
                )
        history.append((k, floor))
        if done:
            y, res = projected(k).solve(mu_bracket[0])
            return _Outcome(y, mu_bracket[0], k, res, False, False, history)


def solve_kron(problem: TikhonovKronProblem, reference=None, mu=None):
    """Solve a Kronecker Tikhonov problem with the discrepancy principle.

    Parameters
    ----------
    problem : TikhonovKronProblem
    reference : ndarray, optional
        Exact solution; when given, ``relative_error`` is filled in.
    mu : float, optional
        Fixed regularization parameter. The discrepancy principle is then
        bypassed and the Krylov space is grown to ``k_max`` (or until it is
        invariant).

    Returns
    -------
    SolveReport
    """
    start = time.perf_counter()
    b = problem.data_b
    if not np.any(b):
        raise DegenerateInputError("data matrix is zero")
    k1, m1 = standard_form_factor(problem.k1_factor, problem.reg1)
    k2, m2 = standard_form_factor(problem.k2_factor, problem.reg2)

    def apply(v):
        return k1 @ v @ k2.T

    def penalize(v):
        return m1 @ v @ m2.T

    builder = GlobalArnoldi(apply, b)
    target = problem.eta * problem.noise_bound_eps
    out = _iterate(builder, penalize, target, problem.k_max, problem.mu_bracket, mu)
    y_mat = builder.combine(out.y)
    x = _solve_factor(problem.reg1.base, y_mat)
    x = _solve_factor(problem.reg2.base, x.T).T
    report = SolveReport(
        x_solution=x,
        mu=float(out.mu),
        k_used=out.k,
        discrepancy_residual=out.residual,
        converged=out.converged,
        saturated=out.saturated,
        breakdown=builder.breakdown_at is not None,
        target=target,
        beta=builder.beta,
        history=out.history,
    )
    if reference is not None:
        report.relative_error = relative_error(x, reference)
    report.wall_seconds = time.perf_counter() - start
    return report


def solve_general(
    k_full,
    b,
    reg1: RegFactor,
    reg2: RegFactor,
    noise_bound_eps=0.0,
    eta=DEFAULT_ETA,
    k_max=None,
    mu_bracket=DEFAULT_MU_BRACKET,
    reference=None,
    mu=None,
):
    """Tikhonov solve for a square operator without Kronecker structure.

    The unknown is ``x = vec(X)`` with ``X`` of shape ``(reg1.n, reg2.n)``;
    the penalty is ``||(L2 x L1) x||``. Standard Arnoldi (single-column
    blocks) runs on ``y -> K ((Lt_2^{-1}) x (Lt_1^{-1})) y``, applied by two
    factor solves per product.

    Returns a :class:`SolveReport` whose ``x_solution`` is the column ``vec(X)``.
    """
    start = time.perf_counter()
    k_full = np.asarray(k_full, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 1)
    n1, n2 = reg1.n, reg2.n
    big_n = n1 * n2
    if k_full.shape != (big_n, big_n):
        raise DimensionError(f"operator {k_full.shape} does not match unknowns of size {big_n}")
    if b.shape[0] != big_n:
        raise DimensionError(f"data has {b.shape[0]} entries, expected {big_n}")
    if not np.any(b):
        raise DegenerateInputError("data vector is zero")
    if eta < 1:
        raise DomainError(f"eta must be >= 1, got {eta}")
    if noise_bound_eps < 0:
        raise DomainError("noise bound must be nonnegative")
    _, m1 = standard_form_factor(np.eye(n1), reg1)
    _, m2 = standard_form_factor(np.eye(n2), reg2)

    def back(v):
        y = unvec(v, n1, n2)
        x = _solve_factor(reg1.base, y)
        return _solve_factor(reg2.base, x.T).T

    def apply(v):
        return k_full @ vec(back(v))

    def penalize(v):
        return m1 @ unvec(v, n1, n2) @ m2.T

    if k_max is None:
        k_max = default_k_max(max(n1, n2))
    builder = GlobalArnoldi(apply, b)
    target = eta * noise_bound_eps
    out = _iterate(builder, penalize, target, k_max, mu_bracket, mu)
    x = vec(back(builder.combine(out.y)))
    report = SolveReport(
        x_solution=x,
        mu=float(out.mu),
        k_used=out.k,
        discrepancy_residual=out.residual,
        converged=out.converged,
        saturated=out.saturated,
        breakdown=builder.breakdown_at is not None,
        target=target,
        beta=builder.beta,
        history=out.history,
    )
    if reference is not None:
        report.relative_error = relative_error(x, reference)
    report.wall_seconds = time.perf_counter() - start
    return report


def direct_solve(k_full, b, l_full, mu):
    """Dense Tikhonov minimizer ``(K^T K + mu L^T L)^{-1} K^T b``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    k_full = np.asarray(k_full, dtype=np.float64)
    l_full = np.asarray(l_full, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 1)
    normal = k_full.T @ k_full + mu * (l_full.T @ l_full)
    return solve_dense(normal, k_full.T @ b)
