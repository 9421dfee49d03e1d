"""Regularization stencils, orthogonal projectors and Frobenius-nearest factors.

The square stencils ``L1_SQUARE`` and ``L2_SQUARE`` are invertible; the
rectangular ``L1`` and ``L2`` have null spaces spanned by the constant vector
and by ``{constant, linear ramp}`` respectively. Composing an invertible
stencil with an orthogonal projector, on the left or on the right, gives the
closest Kronecker-structured matrix with a prescribed range or null space.
"""

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError
from .linalg import kron, solve_dense

__all__ = [
    "StencilKind",
    "Side",
    "OrthoProjector",
    "RegFactor",
    "make_stencil",
    "nullspace_basis",
    "projector_from_basis",
    "closest_with_nullspace",
    "closest_with_range",
    "example_range_projector",
    "reg_factor",
    "tensor_regularizer",
]


class StencilKind(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L1_SQUARE = "L1Square"
    L2_SQUARE = "L2Square"

    @property
    def order(self):
        """Derivative order (1 or 2)."""
        return 1 if self in (StencilKind.L1, StencilKind.L1_SQUARE) else 2

    @property
    def square(self):
        return self in (StencilKind.L1_SQUARE, StencilKind.L2_SQUARE)

    def to_square(self):
        return StencilKind.L1_SQUARE if self.order == 1 else StencilKind.L2_SQUARE

    def to_rectangular(self):
        return StencilKind.L1 if self.order == 1 else StencilKind.L2


class Side(str, enum.Enum):
    """Where the projector is composed with the invertible base stencil."""

    NONE = "None"
    LEFT = "Left"  # L = P @ base
    RIGHT = "Right"  # L = base @ P


ORTHO_TOL = 1e-10
_GS_TOL = 1e-12


@dataclass(frozen=True)
class OrthoProjector:
    """Orthogonal projector ``p = I - basis @ basis.T``.

    ``basis`` holds orthonormal columns spanning the null space of ``p``; it
    may have zero columns, in which case ``p`` is the identity.
    """

    p: np.ndarray
    basis: np.ndarray

    @property
    def n(self):
        return self.p.shape[0]

    @property
    def ell(self):
        return self.basis.shape[1]


@dataclass(frozen=True)
class RegFactor:
    """One Kronecker factor of a regularization operator.

    Attributes
    ----------
    base : (n, n) ndarray
        Invertible stencil.
    projector : OrthoProjector or None
        Present exactly when ``side`` is not ``Side.NONE``.
    side : Side
    kind : StencilKind or None
        Stencil family the factor was built from, for labelling.
    """

    base: np.ndarray
    projector: Optional[OrthoProjector] = None
    side: Side = Side.NONE
    kind: Optional[StencilKind] = None

    def __post_init__(self):
        side = Side(self.side)
        object.__setattr__(self, "side", side)
        base = np.asarray(self.base, dtype=np.float64)
        if base.ndim != 2 or base.shape[0] != base.shape[1]:
            raise DimensionError(f"base stencil must be square, got {base.shape}")
        if side is not Side.NONE:
            if self.projector is None:
                raise PreconditionError(f"side {side.value} requires a projector")
            if self.projector.n != base.shape[0]:
                raise DimensionError("projector order does not match the base stencil")
        solve_dense(base, np.eye(base.shape[0])[:, :1])  # invertibility check
        object.__setattr__(self, "base", base)

    @property
    def n(self):
        return self.base.shape[0]

    @property
    def effective(self):
        """The regularization factor actually applied to the unknowns."""
        if self.side is Side.LEFT:
            return self.projector.p @ self.base
        if self.side is Side.RIGHT:
            return self.base @ self.projector.p
        return self.base.copy()

    def label(self):
        """Short label such as ``Lt1``, ``P2Lt2`` or ``Lt1P1``."""
        idx = self.kind.order if self.kind is not None else ""
        if self.side is Side.LEFT:
            return f"P{idx}Lt{idx}"
        if self.side is Side.RIGHT:
            return f"Lt{idx}P{idx}"
        return f"Lt{idx}"


def _kind(kind):
    try:
        return StencilKind(kind)
    except ValueError:
        raise DimensionError(f"unknown stencil kind {kind!r}") from None


def make_stencil(kind, n):
    """Finite-difference regularization stencil of order `n`.

    ======== =========== ==========================================
    kind     shape       rows
    ======== =========== ==========================================
    L1       (n-1) x n   1/2 [1, -1]
    L2       (n-2) x n   1/4 [-1, 2, -1]
    L1Square n x n       L1 with the extra last row 1/2 [0, ..., 1]
    L2Square n x n       1/4 tridiag(-1, 2, -1)
    ======== =========== ==========================================
    """
    kind = _kind(kind)
    minimum = 3 if kind in (StencilKind.L2, StencilKind.L2_SQUARE) else 2
    if n < minimum:
        raise DimensionError(f"{kind.value} stencil needs n >= {minimum}, got {n}")
    if kind is StencilKind.L1:
        m = np.zeros((n - 1, n))
        idx = np.arange(n - 1)
        m[idx, idx] = 1.0
        m[idx, idx + 1] = -1.0
        return 0.5 * m
    if kind is StencilKind.L1_SQUARE:
        m = np.eye(n) - np.eye(n, k=1)
        return 0.5 * m
    if kind is StencilKind.L2:
        m = np.zeros((n - 2, n))
        idx = np.arange(n - 2)
        m[idx, idx] = -1.0
        m[idx, idx + 1] = 2.0
        m[idx, idx + 2] = -1.0
        return 0.25 * m
    m = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return 0.25 * m


def _orthonormalize(columns):
    """Modified Gram-Schmidt with one reorthogonalization pass."""
    q = []
    for col in columns:
        v = np.array(col, dtype=np.float64)
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            for u in q:
                v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm <= _GS_TOL * norm0:
            raise PreconditionError("columns are linearly dependent")
        q.append(v / norm)
    if not q:
        return np.zeros((0, 0))
    return np.column_stack(q)


def nullspace_basis(kind, n):
    """Orthonormal basis of the null space of ``make_stencil(kind, n)``.

    Returns an ``(n, 0)`` array for the invertible square kinds.
    """
    kind = _kind(kind)
    make_stencil(kind, n)  # dimension validation
    if kind.square:
        return np.zeros((n, 0))
    ones = np.ones(n)
    if kind is StencilKind.L1:
        return _orthonormalize([ones])
    ramp = np.arange(1.0, n + 1.0)
    return _orthonormalize([ones, ramp])


def projector_from_basis(v):
    """Build ``I - v v^T`` from a matrix `v` with orthonormal columns."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    n, ell = v.shape
    if ell and np.max(np.abs(v.T @ v - np.eye(ell))) > ORTHO_TOL:
        raise PreconditionError("basis columns are not orthonormal")
    if ell and ell >= n:
        raise PreconditionError("basis must have fewer columns than rows")
    p = np.eye(n) - v @ v.T
    # exact symmetry; v v^T is symmetric only up to rounding
    p = 0.5 * (p + p.T)
    return OrthoProjector(p=p, basis=v.copy())


def _check_factor_lists(a_factors, v_factors):
    if len(a_factors) != len(v_factors):
        raise DimensionError(
            f"{len(a_factors)} matrix factors but {len(v_factors)} bases"
        )
    if not a_factors:
        raise DimensionError("at least one Kronecker factor is required")


def _as_basis(v, n):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v.reshape(-1, 1) if v.size else np.zeros((n, 0))
    return v


def closest_with_nullspace(a_factors: Sequence, v_factors: Sequence):
    """Nearest Kronecker chain whose factor null spaces contain ``R(V_i)``.

    Each factor ``A_i`` (``p_i x n_i``) is replaced by ``A_i P_i`` with
    ``P_i = I - V_i V_i^T``. The Kronecker product of the returned factors is
    the Frobenius-closest matrix to the product of the inputs among all
    Kronecker products ``B_d x ... x B_1`` with ``B_i V_i = 0``.
    """
    _check_factor_lists(a_factors, v_factors)
    out = []
    for i, (a, v) in enumerate(zip(a_factors, v_factors)):
        a = np.asarray(a, dtype=np.float64)
        v = _as_basis(v, a.shape[1])
        if v.shape[0] != a.shape[1]:
            raise DimensionError(
                f"factor {i}: basis has {v.shape[0]} rows but A has {a.shape[1]} columns"
            )
        out.append(a @ projector_from_basis(v).p)
    return out


def closest_with_range(a_factors: Sequence, v_factors: Sequence):
    """Nearest Kronecker chain whose factor ranges are orthogonal to ``R(V_i)``.

    Each factor ``A_i`` is replaced by ``P_i A_i``; this is the transposed
    counterpart of :func:`closest_with_nullspace`.
    """
    _check_factor_lists(a_factors, v_factors)
    out = []
    for i, (a, v) in enumerate(zip(a_factors, v_factors)):
        a = np.asarray(a, dtype=np.float64)
        v = _as_basis(v, a.shape[0])
        if v.shape[0] != a.shape[0]:
            raise DimensionError(
                f"factor {i}: basis has {v.shape[0]} rows but A has {a.shape[0]} rows"
            )
        out.append(projector_from_basis(v).p @ a)
    return out


def example_range_projector(kind, n):
    """Diagonal projector onto the range of the rectangular stencil.

    For ``L2`` this is ``diag(0, 1, ..., 1, 0)``, for ``L1`` it is
    ``diag(1, ..., 1, 0)``.
    """
    kind = _kind(kind)
    if kind.square:
        raise DimensionError("example_range_projector expects kind L1 or L2")
    make_stencil(kind, n)
    eye = np.eye(n)
    if kind is StencilKind.L1:
        basis = eye[:, [n - 1]]
    else:
        basis = eye[:, [0, n - 1]]
    p = np.eye(n)
    removed = [n - 1] if kind is StencilKind.L1 else [0, n - 1]
    p[removed, removed] = 0.0
    return OrthoProjector(p=p, basis=basis)


def reg_factor(kind, n, side=Side.NONE):
    """Assemble a :class:`RegFactor` from a stencil family and a side.

    ``Left`` composes the range projector of the rectangular stencil on the
    left of the square stencil; ``Right`` composes the null-space projector
    on the right.
    """
    kind = _kind(kind).to_rectangular()
    side = Side(side)
    base = make_stencil(kind.to_square(), n)
    if side is Side.LEFT:
        proj = example_range_projector(kind, n)
    elif side is Side.RIGHT:
        proj = projector_from_basis(nullspace_basis(kind, n))
    else:
        proj = None
    return RegFactor(base=base, projector=proj, side=side, kind=kind)


def tensor_regularizer(kind, n):
    """Stacked ``[I x L; L x I]`` regularizer built from a rectangular stencil.

    Only meant as a comparison fixture; the solvers work with Kronecker
    products of square factors.
    """
    kind = _kind(kind).to_rectangular()
    lmat = make_stencil(kind, n)
    eye = np.eye(n)
    return np.vstack([kron(eye, lmat), kron(lmat, eye)])
