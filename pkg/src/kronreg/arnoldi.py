"""Global Arnoldi process in the Frobenius inner-product space of matrices.

Blocks are ``n x s`` matrices treated as single vectors under
``<U, W> = trace(U^T W)``. With ``s = 1`` the process is the ordinary
Arnoldi iteration.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import CapacityError, DegenerateInputError, DimensionError

__all__ = [
    "GlobalArnoldiDecomp",
    "GlobalArnoldi",
    "global_arnoldi",
    "residual_identity_check",
]

BREAKDOWN_TOL = 1e-12


@dataclass(frozen=True)
class GlobalArnoldiDecomp:
    """Snapshot of a global Arnoldi run after ``k`` steps.

    Attributes
    ----------
    blocks : tuple of (n, s) ndarrays
        F-orthonormal basis ``V_1, ..., V_{k+1}``; only ``k`` blocks after a
        breakdown at step ``k``.
    hess : (k+1, k) ndarray
        Upper Hessenberg matrix. After a breakdown its last entry holds the
        (negligible) norm of the discarded remainder.
    beta : float
        Frobenius norm of the starting matrix.
    breakdown_at : int or None
        1-based step at which the Krylov space became invariant.
    apply : callable
        The operator the basis was generated with.
    """

    blocks: Tuple[np.ndarray, ...]
    hess: np.ndarray
    beta: float
    breakdown_at: Optional[int]
    apply: Callable[[np.ndarray], np.ndarray]

    @property
    def k(self):
        return self.hess.shape[1]

    def combine(self, y):
        """Return ``sum_i y_i V_i`` over the first ``len(y)`` blocks."""
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.size > len(self.blocks):
            raise DimensionError(f"{y.size} coefficients but {len(self.blocks)} blocks")
        out = np.zeros_like(self.blocks[0])
        for coef, block in zip(y, self.blocks):
            out += coef * block
        return out


class GlobalArnoldi:
    """Incremental global Arnoldi builder.

    The basis is orthogonalized with classical Gram-Schmidt followed by one
    full reorthogonalization pass; both passes are accumulated into the
    Hessenberg column.

    Parameters
    ----------
    apply : callable
        Shape-preserving linear map on ``n x s`` matrices, e.g.
        ``lambda v: k1 @ v @ k2.T``.
    b : (n, s) array_like
        Nonzero starting matrix.
    """

    def __init__(self, apply, b, breakdown_tol=BREAKDOWN_TOL):
        b = np.asarray(b, dtype=np.float64)
        if b.ndim == 1:
            b = b[:, None]
        beta = float(np.linalg.norm(b))
        if beta == 0.0 or not np.isfinite(beta):
            raise DegenerateInputError("starting block must be nonzero and finite")
        self.apply = apply
        self.beta = beta
        self.breakdown_tol = breakdown_tol
        self.dim = b.size
        self._shape = b.shape
        self._basis = np.empty((8,) + b.shape)
        self._basis[0] = b / beta
        self._nblocks = 1
        self._cols = []  # Hessenberg columns, column j has length j + 2
        self.breakdown_at = None
        # Givens rotations reducing the Hessenberg matrix to triangular form,
        # tracked so the unregularized residual floor costs O(k) per step.
        self._rot = []
        self._g = beta
        self.residual_floor = beta

    @property
    def steps(self):
        return len(self._cols)

    def extend(self, k):
        """Run steps until ``k`` are done or the space becomes invariant."""
        if k < 1:
            raise DimensionError("k must be positive")
        if k > self.dim:
            raise CapacityError(f"k = {k} exceeds the space dimension {self.dim}")
        while self.steps < k and self.breakdown_at is None:
            self._step()
        return self

    @property
    def blocks(self):
        return tuple(self._basis[i].copy() for i in range(self._nblocks))

    def _append(self, block):
        if self._nblocks == self._basis.shape[0]:
            grown = np.empty((2 * self._nblocks,) + self._shape)
            grown[: self._nblocks] = self._basis
            self._basis = grown
        self._basis[self._nblocks] = block
        self._nblocks += 1

    def _step(self):
        j = self.steps
        vj = self._basis[j]
        w = np.asarray(self.apply(vj), dtype=np.float64)
        if w.shape != vj.shape:
            raise DimensionError(f"operator changed block shape {vj.shape} -> {w.shape}")
        wnorm = np.linalg.norm(w)
        basis = self._basis[: j + 1]
        h = np.zeros(j + 2)
        for _ in range(2):
            coef = np.tensordot(basis, w, axes=([1, 2], [0, 1]))
            w = w - np.tensordot(coef, basis, axes=1)
            h[: j + 1] += coef
        h[j + 1] = np.linalg.norm(w)
        self._cols.append(h)
        self._update_floor(h)
        if h[j + 1] <= self.breakdown_tol * wnorm or j + 1 == self.dim:
            self.breakdown_at = j + 1
        else:
            self._append(w / h[j + 1])

    def _update_floor(self, h):
        r = h.copy()
        for i, (c, s) in enumerate(self._rot):
            r[i], r[i + 1] = c * r[i] + s * r[i + 1], -s * r[i] + c * r[i + 1]
        a, b = r[-2], r[-1]
        rho = np.hypot(a, b)
        c, s = (1.0, 0.0) if rho == 0.0 else (a / rho, b / rho)
        self._rot.append((c, s))
        # _g is the last entry of the rotated right-hand side beta * e_1
        self._g = -s * self._g
        self.residual_floor = abs(self._g)

    def hessenberg(self):
        k = self.steps
        hess = np.zeros((k + 1, k))
        for j, col in enumerate(self._cols):
            hess[: j + 2, j] = col
        return hess

    def block(self, i):
        """Read-only view of basis block ``i`` (0-based)."""
        if i >= self._nblocks:
            raise IndexError(i)
        view = self._basis[i].view()
        view.flags.writeable = False
        return view

    @property
    def nblocks(self):
        return self._nblocks

    def combine(self, y):
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.size > self._nblocks:
            raise DimensionError(f"{y.size} coefficients but {self._nblocks} blocks")
        return np.tensordot(y, self._basis[: y.size], axes=1)

    def decomposition(self):
        return GlobalArnoldiDecomp(
            blocks=self.blocks,
            hess=self.hessenberg(),
            beta=self.beta,
            breakdown_at=self.breakdown_at,
            apply=self.apply,
        )


def global_arnoldi(apply, b, k):
    """Run ``k`` steps of global Arnoldi from ``V_1 = b / ||b||_F``.

    Stops early, recording ``breakdown_at``, when the new direction
    vanishes relative to ``1e-12 * ||apply(V_j)||_F``.
    """
    return GlobalArnoldi(apply, b).extend(k).decomposition()


def residual_identity_check(decomp, y):
    """Deviation between the full-space and projected residual norms.

    Returns ``| ||apply(sum y_i V_i) - B||_F - ||H y - beta e_1||_2 |``. The
    two agree up to rounding while the blocks stay F-orthonormal.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    k = y.size
    if k > decomp.k:
        raise DimensionError(f"y has {k} entries but only {decomp.k} steps were run")
    b = decomp.beta * decomp.blocks[0]
    full = np.linalg.norm(decomp.apply(decomp.combine(y)) - b)
    rhs = np.zeros(k + 1)
    rhs[0] = decomp.beta
    small = np.linalg.norm(decomp.hess[: k + 1, :k] @ y - rhs)
    return float(abs(full - small))
