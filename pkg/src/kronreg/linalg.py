"""Dense matrix kernels used throughout the package.

Matrices are plain two-dimensional ``float64`` numpy arrays. Column vectors
are ``(n, 1)`` arrays where the distinction matters (``vec``); the least
squares helper also accepts flat vectors.
"""

import warnings

import numpy as np
import scipy.linalg as la

from .errors import CapacityError, DimensionError, RankError, SingularMatrixError

__all__ = [
    "as_mat",
    "frobenius_inner",
    "frobenius_norm",
    "kron",
    "vec",
    "unvec",
    "solve_dense",
    "lstsq",
]

# Largest entry count we are willing to materialize for a Kronecker product.
MAX_ENTRIES = 2**31

SINGULAR_PIVOT_TOL = 1e-14
RANK_TOL = 1e-12


def as_mat(a, name="matrix"):
    """Return `a` as a finite two-dimensional float64 array.

    One-dimensional input is promoted to a column vector.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def frobenius_inner(a, b):
    """Frobenius inner product ``trace(a.T @ b)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b))


def frobenius_norm(a):
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


def kron(a, b):
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = as_mat(a, "a")
    b = as_mat(b, "b")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > MAX_ENTRIES:
        raise CapacityError(f"Kronecker product of size {rows}x{cols} is too large")
    return np.kron(a, b)


def vec(x):
    """Stack the columns of `x` into a column vector."""
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(-1, 1, order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != rows * cols:
        raise DimensionError(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def solve_dense(a, rhs):
    """Solve ``a @ x = rhs`` by LU factorization with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``1e-14 * ||a||_F``.
    """
    a = as_mat(a, "a")
    rhs_arr = np.asarray(rhs, dtype=np.float64)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"solve_dense needs a square matrix, got {a.shape}")
    if rhs_arr.shape[0] != a.shape[0]:
        raise DimensionError(
            f"right-hand side has {rhs_arr.shape[0]} rows, expected {a.shape[0]}"
        )
    scale = np.linalg.norm(a)
    if scale == 0.0:
        raise SingularMatrixError("matrix is identically zero")
    with warnings.catch_warnings():
        # singularity is reported through SingularMatrixError below
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(a, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < SINGULAR_PIVOT_TOL * scale:
        raise SingularMatrixError("matrix is numerically singular")
    return la.lu_solve((lu, piv), rhs_arr, check_finite=False)


def lstsq(a, rhs):
    """Minimize ``||a @ y - rhs||_2`` through a column-pivoted QR factorization.

    Parameters
    ----------
    a : (m, k) array_like with m >= k
    rhs : (m,) or (m, 1) array_like

    Returns
    -------
    y : (k,) ndarray

    Raises
    ------
    RankError
        If ``a`` is rank deficient relative to ``1e-12``.
    """
    a = as_mat(a, "a")
    rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
    m, k = a.shape
    if m < k:
        raise DimensionError(f"lstsq needs rows >= cols, got {a.shape}")
    if rhs.shape[0] != m:
        raise DimensionError(f"right-hand side has {rhs.shape[0]} rows, expected {m}")
    q, r, perm = la.qr(a, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(r))
    if k == 0:
        return np.zeros(0)
    if diag[0] == 0.0 or diag[-1] <= RANK_TOL * diag[0]:
        raise RankError("least-squares matrix is rank deficient")
    z = la.solve_triangular(r, q.T @ rhs, check_finite=False)
    y = np.empty(k)
    y[perm] = z
    return y
