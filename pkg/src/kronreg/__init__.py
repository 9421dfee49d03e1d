"""Tikhonov regularization with Kronecker-structured operators.

Solves ``min ||K1 X K2^T - B||_F^2 + mu ||L1 X L2^T||_F^2`` on a global
Arnoldi subspace, choosing ``mu`` and the subspace dimension by the
discrepancy principle. Regularization factors may be composed with
orthogonal projectors that prescribe their range or null space.
"""

from .arnoldi import GlobalArnoldi, GlobalArnoldiDecomp, global_arnoldi, residual_identity_check
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    KronregError,
    PreconditionError,
    RankError,
    SingularMatrixError,
    TargetUnreachableError,
)
from .linalg import frobenius_inner, frobenius_norm, kron, lstsq, solve_dense, unvec, vec
from .pgm import read_pgm, to_gray, write_pgm
from .problems import (
    add_noise,
    blur_instance,
    blur_matrix,
    relative_error,
    shaw2d_instance,
    shaw_matrix,
    shaw_true_solution,
    synthetic_image,
)
from .regmat import (
    OrthoProjector,
    RegFactor,
    Side,
    StencilKind,
    closest_with_nullspace,
    closest_with_range,
    example_range_projector,
    make_stencil,
    nullspace_basis,
    projector_from_basis,
    reg_factor,
)
from .tikhonov import (
    SolveReport,
    TikhonovKronProblem,
    direct_solve,
    find_mu,
    penalty_gram,
    solve_general,
    solve_kron,
    solve_projected,
    standard_form_factor,
)

__version__ = "0.1.0"
