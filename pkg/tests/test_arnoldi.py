import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kronreg.arnoldi import GlobalArnoldi, global_arnoldi, residual_identity_check
from kronreg.errors import CapacityError, DegenerateInputError, DimensionError
from kronreg.linalg import kron, vec
from kronreg.problems import blur_matrix


def standard_arnoldi(a, b, k):
    """Textbook modified Gram-Schmidt Arnoldi, used as an oracle."""
    n = b.size
    q = np.zeros((n, k + 1))
    h = np.zeros((k + 1, k))
    q[:, 0] = b / np.linalg.norm(b)
    for j in range(k):
        w = a @ q[:, j]
        for i in range(j + 1):
            h[i, j] = q[:, i] @ w
            w = w - h[i, j] * q[:, i]
        h[j + 1, j] = np.linalg.norm(w)
        q[:, j + 1] = w / h[j + 1, j]
    return q, h


def gram(blocks):
    flat = np.stack([b.ravel() for b in blocks])
    return flat @ flat.T


def kron_apply(k1, k2):
    return lambda v: k1 @ v @ k2.T


@pytest.fixture
def random_six():
    rng = np.random.default_rng(42)
    return rng.standard_normal((6, 6)), rng.standard_normal((6, 6)), rng.standard_normal((6, 6))


def test_identity_operator_breaks_down_immediately():
    b = np.random.default_rng(0).standard_normal((4, 3))
    d = global_arnoldi(lambda v: v, b, 5)
    assert d.breakdown_at == 1
    assert d.hess.shape == (2, 1)
    assert d.hess[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert len(d.blocks) == 1


def test_scalar_blocks():
    d = global_arnoldi(lambda v: 3.0 * v, np.array([[2.0]]), 1)
    assert d.beta == 2.0
    assert d.hess[0, 0] == pytest.approx(3.0)
    assert d.breakdown_at == 1


def test_random_six_invariants(random_six):
    k1, k2, b = random_six
    apply = kron_apply(k1, k2)
    d = global_arnoldi(apply, b, 5)
    assert len(d.blocks) == 6
    assert np.max(np.abs(gram(d.blocks) - np.eye(6))) <= 1e-10
    for j in range(5):
        lhs = apply(d.blocks[j])
        rhs = sum(d.hess[i, j] * d.blocks[i] for i in range(j + 2))
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)
    assert np.all(np.tril(d.hess, -2) == 0.0)
    np.testing.assert_allclose(d.blocks[0], b / np.linalg.norm(b))


def test_single_column_matches_standard_arnoldi():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((30, 30))
    b = rng.standard_normal(30)
    d = global_arnoldi(lambda v: a @ v, b, 12)
    q, h = standard_arnoldi(a, b, 12)
    assert np.max(np.abs(d.hess - h)) <= 1e-10
    for j, blk in enumerate(d.blocks):
        assert np.max(np.abs(blk.ravel() - q[:, j])) <= 1e-10


def test_span_property(random_six):
    k1, k2, _ = random_six
    k1, k2 = k1[:3, :3], k2[:2, :2]
    b = np.random.default_rng(3).standard_normal((3, 2))
    d = global_arnoldi(kron_apply(k1, k2), b, 4)
    big = kron(k2, k1)
    krylov = np.hstack([np.linalg.matrix_power(big, i) @ vec(b) for i in range(5)])
    for blk in d.blocks:
        coef = np.linalg.lstsq(krylov, vec(blk), rcond=None)[0]
        assert np.linalg.norm(krylov @ coef - vec(blk)) <= 1e-8


def test_blur_reorthogonalization_keeps_orthonormality():
    k = blur_matrix(64)
    b = np.random.default_rng(1).standard_normal((64, 64))
    d = global_arnoldi(kron_apply(k, k), b, 50)
    assert np.max(np.abs(gram(d.blocks) - np.eye(len(d.blocks)))) <= 1e-10


def test_errors():
    with pytest.raises(DegenerateInputError):
        GlobalArnoldi(lambda v: v, np.zeros((2, 2)))
    with pytest.raises(CapacityError):
        global_arnoldi(lambda v: v, np.ones((2, 2)), 5)
    with pytest.raises(DimensionError):
        global_arnoldi(lambda v: v[:1], np.ones((2, 2)), 1)


def test_full_dimension_forces_breakdown():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 3))
    d = global_arnoldi(kron_apply(a, np.eye(1)), rng.standard_normal((3, 1)), 3)
    assert d.breakdown_at == 3
    assert len(d.blocks) == 3


def test_incremental_extension_matches_one_shot(random_six):
    k1, k2, b = random_six
    apply = kron_apply(k1, k2)
    builder = GlobalArnoldi(apply, b)
    builder.extend(2).extend(5)
    one_shot = global_arnoldi(apply, b, 5)
    np.testing.assert_array_equal(builder.hessenberg(), one_shot.hess)


def test_block_views_are_read_only(random_six):
    k1, k2, b = random_six
    builder = GlobalArnoldi(kron_apply(k1, k2), b).extend(2)
    with pytest.raises(ValueError):
        builder.block(0)[0, 0] = 1.0


def test_residual_floor_matches_projected_least_squares(random_six):
    k1, k2, b = random_six
    builder = GlobalArnoldi(kron_apply(k1, k2), b)
    for k in range(1, 8):
        builder.extend(k)
        h = builder.hessenberg()
        rhs = np.zeros(k + 1)
        rhs[0] = builder.beta
        y = np.linalg.lstsq(h, rhs, rcond=None)[0]
        assert builder.residual_floor == pytest.approx(np.linalg.norm(h @ y - rhs), rel=1e-9)


def test_residual_identity_zero_iterate(random_six):
    k1, k2, b = random_six
    d = global_arnoldi(kron_apply(k1, k2), b, 4)
    assert residual_identity_check(d, np.zeros(4)) == pytest.approx(0.0, abs=1e-14 * d.beta)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_residual_identity_random(seed, k):
    rng = np.random.default_rng(seed)
    k1, k2, b = (rng.standard_normal((6, 6)) for _ in range(3))
    d = global_arnoldi(kron_apply(k1, k2), b, k)
    y = rng.standard_normal(d.k)
    assert residual_identity_check(d, y) <= 1e-10 * d.beta


def test_residual_identity_at_happy_breakdown():
    # operator with a 2-dimensional invariant subspace containing b
    a = np.diag([2.0, 2.0, 5.0, 7.0])
    b = np.array([[1.0], [1.0], [1.0], [0.0]])
    d = global_arnoldi(lambda v: a @ v, b, 4)
    assert d.breakdown_at == 2
    h = d.hess[:2, :2]
    y = np.linalg.solve(h, [d.beta, 0.0])
    assert residual_identity_check(d, y) <= 1e-10 * d.beta
    full = np.linalg.norm(a @ d.combine(y) - b)
    assert full <= 1e-12 * d.beta


def test_combine_rejects_too_many_coefficients(random_six):
    k1, k2, b = random_six
    d = global_arnoldi(kron_apply(k1, k2), b, 2)
    with pytest.raises(DimensionError):
        d.combine(np.ones(5))
