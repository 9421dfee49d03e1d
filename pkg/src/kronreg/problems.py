"""Test problems: two-dimensional shaw, Gaussian blur, synthetic images, noise.

Noise is drawn from a SplitMix64 counter generator with Box-Muller normals
so that a seed fixes the perturbation bit for bit on every platform:

* output ``i`` (``i = 1, 2, ...``) is the SplitMix64 finalizer applied to
  ``seed + i * 0x9E3779B97F4A7C15 (mod 2**64)``;
* a uniform in (0, 1) is ``((z >> 11) + 0.5) * 2**-53``;
* consecutive uniforms ``(u1, u2)`` give ``r cos(2 pi u2)`` and
  ``r sin(2 pi u2)`` with ``r = sqrt(-2 log u1)``, in that order;
* normals fill the noise matrix in row-major order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

__all__ = [
    "NoisySetup",
    "ProblemInstance",
    "splitmix64",
    "uniforms",
    "standard_normals",
    "shaw_matrix",
    "shaw_true_solution",
    "blur_matrix",
    "add_noise",
    "synthetic_image",
    "relative_error",
    "shaw2d_instance",
    "blur_instance",
    "IMAGE_KINDS",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

IMAGE_KINDS = ("checker", "blocks", "gradient")


@dataclass(frozen=True)
class NoisySetup:
    b_exact: np.ndarray
    b_noisy: np.ndarray
    eps: float
    noise_level: float
    seed: int


@dataclass(frozen=True)
class ProblemInstance:
    k1_factor: np.ndarray
    k2_factor: np.ndarray
    x_true: np.ndarray
    setup: NoisySetup
    name: str


def splitmix64(seed, count):
    """First `count` SplitMix64 outputs for `seed`, as a uint64 array."""
    state0 = np.uint64(int(seed) & _MASK64)
    counter = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = state0 + counter * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniforms(seed, count):
    z = splitmix64(seed, count)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed, count):
    """`count` standard normal deviates from the pinned generator."""
    pairs = (count + 1) // 2
    u = uniforms(seed, 2 * pairs)
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    theta = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


def _shaw_grid(n):
    h = np.pi / n
    return -np.pi / 2 + (np.arange(1, n + 1) - 0.5) * h, h


def shaw_matrix(n, variant="canonical"):
    """Midpoint-rule discretization of the shaw kernel on [-pi/2, pi/2].

    ``A[i, j] = h (cos t_i + cos t_j)^2 sinc^2(sin t_i + sin t_j)`` with the
    unnormalized sinc ``sin(u)/u`` at ``u = pi (sin t_i + sin t_j)``.

    ``variant="displayed"`` swaps in the mixed kernel
    ``(cos t_j + sin t_i)^2 (sin u / u)^2``, ``u = pi (sin t_j + cos t_i)``,
    for side-by-side comparisons; it is not symmetric.
    """
    if n < 4 or n % 2:
        raise DimensionError(f"shaw needs an even n >= 4, got {n}")
    t, h = _shaw_grid(n)
    ti, tj = t[:, None], t[None, :]
    if variant == "canonical":
        amp = np.cos(ti) + np.cos(tj)
        u = np.sin(ti) + np.sin(tj)
    elif variant == "displayed":
        amp = np.cos(tj) + np.sin(ti)
        u = np.sin(tj) + np.cos(ti)
    else:
        raise DomainError(f"unknown shaw variant {variant!r}")
    # np.sinc(x) = sin(pi x) / (pi x), with the limit 1 at x = 0
    return h * (amp * np.sinc(u)) ** 2


def shaw_true_solution(n):
    """Two Gaussian bumps on the shaw grid, shifted up by one."""
    if n % 2:
        raise DimensionError(f"shaw needs an even n, got {n}")
    t, _ = _shaw_grid(n)
    x = 2.0 * np.exp(-6.0 * (t - 0.8) ** 2) + np.exp(-2.0 * (t + 0.5) ** 2)
    return x + 1.0


def blur_matrix(n, band=5, sigma=1.5):
    """Symmetric banded Toeplitz Gaussian blur factor.

    First row ``z[j] = exp(-j^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`` for
    ``j < band`` and zero beyond.
    """
    if not 1 <= band <= n:
        raise DimensionError(f"band must lie in [1, {n}], got {band}")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    j = np.arange(band)
    z = np.zeros(n)
    z[:band] = np.exp(-(j**2) / (2.0 * sigma**2)) / (sigma * math.sqrt(2.0 * math.pi))
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    return z[idx]


def add_noise(b_exact, nu, seed):
    """Add white Gaussian noise scaled to relative level `nu`.

    ``E = nu ||B||_F E0 / ||E0||_F`` with ``E0`` from
    :func:`standard_normals`.
    """
    if nu < 0:
        raise DomainError(f"noise level must be nonnegative, got {nu}")
    b_exact = np.asarray(b_exact, dtype=np.float64)
    bnorm = np.linalg.norm(b_exact)
    if nu == 0:
        return NoisySetup(b_exact, b_exact.copy(), 0.0, 0.0, int(seed))
    if bnorm == 0:
        raise DomainError("cannot scale noise relative to a zero matrix")
    e0 = standard_normals(seed, b_exact.size).reshape(b_exact.shape)
    e = (nu * bnorm / np.linalg.norm(e0)) * e0
    b_noisy = b_exact + e
    return NoisySetup(b_exact, b_noisy, float(np.linalg.norm(e)), float(nu), int(seed))


def _qr_like(n):
    cell = -(-n // 25)
    cells = -(-n // cell)
    bits = (splitmix64(0x51C0DE, cells * cells) >> np.uint64(63)).astype(np.float64)
    grid = bits.reshape(cells, cells)
    if cells >= 15:
        finder = np.ones((7, 7))
        finder[1:6, 1:6] = 0.0
        finder[2:5, 2:5] = 1.0
        for r0, c0 in ((0, 0), (0, cells - 7), (cells - 7, 0)):
            grid[max(r0 - 1, 0):r0 + 8, max(c0 - 1, 0):c0 + 8] = 0.0
            grid[r0:r0 + 7, c0:c0 + 7] = finder
    img = np.kron(grid, np.ones((cell, cell)))
    return img[:n, :n]


def _blocks(n):
    img = np.zeros((n, n))
    y, x = np.mgrid[0:n, 0:n] / (n - 1)
    # body, two panels on struts, dish
    img[(np.abs(y - 0.5) < 0.12) & (np.abs(x - 0.5) < 0.08)] = 1.0
    panel = (np.abs(y - 0.5) < 0.07) & (np.abs(np.abs(x - 0.5) - 0.28) < 0.14)
    img[panel] = 0.6
    strut = (np.abs(y - 0.5) < 0.015) & (np.abs(x - 0.5) < 0.3)
    img[strut & (img == 0)] = 0.8
    dish = (y - 0.28) ** 2 + (x - 0.5) ** 2 < 0.07**2
    img[dish] = 0.85
    return img


def synthetic_image(kind, n):
    """Deterministic grayscale test image with values in [0, 1].

    ``checker`` is a binary QR-code-like pattern with module size
    ``ceil(n / 25)``, ``blocks`` a piecewise-constant object on a dark
    background and ``gradient`` a vertical ramp whose row ``i`` (0-based)
    equals ``i / (n - 1)``.
    """
    if n < 8:
        raise DimensionError(f"synthetic images need n >= 8, got {n}")
    if kind == "checker":
        return _qr_like(n)
    if kind == "blocks":
        return _blocks(n)
    if kind == "gradient":
        return np.repeat((np.arange(n) / (n - 1))[:, None], n, axis=1)
    raise DomainError(f"unknown image kind {kind!r}; expected one of {IMAGE_KINDS}")


def relative_error(x, x_true):
    """``||x - x_true||_F / ||x_true||_F``; `x` may be ``vec(x_true)``-shaped."""
    x = np.asarray(x, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x.size != x_true.size:
        raise DimensionError(f"shape mismatch: {x.shape} vs {x_true.shape}")
    if x.shape != x_true.shape:
        x = x.reshape(x_true.shape, order="F")
    denom = np.linalg.norm(x_true)
    if denom == 0:
        raise DomainError("reference solution is zero")
    return float(np.linalg.norm(x - x_true) / denom)


def shaw2d_instance(n, nu, seed, variant="canonical"):
    """Separable shaw problem ``B = K x x^T K^T`` plus noise."""
    k = shaw_matrix(n, variant)
    x1 = shaw_true_solution(n)
    x_true = np.outer(x1, x1)
    b = k @ x_true @ k.T
    return ProblemInstance(k, k, x_true, add_noise(b, nu, seed), "shaw2d")


def blur_instance(n, nu, seed, image_kind="checker", band=5, sigma=1.5):
    """Blurred synthetic image ``B = K X K^T`` plus noise."""
    k = blur_matrix(n, band, sigma)
    x_true = synthetic_image(image_kind, n)
    b = k @ x_true @ k.T
    return ProblemInstance(k, k, x_true, add_noise(b, nu, seed), f"blur-{image_kind}")
