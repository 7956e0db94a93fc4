"""Scalar kernel families for particle interaction and coreset selection.

Two families are provided: the Gaussian kernel
``k(x, y) = exp(-||x - y||^2 / (2 l^2))`` and a sum of periodic Sobolev
kernels of smoothness orders s in {1, 2, 3},

    k(x, y) = sum_s [ -1 + prod_j (1 + c_s * B_{2s}({x_j - y_j})) ],

where ``B_{2s}`` is the Bernoulli polynomial of degree 2s,
``c_s = (-1)^(s-1) (2 pi)^(2s) / (2s)!`` and ``{t} = t - floor(t)`` is the
floor-based fractional part, so the kernel lives on the unit torus.

Besides the scalar entry points (`eval`, `grad1`, `sup_bound`) the module
exposes vectorised forms (`cross`, `grad1_mean`, `diag`) used by the
dynamics engine and the thinning stage.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Gaussian:
    """Gaussian (RBF) kernel with a fixed lengthscale."""

    lengthscale: float = 1.0

    def __post_init__(self):
        if not (self.lengthscale > 0 and math.isfinite(self.lengthscale)):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")


@dataclass(frozen=True)
class SobolevSum:
    """Sum of periodic Sobolev kernels over the given smoothness orders."""

    orders: tuple = (1, 2, 3)

    def __post_init__(self):
        orders = tuple(sorted(set(int(s) for s in self.orders)))
        if not orders or not set(orders) <= {1, 2, 3}:
            raise ValueError(f"orders must be a nonempty subset of {{1,2,3}}, got {self.orders}")
        object.__setattr__(self, "orders", orders)


KernelSpec = Union[Gaussian, SobolevSum]

# Bernoulli polynomials B_{2s} and their derivatives as polyval coefficients
# (highest degree first).  B2 = t^2 - t + 1/6, B4 = t^4 - 2t^3 + t^2 - 1/30,
# B6 = t^6 - 3t^5 + (5/2)t^4 - (1/2)t^2 + 1/42.
_BPOLY = {
    1: np.array([1.0, -1.0, 1.0 / 6.0]),
    2: np.array([1.0, -2.0, 1.0, 0.0, -1.0 / 30.0]),
    3: np.array([1.0, -3.0, 2.5, 0.0, -0.5, 0.0, 1.0 / 42.0]),
}
_BPOLY_DERIV = {s: np.polyder(p) for s, p in _BPOLY.items()}
# c_s = (-1)^(s-1) (2 pi)^(2s) / (2s)!
_CS = {s: (-1.0) ** (s - 1) * (2.0 * math.pi) ** (2 * s) / math.factorial(2 * s) for s in (1, 2, 3)}


def _check_pair(x: np.ndarray, y: np.ndarray) -> None:
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape or x.size < 1:
        raise ValueError(f"expected two vectors of equal dimension, got shapes {x.shape} and {y.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("kernel inputs must be finite")


def eval(kernel: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for two points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_pair(x, y)
    return float(cross(kernel, x[None, :], y[None, :])[0, 0])


def grad1(kernel: KernelSpec, x, y) -> np.ndarray:
    """Gradient of k with respect to its first argument, at (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_pair(x, y)
    return grad1_mean(kernel, x[None, :], y[None, :])[0]


def sup_bound(kernel: KernelSpec, dim: int) -> float:
    """Finite upper bound on the kernel diagonal sup_x k(x, x).

    The Gaussian diagonal is identically 1.  The Sobolev diagonal is the
    constant obtained at fractional difference 0 in every coordinate.
    """
    if isinstance(kernel, Gaussian):
        return 1.0
    total = 0.0
    for s in kernel.orders:
        diag_factor = 1.0 + _CS[s] * np.polyval(_BPOLY[s], 0.0)
        total += diag_factor**dim - 1.0
    return float(total)


def cross(kernel: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise kernel matrix K[i, j] = k(X[i], Y[j]) for (n,d) and (m,d) inputs."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if isinstance(kernel, Gaussian):
        sq = _sqdist(X, Y)
        return np.exp(sq / (-2.0 * kernel.lengthscale**2))
    frac = _abs_frac(X[:, None, :] - Y[None, :, :])
    out = np.zeros(frac.shape[:2])
    for s in kernel.orders:
        factors = 1.0 + _CS[s] * np.polyval(_BPOLY[s], frac)
        out += np.prod(factors, axis=-1) - 1.0
    return out


def cross_batch2(kernel: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Blockwise cross matrices (b, n, m) for stacks (b, n, d) and (b, m, d)."""
    if isinstance(kernel, Gaussian):
        sa = np.einsum("bnd,bnd->bn", A, A)
        sb = np.einsum("bmd,bmd->bm", B, B)
        sq = sa[:, :, None] + sb[:, None, :] - 2.0 * (A @ np.swapaxes(B, 1, 2))
        np.maximum(sq, 0.0, out=sq)
        sq /= -2.0 * kernel.lengthscale**2
        return np.exp(sq, out=sq)
    frac = _abs_frac(A[:, :, None, :] - B[:, None, :, :])
    out = np.zeros(frac.shape[:3])
    for s in kernel.orders:
        factors = 1.0 + _CS[s] * np.polyval(_BPOLY[s], frac)
        out += np.prod(factors, axis=-1) - 1.0
    return out


def cross_batch(kernel: KernelSpec, P: np.ndarray) -> np.ndarray:
    """Per-block Gram matrices (b, m, m) for a stack of point blocks (b, m, d)."""
    if isinstance(kernel, Gaussian):
        s = np.einsum("bmd,bmd->bm", P, P)
        sq = s[:, :, None] + s[:, None, :] - 2.0 * (P @ np.swapaxes(P, 1, 2))
        np.maximum(sq, 0.0, out=sq)
        sq /= -2.0 * kernel.lengthscale**2
        return np.exp(sq, out=sq)
    frac = _abs_frac(P[:, :, None, :] - P[:, None, :, :])
    out = np.zeros(frac.shape[:3])
    for s in kernel.orders:
        factors = 1.0 + _CS[s] * np.polyval(_BPOLY[s], frac)
        out += np.prod(factors, axis=-1) - 1.0
    return out


def diag(kernel: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Diagonal values k(x_i, x_i)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if isinstance(kernel, Gaussian):
        return np.ones(X.shape[0])
    return np.full(X.shape[0], sup_bound(kernel, X.shape[1]))


def grad1_mean(kernel: KernelSpec, X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Coreset-averaged first-argument gradient (1/M) sum_j grad1 k(x_i, c_j).

    Returns an (n, d) array for probes X of shape (n, d) against a coreset C
    of shape (M, d).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    m = C.shape[0]
    if m == 0:
        raise ValueError("coreset must be nonempty")
    if isinstance(kernel, Gaussian):
        K = cross(kernel, X, C)
        # grad1 k(x, c) = -(x - c)/l^2 * k(x, c); the coreset mean reduces to
        # row sums plus one matrix product.
        scale = 1.0 / (m * kernel.lengthscale**2)
        return (K @ C - X * K.sum(axis=1)[:, None]) * scale
    diff = X[:, None, :] - C[None, :, :]  # (n, m, d)
    frac = _abs_frac(diff)
    # chain rule through |diff|; at exact-integer differences the right
    # derivative of the fractional part is used
    sign = np.where((diff >= 0.0) | (frac == 0.0), 1.0, -1.0)
    grad = np.zeros_like(frac)
    for s in kernel.orders:
        factors = 1.0 + _CS[s] * np.polyval(_BPOLY[s], frac)  # (n, m, d)
        dfac = _CS[s] * np.polyval(_BPOLY_DERIV[s], frac) * sign
        grad += _prod_excluding_one(factors) * dfac
    return grad.sum(axis=1) / m


def _sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    sx = np.einsum("nd,nd->n", X, X)
    sy = np.einsum("md,md->m", Y, Y)
    sq = sx[:, None] + sy[None, :] - 2.0 * (X @ Y.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def _abs_frac(diff: np.ndarray) -> np.ndarray:
    """Fractional part of |diff|, the kernel's canonical torus coordinate.

    B_{2s}({t}) = B_{2s}({-t}) by the polynomials' symmetry about 1/2, and
    |x - y| is bit-identical under argument swap, so evaluating at {|x - y|}
    makes the kernel exactly symmetric in floating point.
    """
    a = np.abs(diff)
    return a - np.floor(a)


def _prod_excluding_one(factors: np.ndarray) -> np.ndarray:
    """prod over the last axis with one coordinate left out, per coordinate."""
    d = factors.shape[-1]
    if d == 1:
        return np.ones_like(factors)
    left = np.cumprod(factors, axis=-1)
    right = np.cumprod(factors[..., ::-1], axis=-1)[..., ::-1]
    out = np.empty_like(factors)
    out[..., 0] = right[..., 1]
    out[..., -1] = left[..., -2]
    if d > 2:
        out[..., 1:-1] = left[..., :-2] * right[..., 2:]
    return out
