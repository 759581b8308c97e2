"""Stationary ARD kernels (Matern-5/2 and RBF) with analytic first and second
derivatives.

Everything is expressed through the scaled squared distance
v = sum_d ((x_d - x2_d) / ls_d)^2, so the radial profile g(v) and its
derivatives g'(v), g''(v) fully determine values, gradients and the cross
Hessian d^2 k / dx dx2^T without any singularity at v = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

FAMILIES = ("matern52", "rbf")

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    """ARD kernel description: family, per-dimension lengthscales, outputscale.

    outputscale is the signal variance multiplier (kernel value at zero
    distance). Both kernel families are C^2, as the derivative posterior
    requires.
    """

    family: str
    lengthscales: np.ndarray
    outputscale: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise InputError("lengthscales must be a 1-D array")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise InputError("lengthscales must be finite and positive")
        if not np.isfinite(self.outputscale) or self.outputscale <= 0:
            raise InputError("outputscale must be finite and positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "outputscale", float(self.outputscale))

    @property
    def dim(self) -> int:
        return self.lengthscales.size


def _check_point(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise InputError(f"point has shape {x.shape}, expected ({spec.dim},)")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite point")
    return x


def _radial(spec: KernelSpec, v: np.ndarray):
    """Return (g, g', g'') of the radial profile at scaled squared distance v."""
    v = np.maximum(v, 0.0)
    s2 = spec.outputscale
    if spec.family == "rbf":
        g = s2 * np.exp(-0.5 * v)
        return g, -0.5 * g, 0.25 * g
    # matern52: s = sqrt(5 v)
    s = np.sqrt(5.0 * v)
    e = np.exp(-s)
    g = s2 * (1.0 + s + s * s / 3.0) * e
    gp = -(5.0 * s2 / 6.0) * (1.0 + s) * e
    gpp = (25.0 * s2 / 12.0) * e
    return g, gp, gpp


def scaled_sqdist(spec: KernelSpec, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Pairwise sum_d ((X_i - X2_j)_d / ls_d)^2, shape (n, m)."""
    A = X / spec.lengthscales
    B = X2 / spec.lengthscales
    d2 = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.maximum(d2, 0.0)


def kernel_matrix(spec: KernelSpec, X: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
    """k(X, X2), shape (n, m). X2 defaults to X."""
    X = np.atleast_2d(X)
    X2 = X if X2 is None else np.atleast_2d(X2)
    g, _, _ = _radial(spec, scaled_sqdist(spec, X, X2))
    return g


def kernel_matrix_with_gprime(spec: KernelSpec, X: np.ndarray, X2: np.ndarray | None = None):
    """(k, g') pairwise matrices; g' is dk/dv, used for lengthscale gradients."""
    X = np.atleast_2d(X)
    X2 = X if X2 is None else np.atleast_2d(X2)
    g, gp, _ = _radial(spec, scaled_sqdist(spec, X, X2))
    return g, gp


def kernel_rowwise(spec: KernelSpec, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """k(X1_i, X2_i) for corresponding rows, shape (n,)."""
    D = (np.atleast_2d(X1) - np.atleast_2d(X2)) / spec.lengthscales
    g, _, _ = _radial(spec, np.sum(D * D, axis=1))
    return g


def kernel_grad_matrix(spec: KernelSpec, x: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Gradient of k(x, X_j) with respect to x, shape (d, n)."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(X)
    v = scaled_sqdist(spec, x[None, :], X)[0]
    _, gp, _ = _radial(spec, v)
    delta = (x[None, :] - X) / spec.lengthscales**2  # (n, d)
    return (2.0 * gp[:, None] * delta).T


def kernel_hessian(spec: KernelSpec, x: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Cross second derivative d^2 k / dx dx2^T, shape (d, d).

    At x2 = x this is the prior covariance of the gradient process and is
    symmetric PSD.
    """
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    v = scaled_sqdist(spec, x[None, :], x2[None, :])[0, 0]
    _, gp, gpp = _radial(spec, np.asarray(v))
    inv_ls2 = 1.0 / spec.lengthscales**2
    delta = (x - x2) * inv_ls2
    return -4.0 * float(gpp) * np.outer(delta, delta) - 2.0 * float(gp) * np.diag(inv_ls2)


def kernel_eval(spec: KernelSpec, x, x2, order: str = "value"):
    """Evaluate k, its gradient in x, or the cross Hessian at (x, x2).

    order="value" -> scalar; "grad" -> (d,); "hess" -> (d, d).
    """
    x = _check_point(spec, x)
    x2 = _check_point(spec, x2)
    if order == "value":
        return float(kernel_matrix(spec, x[None, :], x2[None, :])[0, 0])
    if order == "grad":
        return kernel_grad_matrix(spec, x, x2[None, :])[:, 0]
    if order == "hess":
        return kernel_hessian(spec, x, x2)
    raise InputError(f"unknown order {order!r}")
