"""Cholesky factorization with jitter escalation, incremental extension, and
explicit-inverse augmentation for growing kernel matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import FactorizationError, InputError, NumericalError

# Jitter escalation policy, relative to the mean diagonal.
JITTER_START_REL = 1e-6
JITTER_MAX_REL = 1e-2


@dataclass
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T = K + jitter * I."""

    L: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self.L, True), b)

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        return solve_triangular(self.L, b, lower=True)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.n))

    def extend(self, k_new: np.ndarray, k_nn: float) -> "CholeskyFactor":
        """Grow the factor by one row/column of the underlying matrix.

        k_nn must already include any diagonal (noise/jitter) term.
        Raises NumericalError when the Schur complement is not positive.
        """
        k_new = np.asarray(k_new, dtype=float).ravel()
        if k_new.shape != (self.n,):
            raise InputError("k_new has wrong length")
        l1 = self.solve_lower(k_new)
        s = float(k_nn + self.jitter) - float(l1 @ l1)
        if s <= 0.0 or not np.isfinite(s):
            raise NumericalError(f"nonpositive Schur complement {s:g} in Cholesky extension")
        n = self.n
        L = np.zeros((n + 1, n + 1))
        L[:n, :n] = self.L
        L[n, :n] = l1
        L[n, n] = np.sqrt(s)
        return CholeskyFactor(L, self.jitter)


def cholesky(K: np.ndarray, jitter: float = 0.0) -> CholeskyFactor:
    """Factorize a symmetric matrix, escalating jitter until it succeeds.

    The requested jitter is always added first; if the factorization fails,
    jitter restarts at JITTER_START_REL * mean(diag) and escalates tenfold up
    to JITTER_MAX_REL * mean(diag) before raising FactorizationError.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InputError("K must be square")
    if jitter < 0:
        raise InputError("jitter must be nonnegative")
    n = K.shape[0]
    eye = np.eye(n)
    mean_diag = float(np.mean(np.diag(K)))
    scale = mean_diag if mean_diag > 0 else 1.0

    tried = float(jitter)
    try:
        return CholeskyFactor(np.linalg.cholesky(K + jitter * eye), float(jitter))
    except np.linalg.LinAlgError:
        pass
    j = JITTER_START_REL * scale
    while j <= JITTER_MAX_REL * scale * (1.0 + 1e-12):
        tried = jitter + j
        try:
            return CholeskyFactor(np.linalg.cholesky(K + tried * eye), tried)
        except np.linalg.LinAlgError:
            j *= 10.0
    raise FactorizationError(
        f"matrix of size {n} not positive definite after jitter {tried:g}", tried
    )


@dataclass
class AugmentableInverse:
    """Explicit inverse of a PD matrix maintained under row/column growth."""

    inv: np.ndarray

    @property
    def n(self) -> int:
        return self.inv.shape[0]

    @classmethod
    def from_matrix(cls, K: np.ndarray, jitter: float = 0.0) -> "AugmentableInverse":
        return cls(cholesky(K, jitter).inverse())

    @classmethod
    def from_cholesky(cls, factor: CholeskyFactor) -> "AugmentableInverse":
        return cls(factor.inverse())


def augment_inverse(inv: AugmentableInverse, k_new: np.ndarray, k_nn: float) -> AugmentableInverse:
    """Inverse of the one-row/column-larger matrix, in O(n^2).

    k_nn must include its diagonal noise/jitter term. Raises NumericalError on
    a nonpositive Schur complement; callers fall back to a full
    refactorization.
    """
    k_new = np.asarray(k_new, dtype=float).ravel()
    if k_new.shape != (inv.n,):
        raise InputError("k_new has wrong length")
    b = inv.inv @ k_new
    gamma = float(k_nn) - float(k_new @ b)
    if gamma <= 0.0 or not np.isfinite(gamma):
        raise NumericalError(f"nonpositive Schur complement {gamma:g} in inverse augmentation")
    n = inv.n
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = inv.inv + np.outer(b, b) / gamma
    out[:n, n] = -b / gamma
    out[n, :n] = -b / gamma
    out[n, n] = 1.0 / gamma
    return AugmentableInverse(out)
