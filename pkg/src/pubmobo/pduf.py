"""True utility functions for simulated users.

The dominance-preserving utility averages, over a set of centers, the product
of per-objective decreasing logistics; it is strictly decreasing in every
outcome coordinate, so a dominating outcome always scores higher. The
negative-l1 alternative is kept as the baseline it is compared against, and a
simulated-user oracle turns either into pairwise answers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import InputError


@dataclass(frozen=True)
class PdufSpec:
    """Logistic-product utility: centers (n_c, n_f) and steepness beta > 0."""

    centers: np.ndarray
    beta: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.ndim != 2 or c.shape[0] < 1:
            raise InputError("centers must be a nonempty 2-D array")
        if not np.all(np.isfinite(c)):
            raise InputError("centers must be finite")
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise InputError("beta must be positive")
        object.__setattr__(self, "centers", c)

    @property
    def n_c(self) -> int:
        return self.centers.shape[0]

    @property
    def n_f(self) -> int:
        return self.centers.shape[1]


def pduf_eval(spec: PdufSpec, y) -> float:
    """Mean over centers of the product of per-objective logistics; in (0, 1)."""
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise InputError("outcome must be finite")
    if y.shape[0] != spec.n_f:
        raise InputError("outcome dimension does not match centers")
    L = expit(-spec.beta * (y[None, :] - spec.centers))  # (n_c, n_f)
    return float(np.mean(np.prod(L, axis=1)))


def pduf_eval_batch(spec: PdufSpec, Y: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    L = expit(-spec.beta * (Y[:, None, :] - spec.centers[None, :, :]))
    return np.mean(np.prod(L, axis=2), axis=1)


def pduf_logeval_batch(spec: PdufSpec, Y: np.ndarray) -> np.ndarray:
    """log of the logistic-product utility, computed without underflow.

    log sigma(z) = -softplus(-z) keeps the strict ordering of the utility at
    any distance; the plain product underflows to exactly 0 beyond a few
    hundred steepness-scaled units, which would turn far-apart comparisons
    into ties.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    z = -spec.beta * (Y[:, None, :] - spec.centers[None, :, :])
    log_l = -np.logaddexp(0.0, -z)  # log sigma(z)
    return logsumexp(np.sum(log_l, axis=2), axis=1) - np.log(spec.n_c)


def make_centers(anchor, direction, n_c: int, spacing: float) -> np.ndarray:
    """Centers spaced `spacing` apart from `anchor` along a unit direction."""
    anchor = np.asarray(anchor, dtype=float).ravel()
    direction = np.asarray(direction, dtype=float).ravel()
    if n_c < 1:
        raise InputError("n_c must be >= 1")
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:
        raise InputError("direction must be nonzero")
    t = np.arange(n_c) * spacing
    return anchor[None, :] + t[:, None] * (direction / nrm)[None, :]


def l1_utility(ref, y) -> float:
    """Negative l1 distance to the reference point."""
    ref = np.asarray(ref, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if not (np.all(np.isfinite(ref)) and np.all(np.isfinite(y))):
        raise InputError("inputs must be finite")
    return -float(np.sum(np.abs(y - ref)))


@dataclass(frozen=True)
class UtilityOracle:
    """True utility: either a PdufSpec or a negative-l1 reference point.

    When norm_lo/norm_hi are set, outcomes are affinely mapped onto that box
    before evaluation (steepness is only meaningful on a normalized scale);
    the centers/reference then live in normalized coordinates.
    """

    kind: str  # "pduf" | "neg_l1"
    pduf: PdufSpec | None = None
    ref: np.ndarray | None = None
    norm_lo: np.ndarray | None = None
    norm_hi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "pduf":
            if self.pduf is None:
                raise InputError("pduf oracle requires a PdufSpec")
        elif self.kind == "neg_l1":
            if self.ref is None:
                raise InputError("neg_l1 oracle requires a reference point")
            object.__setattr__(self, "ref", np.asarray(self.ref, dtype=float).ravel())
        else:
            raise InputError(f"unknown oracle kind {self.kind!r}")

    def _map(self, Y: np.ndarray) -> np.ndarray:
        if self.norm_lo is None:
            return Y
        return (Y - self.norm_lo) / (np.asarray(self.norm_hi) - np.asarray(self.norm_lo))

    def utility(self, y) -> float:
        y = self._map(np.asarray(y, dtype=float).ravel())
        if self.kind == "pduf":
            return pduf_eval(self.pduf, y)
        return l1_utility(self.ref, y)

    def utility_batch(self, Y: np.ndarray) -> np.ndarray:
        Y = self._map(np.atleast_2d(np.asarray(Y, dtype=float)))
        if self.kind == "pduf":
            return pduf_eval_batch(self.pduf, Y)
        return -np.sum(np.abs(Y - self.ref), axis=1)

    def comparison_key_batch(self, Y: np.ndarray) -> np.ndarray:
        """Strictly monotone transform of the utility used for comparisons.

        For the logistic-product utility this is the log utility, which keeps
        the exact mathematical ordering at distances where the plain value
        underflows to zero.
        """
        Y = self._map(np.atleast_2d(np.asarray(Y, dtype=float)))
        if self.kind == "pduf":
            return pduf_logeval_batch(self.pduf, Y)
        return -np.sum(np.abs(Y - self.ref), axis=1)


def simulated_user(oracle: UtilityOracle, y1, y2) -> int:
    """0 iff u(y1) > u(y2); ties resolve to 0 deterministically."""
    keys = oracle.comparison_key_batch(np.vstack([np.ravel(y1), np.ravel(y2)]))
    return 0 if keys[0] >= keys[1] else 1
