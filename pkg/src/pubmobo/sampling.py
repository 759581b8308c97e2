"""Low-discrepancy sampling and deterministic seed derivation."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import qmc

from .errors import InputError

MAX_SOBOL_DIM = 32


def sobol_points(dim: int, count: int, seed: int | None = None) -> np.ndarray:
    """Sobol points in [0, 1)^dim, shape (count, dim).

    seed=None yields the unscrambled base sequence; an integer seed applies
    digital scrambling keyed by that seed. The index-0 point of the raw
    sequence (the origin when unscrambled) is skipped, so the base sequence
    starts 0.5, 0.75, 0.25, ...
    """
    if not isinstance(dim, (int, np.integer)) or not 1 <= dim <= MAX_SOBOL_DIM:
        raise InputError(f"dim must be an integer in [1, {MAX_SOBOL_DIM}], got {dim!r}")
    if count < 1:
        raise InputError("count must be >= 1")
    engine = qmc.Sobol(d=dim, scramble=seed is not None, seed=seed)
    engine.fast_forward(1)
    with warnings.catch_warnings():
        # scipy warns when count is not a power of two; balance is not needed here
        warnings.simplefilter("ignore", UserWarning)
        pts = engine.random(int(count))
    return np.asarray(pts, dtype=float)


def scale_to_bounds(unit: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Affine map of points in [0,1]^d onto the box [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return lower + unit * (upper - lower)


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers (run seed, stage tag, step)."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(1)[0])
