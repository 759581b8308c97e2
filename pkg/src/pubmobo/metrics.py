"""Evaluation metrics: distance to the discretized front, reference-utility
argmax, utility regret, and a one-sided Mann-Whitney U test."""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np
from scipy.stats import norm, rankdata

from .benchmarks import ReferenceFront
from .errors import InputError, MetricError
from .pduf import UtilityOracle

EXACT_LIMIT = 20  # combined sample size up to which the exact null is enumerated


def dist_to_front(y, front: ReferenceFront) -> float:
    """Minimum squared Euclidean distance from y to the discretized front."""
    y = np.asarray(y, dtype=float).ravel()
    if front.points.shape[0] == 0:
        raise InputError("front is empty")
    d = front.points - y[None, :]
    return float(np.min(np.sum(d * d, axis=1)))


def best_utility_pareto_point(oracle: UtilityOracle, front: ReferenceFront):
    """Exhaustive argmax of the oracle over the front; ties take the lowest index."""
    if front.points.shape[0] == 0:
        raise InputError("front is empty")
    u = oracle.utility_batch(front.points)
    i = int(np.argmax(u))
    return front.points[i].copy(), float(u[i])


def utility_regret(oracle: UtilityOracle, y, u_star: float) -> float:
    """Normalized utility gap (u_star - u(y)) / u_star; requires u_star > 0."""
    if u_star <= 0:
        raise MetricError("utility_regret requires a positive reference utility")
    return (u_star - oracle.utility(y)) / u_star


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    lt = np.sum(a[:, None] < b[None, :])
    eq = np.sum(a[:, None] == b[None, :])
    return float(lt) + 0.5 * float(eq)


def mann_whitney_one_sided(a, b) -> float:
    """p-value for the alternative "a stochastically smaller than b".

    Exact permutation enumeration when the combined size is at most 20,
    otherwise the normal approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 1 or b.size < 1:
        raise InputError("samples must be nonempty")
    na, nb = a.size, b.size
    u_obs = _u_statistic(a, b)

    if na + nb <= EXACT_LIMIT:
        pooled = np.concatenate([a, b])
        # U = (sum of a-group midranks subtracted from its max) is equivalent to
        # counting pairs; enumerate group assignments over the pooled values.
        ranks = rankdata(pooled)  # midranks
        total = comb(na + nb, na)
        # U computed from rank sum: U_b-side pairs won by a = na*nb + na(na+1)/2 - R_a
        hits = 0
        for idx in combinations(range(na + nb), na):
            r_a = sum(ranks[list(idx)])
            u_perm = na * nb + na * (na + 1) / 2.0 - r_a
            if u_perm >= u_obs - 1e-12:
                hits += 1
        return hits / total

    n = na + nb
    mu = na * nb / 2.0
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = np.sum(counts**3 - counts) / (n * (n - 1.0))
    var = na * nb / 12.0 * ((n + 1.0) - tie_term)
    if var <= 0:
        return 1.0
    z = (u_obs - mu - 0.5) / np.sqrt(var)
    return float(norm.sf(z))
