"""Acquisition functions for the three optimization stages and a shared
multi-restart maximizer.

The preference-query acquisition scores a candidate pair by the expected
utility of the better of its two (sampled) outcomes; the experimentation
acquisition scores a single candidate by expected utility improvement over
the incumbent; the descent-stage acquisition scores a candidate by how much
observing it would shrink the gradient-posterior trace at the current descent
point. All Monte Carlo estimators reuse fixed seed-keyed base draws so the
acquisition surfaces are deterministic and smooth for ascent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import kernel_grad_matrix, kernel_matrix
from .linalg import AugmentableInverse, augment_inverse, cholesky
from .outcome_gp import OutcomeModel
from .preference_gp import PreferenceModel
from .sampling import scale_to_bounds, sobol_points


@dataclass(frozen=True)
class McConfig:
    """Sample count and base seed for the Monte Carlo acquisition estimators."""

    n_samples: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InputError("n_samples must be >= 1")


@dataclass(frozen=True)
class AcqOptimizerConfig:
    """Multi-restart ascent settings for acquisition maximization."""

    n_restarts: int = 8
    raw_samples: int = 512
    max_iter: int = 100
    tol: float = 1e-6
    fd_step: float = 1e-4
    step_size: float = 0.02
    patience: int = 5

    def __post_init__(self):
        if self.n_restarts < 1:
            raise InputError("n_restarts must be >= 1")


def _chol2x2(v1, v2, c):
    """Vectorized Cholesky of [[v1, c], [c, v2]] with degenerate guards."""
    l11 = np.sqrt(np.clip(v1, 0.0, None))
    safe = l11 > 1e-12
    l21 = np.where(safe, c / np.where(safe, l11, 1.0), 0.0)
    l22 = np.sqrt(np.clip(v2 - l21**2, 0.0, None))
    return l11, l21, l22


def _eubo_base_draws(mc: McConfig):
    rng = np.random.default_rng(mc.seed)
    z_f = rng.standard_normal((mc.n_samples, 2))
    z_u = rng.standard_normal((mc.n_samples, 2))
    return z_f, z_u


def eubo_batch(X1, X2, outcome: OutcomeModel, pref: PreferenceModel, mc: McConfig) -> np.ndarray:
    """Pairwise-max expected utility for B candidate pairs, shape (B,)."""
    X1 = np.atleast_2d(X1)
    X2 = np.atleast_2d(X2)
    B, nf = X1.shape[0], outcome.n_f
    z_f, z_u = _eubo_base_draws(mc)
    S = mc.n_samples

    m1, m2, v11, v22, c12 = outcome.joint_pair_posterior(X1, X2)
    l11, l21, l22 = _chol2x2(v11, v22, c12)  # (B, nf) each
    y1 = m1[:, None, :] + l11[:, None, :] * z_f[None, :, 0, None]
    y2 = m2[:, None, :] + l21[:, None, :] * z_f[None, :, 0, None] + l22[:, None, :] * z_f[None, :, 1, None]

    um1, um2, uv1, uv2, uc = pref.utility_pair_stats(y1.reshape(-1, nf), y2.reshape(-1, nf))
    u11, u21, u22 = _chol2x2(uv1, uv2, uc)
    zu1 = np.broadcast_to(z_u[None, :, 0], (B, S)).ravel()
    zu2 = np.broadcast_to(z_u[None, :, 1], (B, S)).ravel()
    util1 = um1 + u11 * zu1
    util2 = um2 + u21 * zu1 + u22 * zu2
    return np.maximum(util1, util2).reshape(B, S).mean(axis=1)


def eubo(x1, x2, outcome: OutcomeModel, pref: PreferenceModel, mc: McConfig) -> float:
    """Expected utility of the better of two candidates (symmetric in the pair).

    The pair is canonically ordered before sampling so the fixed base-draw
    pairing makes eubo(x1, x2) == eubo(x2, x1) exactly.
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if tuple(x2) < tuple(x1):
        x1, x2 = x2, x1
    return float(eubo_batch(x1[None, :], x2[None, :], outcome, pref, mc)[0])


def qeiuu_batch(X, outcome: OutcomeModel, pref: PreferenceModel, incumbent_utility: float,
                mc: McConfig) -> np.ndarray:
    """Expected hinge improvement over the incumbent utility, shape (B,)."""
    X = np.atleast_2d(X)
    B, nf = X.shape[0], outcome.n_f
    rng = np.random.default_rng(mc.seed)
    z_f = rng.standard_normal((mc.n_samples, nf))
    z_u = rng.standard_normal(mc.n_samples)
    S = mc.n_samples

    mean, var = outcome.posterior_batch(X)
    y = mean[:, None, :] + np.sqrt(var)[:, None, :] * z_f[None, :, :]
    um, uv = pref.utility_mean_var(y.reshape(-1, nf))
    u = um + np.sqrt(np.clip(uv, 0.0, None)) * np.broadcast_to(z_u[None, :], (B, S)).ravel()
    return np.clip(u - incumbent_utility, 0.0, None).reshape(B, S).mean(axis=1)


def qeiuu(x, outcome, pref, incumbent_utility: float, mc: McConfig) -> float:
    return float(qeiuu_batch(np.asarray(x, float)[None, :], outcome, pref, incumbent_utility, mc)[0])


def incumbent(outcome: OutcomeModel, pref: PreferenceModel, X_observed):
    """Observed decision with maximal posterior-mean utility of posterior-mean
    outcomes; ties go to the earliest observation."""
    X = np.atleast_2d(np.asarray(X_observed, dtype=float))
    if X.shape[0] == 0:
        raise InputError("X_observed must be nonempty")
    mean, _ = outcome.posterior_batch(X)
    u, _ = pref.utility_mean_var(mean)
    i = int(np.argmax(u))
    return X[i].copy(), float(u[i])


# ---- gradient-information acquisition -------------------------------------------


class GiEvaluator:
    """Batched descent-stage acquisition around a fixed descent point.

    Caches the per-objective explicit inverse of the noisy kernel matrix and
    the gradient cross-covariances at the descent point; each candidate then
    costs O(n^2) through the rank-one inverse augmentation. Candidates whose
    Schur complement degenerates fall back to a dense refactorization.
    """

    def __init__(self, model: OutcomeModel, x_gd):
        self.model = model
        ds = model.dataset
        self.Xn = ds.normalize(ds.X)
        self.xgd_n = ds.normalize(np.asarray(x_gd, dtype=float).ravel())
        self._per_obj = []
        base = 0.0
        for obj in model.objectives:
            inv = obj.inv.inv
            G = kernel_grad_matrix(obj.spec, self.xgd_n, self.Xn)  # (d, n)
            base_i = float(np.sum((G @ inv) * G))
            self._per_obj.append((obj, inv, G, base_i))
            base += base_i
        self.baseline = base

    def batch(self, X_cand) -> np.ndarray:
        """Acquisition values for candidate rows in original coordinates."""
        Xc = self.model.dataset.normalize(np.atleast_2d(np.asarray(X_cand, dtype=float)))
        C = Xc.shape[0]
        total = np.full(C, 0.0)
        for obj, inv, G, base_i in self._per_obj:
            knT = kernel_matrix(obj.spec, self.Xn, Xc)  # (n, C)
            Bm = inv @ knT
            k_nn = obj.spec.outputscale + obj.noise + obj.chol.jitter
            gamma = k_nn - np.sum(knT * Bm, axis=0)
            g = kernel_grad_matrix(obj.spec, self.xgd_n, Xc)  # (d, C)
            diff = G @ Bm - g
            incr = np.sum(diff * diff, axis=0)
            ok = gamma > 1e-12
            vals = np.where(ok, incr / np.where(ok, gamma, 1.0), 0.0)
            if not np.all(ok):
                for c in np.where(~ok)[0]:
                    vals[c] = self._dense_increment(obj, Xc[c])
            total += base_i + vals
        return total

    def _dense_increment(self, obj, xc_n) -> float:
        Xall = np.vstack([self.Xn, xc_n[None, :]])
        K = kernel_matrix(obj.spec, Xall) + (obj.noise + obj.chol.jitter) * np.eye(Xall.shape[0])
        inv = cholesky(K).inverse()
        Gp = kernel_grad_matrix(obj.spec, self.xgd_n, Xall)
        return float(np.sum((Gp @ inv) * Gp)) - float(np.sum((Gp[:, :-1] @ inv[:-1, :-1]) * Gp[:, :-1]))


def gi(x_cand, x_gd, model: OutcomeModel) -> float:
    """Gradient-information value of one candidate (>= 0 up to roundoff).

    Routes through the cached explicit inverse and its rank-one augmentation;
    a degenerate Schur complement falls back to a dense refactorization.
    """
    lo, hi = model.bounds[:, 0], model.bounds[:, 1]
    xc = np.asarray(x_cand, dtype=float).ravel()
    if np.any(xc < lo - 1e-12) or np.any(xc > hi + 1e-12):
        raise InputError("candidate outside bounds")
    ds = model.dataset
    Xn = ds.normalize(ds.X)
    xgd_n = ds.normalize(np.asarray(x_gd, dtype=float).ravel())
    xc_n = ds.normalize(xc)
    Xall = np.vstack([Xn, xc_n[None, :]])
    total = 0.0
    for obj in model.objectives:
        k_new = kernel_matrix(obj.spec, xc_n[None, :], Xn)[0]
        k_nn = obj.spec.outputscale + obj.noise + obj.chol.jitter
        try:
            inv_aug = augment_inverse(obj.inv, k_new, k_nn)
        except Exception:
            K = kernel_matrix(obj.spec, Xall) + (obj.noise + obj.chol.jitter) * np.eye(
                Xall.shape[0]
            )
            inv_aug = AugmentableInverse.from_matrix(K)
        Gp = kernel_grad_matrix(obj.spec, xgd_n, Xall)
        total += float(np.sum((Gp @ inv_aug.inv) * Gp))
    return total


def gi_baseline(x_gd, model: OutcomeModel) -> float:
    """The acquisition evaluated with no candidate added (X' = X)."""
    return GiEvaluator(model, x_gd).baseline


# ---- shared maximizer ------------------------------------------------------------


def maximize_acquisition(f_batch, bounds, cfg: AcqOptimizerConfig, seed: int,
                         extra_pool=None):
    """Multi-restart projected first-order ascent over a box.

    A Sobol candidate pool (optionally extended with caller-provided
    candidates) seeds the restarts; gradients come from batched central
    differences; the final answer is the best of the ascent iterates and the
    best raw pool candidate, so the returned value never falls below the
    pool's. Deterministic for a fixed seed.
    """
    bounds = np.asarray(bounds, dtype=float)
    d = bounds.shape[0]
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo

    pool = scale_to_bounds(sobol_points(d, cfg.raw_samples, seed), lo, hi)
    if extra_pool is not None and len(extra_pool):
        pool = np.vstack([pool, np.clip(np.atleast_2d(extra_pool), lo, hi)])
    pool_vals = f_batch(pool)
    order = np.argsort(-pool_vals, kind="stable")
    R = min(cfg.n_restarts, pool.shape[0])
    X = pool[order[:R]].copy()
    pool_best_x = pool[order[0]].copy()
    pool_best_v = float(pool_vals[order[0]])

    h = cfg.fd_step * width
    lr = cfg.step_size * width
    m = np.zeros_like(X)
    v = np.zeros_like(X)
    b1, b2, eps = 0.9, 0.999, 1e-12
    cur_vals = pool_vals[order[:R]].copy()
    best_seen = float(np.max(cur_vals))
    best_x = X[int(np.argmax(cur_vals))].copy()
    stall = 0

    for it in range(1, cfg.max_iter + 1):
        shifts = np.empty((R, 2 * d, d))
        shifts[:] = X[:, None, :]
        for j in range(d):
            shifts[:, 2 * j, j] += h[j]
            shifts[:, 2 * j + 1, j] -= h[j]
        batch = np.concatenate([shifts.reshape(-1, d), X], axis=0)
        vals = f_batch(np.clip(batch, lo, hi))
        sv = vals[: R * 2 * d].reshape(R, d, 2)
        cur_vals = vals[R * 2 * d :]
        grad = (sv[:, :, 0] - sv[:, :, 1]) / (2.0 * h)

        it_best = float(np.max(cur_vals))
        if it_best > best_seen + cfg.tol:
            best_seen = it_best
            best_x = X[int(np.argmax(cur_vals))].copy()
            stall = 0
        else:
            stall += 1

        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        mhat = m / (1 - b1**it)
        vhat = v / (1 - b2**it)
        X = np.clip(X + lr * mhat / (np.sqrt(vhat) + eps), lo, hi)

        if stall >= cfg.patience:
            break

    final_vals = f_batch(X)
    cand_x = np.vstack([X, best_x[None, :], pool_best_x[None, :]])
    cand_v = np.concatenate([final_vals, [best_seen, pool_best_v]])
    i = int(np.argmax(cand_v))
    return cand_x[i].copy(), float(cand_v[i])


def maximize_eubo(outcome, pref, bounds, cfg: AcqOptimizerConfig, mc: McConfig, seed: int):
    """argmax over candidate pairs in the doubled box; returns (x1, x2)."""
    bounds = np.asarray(bounds, dtype=float)
    d = bounds.shape[0]
    joint = np.vstack([bounds, bounds])

    def f(batch):
        return eubo_batch(batch[:, :d], batch[:, d:], outcome, pref, mc)

    x, _ = maximize_acquisition(f, joint, cfg, seed)
    return x[:d], x[d:]


def maximize_qeiuu(outcome, pref, bounds, incumbent_utility: float, cfg: AcqOptimizerConfig,
                   mc: McConfig, seed: int):
    def f(batch):
        return qeiuu_batch(batch, outcome, pref, incumbent_utility, mc)

    x, _ = maximize_acquisition(f, np.asarray(bounds, dtype=float), cfg, seed)
    return x


def maximize_gi(model: OutcomeModel, x_gd, bounds, cfg: AcqOptimizerConfig, seed: int):
    """argmax of the descent-stage acquisition.

    The payoff is concentrated within a lengthscale-sized neighborhood of the
    descent point, which a global low-discrepancy pool rarely hits in higher
    dimensions, so half the pool is drawn from that neighborhood.
    """
    ev = GiEvaluator(model, x_gd)
    bounds = np.asarray(bounds, dtype=float)
    width = bounds[:, 1] - bounds[:, 0]
    ls_norm = np.mean([obj.spec.lengthscales for obj in model.objectives], axis=0)
    radius = np.minimum(ls_norm, 0.5) * width
    n_local = max(cfg.raw_samples // 2, 1)
    offsets = sobol_points(bounds.shape[0], n_local, seed + 1) - 0.5
    local = np.asarray(x_gd, dtype=float)[None, :] + 2.0 * radius * offsets
    x, _ = maximize_acquisition(ev.batch, bounds, cfg, seed, extra_pool=local)
    return x
