"""Latent utility model over outcome space, learned from pairwise comparisons.

A zero-mean GP prior over utility values at the distinct compared outcomes is
combined with a probit comparison likelihood; the posterior is approximated by
a Laplace expansion at the MAP latents (Newton with step halving). Outcomes
are normalized to the unit box during fitting; the comparison noise is fixed
in that normalized utility scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_ndtr
from scipy.stats import norm

from .errors import InputError
from .kernels import KernelSpec, kernel_matrix, kernel_rowwise
from .linalg import CholeskyFactor, cholesky
from .outcome_gp import GammaPrior
from .sampling import sobol_points

PREF_NOISE = 0.01
K_JITTER = 1e-8
OUTPUTSCALE_BOX = (0.01, 100.0)


@dataclass(frozen=True)
class ComparisonRecord:
    """One pairwise comparison; r = 0 means y1 was preferred."""

    y1: np.ndarray
    y2: np.ndarray
    r: int
    source: str = "simulated"
    timestamp: float | None = None

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float).ravel()
        y2 = np.asarray(self.y2, dtype=float).ravel()
        if y1.shape != y2.shape:
            raise InputError("comparison outcomes must have equal dimension")
        if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(y2))):
            raise InputError("comparison outcomes must be finite")
        if np.array_equal(y1, y2):
            raise InputError("comparison outcomes must differ")
        if self.r not in (0, 1):
            raise InputError("r must be 0 or 1")
        if self.source not in ("human", "simulated"):
            raise InputError("source must be 'human' or 'simulated'")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)

    @property
    def winner(self) -> np.ndarray:
        return self.y1 if self.r == 0 else self.y2

    @property
    def loser(self) -> np.ndarray:
        return self.y2 if self.r == 0 else self.y1

    def to_json(self) -> str:
        return json.dumps(
            {
                "y1": self.y1.tolist(),
                "y2": self.y2.tolist(),
                "r": self.r,
                "source": self.source,
                "timestamp": self.timestamp,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "ComparisonRecord":
        d = json.loads(line)
        return cls(np.array(d["y1"]), np.array(d["y2"]), d["r"], d["source"], d.get("timestamp"))


def comparisons_to_jsonl(records) -> str:
    return "\n".join(r.to_json() for r in records) + "\n"


def comparisons_from_jsonl(text: str):
    return [ComparisonRecord.from_json(line) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class PreferencePriors:
    lengthscale: GammaPrior = GammaPrior(2.4, 2.7)
    outputscale_box: tuple = OUTPUTSCALE_BOX
    pref_noise: float = PREF_NOISE
    n_restarts: int = 4
    newton_max_iter: int = 50
    newton_tol: float = 1e-6
    max_halvings: int = 20
    hyper_max_iter: int = 30


def _site_index(records):
    """Distinct outcome sites and (winner, loser) index pairs."""
    sites: list[np.ndarray] = []
    index: dict[bytes, int] = {}

    def idx_of(y: np.ndarray) -> int:
        key = y.tobytes()
        if key not in index:
            index[key] = len(sites)
            sites.append(y)
        return index[key]

    pairs = [(idx_of(r.winner), idx_of(r.loser)) for r in records]
    return np.array(sites), np.array(pairs, dtype=int)


def _laplace_map(K_chol: CholeskyFactor, pairs, sigma, max_iter, tol, max_halvings, u0=None):
    """Newton MAP of the latents; returns (u, H_chol, psi_history, converged)."""
    m = K_chol.n
    win, lose = pairs[:, 0], pairs[:, 1]
    scale = 1.0 / (np.sqrt(2.0) * sigma)

    def z_of(u):
        return (u[win] - u[lose]) * scale

    def psi(u):
        Kinv_u = K_chol.solve(u)
        return float(np.sum(log_ndtr(z_of(u))) - 0.5 * u @ Kinv_u)

    u = np.zeros(m) if u0 is None else np.array(u0, dtype=float)
    history = [psi(u)]
    converged = False
    Kinv = K_chol.inverse()
    for _ in range(max_iter):
        z = z_of(u)
        s = np.exp(norm.logpdf(z) - log_ndtr(z))  # phi/Phi, stable for z << 0
        lam = s * (s + z)  # -d2 logPhi / dz2, positive
        grad_lik = np.zeros(m)
        np.add.at(grad_lik, win, s * scale)
        np.add.at(grad_lik, lose, -s * scale)
        grad = grad_lik - K_chol.solve(u)
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        W = np.zeros((m, m))
        w = lam * scale * scale
        np.add.at(W, (win, win), w)
        np.add.at(W, (lose, lose), w)
        np.add.at(W, (win, lose), -w)
        np.add.at(W, (lose, win), -w)
        H_factor = cholesky(Kinv + W, K_JITTER)
        step = H_factor.solve(grad)
        t = 1.0
        base = history[-1]
        for _ in range(max_halvings):
            cand = psi(u + t * step)
            if cand >= base:
                break
            t *= 0.5
        else:
            converged = True  # no ascent possible: treat as converged at mode
            break
        u = u + t * step
        history.append(cand)

    # final Hessian at the mode
    z = z_of(u)
    s = np.exp(norm.logpdf(z) - log_ndtr(z))
    lam = s * (s + z)
    W = np.zeros((m, m))
    w = lam * scale * scale
    np.add.at(W, (win, win), w)
    np.add.at(W, (lose, lose), w)
    np.add.at(W, (win, lose), -w)
    np.add.at(W, (lose, win), -w)
    H_factor = cholesky(Kinv + W, K_JITTER)
    return u, H_factor, history, converged


def _laplace_evidence(K_chol, H_chol, u, pairs, sigma):
    win, lose = pairs[:, 0], pairs[:, 1]
    z = (u[win] - u[lose]) / (np.sqrt(2.0) * sigma)
    loglik = float(np.sum(log_ndtr(z)))
    return loglik - 0.5 * float(u @ K_chol.solve(u)) - 0.5 * K_chol.logdet() - 0.5 * H_chol.logdet()


class PreferenceModel:
    """Laplace-approximated pairwise GP over normalized outcome space."""

    def __init__(self, records, sites, pairs, spec, lo, hi, u_map, K_chol, H_chol, alpha,
                 psi_history, converged):
        self.records = list(records)
        self.sites = sites
        self.pairs = pairs
        self.spec = spec
        self.lo = lo
        self.hi = hi
        self.u_map = u_map
        self.K_chol = K_chol
        self.H_chol = H_chol
        self.alpha = alpha
        self.psi_history = psi_history
        self.converged = converged
        self._sites_n = self._normalize(sites)
        self._Q = None  # lazy: K^{-1} - K^{-1} H^{-1} K^{-1}

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    def _normalize(self, Y: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(np.asarray(Y, dtype=float)) - self.lo) / (self.hi - self.lo)

    def _q_matrix(self) -> np.ndarray:
        """Predictive-variance kernel weight K^{-1} - K^{-1} H^{-1} K^{-1}.

        Folding the Laplace correction into one m x m matrix turns every
        posterior-variance query into a single matrix product.
        """
        if self._Q is None:
            Kinv = self.K_chol.inverse()
            self._Q = Kinv - Kinv @ self.H_chol.solve(Kinv)
        return self._Q

    def utility_mean_var(self, Y: np.ndarray):
        """Posterior mean and variance at outcome points, vectorized: (N,), (N,)."""
        Yn = self._normalize(Y)
        ks = kernel_matrix(self.spec, Yn, self._sites_n)  # (N, m)
        mean = ks @ self.alpha
        G = ks @ self._q_matrix()
        var = self.spec.outputscale - np.sum(ks * G, axis=1)
        return mean, var

    def utility_pair_stats(self, Y1: np.ndarray, Y2: np.ndarray):
        """Joint posterior stats for row-paired points: (m1, m2, v1, v2, c12)."""
        Y1n, Y2n = self._normalize(Y1), self._normalize(Y2)
        k1 = kernel_matrix(self.spec, Y1n, self._sites_n)
        k2 = kernel_matrix(self.spec, Y2n, self._sites_n)
        m1 = k1 @ self.alpha
        m2 = k2 @ self.alpha
        Q = self._q_matrix()
        G1 = k1 @ Q
        G2 = k2 @ Q
        v1 = self.spec.outputscale - np.sum(k1 * G1, axis=1)
        v2 = self.spec.outputscale - np.sum(k2 * G2, axis=1)
        kc = kernel_rowwise(self.spec, Y1n, Y2n)
        c12 = kc - np.sum(k1 * G2, axis=1)
        return m1, m2, v1, v2, c12

    def utility_posterior(self, ys: np.ndarray):
        """Laplace predictive at q outcome points: mean (q,), covariance (q, q)."""
        Yn = self._normalize(ys)
        ks = kernel_matrix(self.spec, Yn, self._sites_n)
        mean = ks @ self.alpha
        cov = kernel_matrix(self.spec, Yn) - ks @ self._q_matrix() @ ks.T
        return mean, 0.5 * (cov + cov.T)

    def sample_utilities(self, ys: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
        """Reparameterized joint utility samples, (n_samples, q); seed-keyed."""
        mean, cov = self.utility_posterior(ys)
        w, V = np.linalg.eigh(cov)
        L = V * np.sqrt(np.clip(w, 0.0, None))
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((int(n_samples), mean.size))
        return mean + z @ L.T


def fit_preferences(
    records,
    priors: PreferencePriors | None = None,
    norm_bounds=None,
    warm_spec: KernelSpec | None = None,
    refit_hyperparams: bool = True,
) -> PreferenceModel:
    """Fit the pairwise GP to a comparison set.

    norm_bounds, when given, is (lo, hi) arrays of the outcome box used for
    normalization (callers keep it at the running min/max of observed
    outcomes). Hyperparameters are MAP-fitted on the Laplace-approximate
    marginal likelihood unless refit_hyperparams is False, in which case
    warm_spec (or a default) is used directly.
    """
    priors = priors or PreferencePriors()
    records = list(records)
    if len(records) == 0:
        raise InputError("need at least one comparison")
    sites, pairs = _site_index(records)
    nf = sites.shape[1]
    if norm_bounds is not None:
        lo = np.asarray(norm_bounds[0], dtype=float)
        hi = np.asarray(norm_bounds[1], dtype=float)
    else:
        lo, hi = sites.min(axis=0), sites.max(axis=0)
    width = hi - lo
    degenerate = width <= 0
    hi = np.where(degenerate, lo + 1.0, hi)
    sites_n = (sites - lo) / (hi - lo)

    box_lo, box_hi = priors.outputscale_box

    def spec_from(theta):
        ls = np.exp(theta[:nf])
        os_ = box_lo + (box_hi - box_lo) * expit(theta[nf])
        return KernelSpec("rbf", ls, float(os_))

    def theta_from(spec):
        frac = (spec.outputscale - box_lo) / (box_hi - box_lo)
        frac = np.clip(frac, 1e-9, 1 - 1e-9)
        return np.concatenate([np.log(spec.lengthscales), [np.log(frac / (1 - frac))]])

    warm_u = {"u": None}

    def neg_evidence(theta):
        try:
            spec = spec_from(theta)
            K = kernel_matrix(spec, sites_n)
            K_chol = cholesky(K, K_JITTER)
            u, H_chol, _, _ = _laplace_map(
                K_chol, pairs, priors.pref_noise, priors.newton_max_iter,
                priors.newton_tol, priors.max_halvings, warm_u["u"],
            )
        except (InputError, FloatingPointError, np.linalg.LinAlgError):
            return 1e12
        warm_u["u"] = u
        ev = _laplace_evidence(K_chol, H_chol, u, pairs, priors.pref_noise)
        ev += sum(priors.lengthscale.logpdf(l) for l in spec.lengthscales)
        return -ev

    default_spec = warm_spec or KernelSpec("rbf", np.full(nf, 0.5), 1.0)
    if refit_hyperparams:
        starts = [theta_from(default_spec)]
        # sites can cluster at a tiny fraction of the normalized box (outcome
        # outliers stretch it), so the restart pool must reach short scales
        unit = sobol_points(nf + 1, max(priors.n_restarts, 1))
        lo_t = np.concatenate([np.full(nf, np.log(0.005)), [-3.0]])
        hi_t = np.concatenate([np.full(nf, np.log(2.0)), [3.0]])
        starts += [lo_t + u * (hi_t - lo_t) for u in unit]
        starts.append(np.concatenate([np.full(nf, np.log(0.02)), [0.0]]))
        theta_bounds = [(np.log(1e-4), np.log(1e3))] * nf + [(-10.0, 10.0)]
        best = None
        for theta0 in starts:
            res = minimize(
                neg_evidence, theta0, method="L-BFGS-B", bounds=theta_bounds,
                options={"maxiter": priors.hyper_max_iter, "eps": 1e-4},
            )
            if best is None or res.fun < best.fun:
                best = res
        spec = spec_from(best.x)
    else:
        spec = default_spec

    K = kernel_matrix(spec, sites_n)
    K_chol = cholesky(K, K_JITTER)
    u, H_chol, history, converged = _laplace_map(
        K_chol, pairs, priors.pref_noise, priors.newton_max_iter,
        priors.newton_tol, priors.max_halvings,
    )
    if not converged:
        import warnings

        warnings.warn("preference MAP Newton hit the iteration cap")
    alpha = K_chol.solve(u)
    return PreferenceModel(
        records, sites, pairs, spec, lo, hi, u, K_chol, H_chol, alpha, history, converged
    )
