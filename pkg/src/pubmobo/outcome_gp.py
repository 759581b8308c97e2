"""Per-objective GP surrogates over the decision box.

Inputs are normalized to the unit box and outputs standardized per objective;
all public operations speak original units. Each objective gets an
independent GP whose hyperparameters are MAP-fitted under Gamma priors. The
posterior supplies values, analytic gradients (mean and covariance of the
derivative process), incremental conditioning, and reparameterized sampling.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import InputError, NumericalError
from .kernels import (
    KernelSpec,
    kernel_grad_matrix,
    kernel_hessian,
    kernel_matrix,
    kernel_matrix_with_gprime,
    kernel_rowwise,
)
from .linalg import AugmentableInverse, CholeskyFactor, augment_inverse, cholesky
from .sampling import sobol_points

PROVENANCE_TAGS = ("init", "EXP", "GD", "GI")
DUPLICATE_TOL = 1e-10
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(concentration, rate) prior; logpdf up to an additive constant."""

    concentration: float
    rate: float

    def logpdf(self, x: float) -> float:
        return (self.concentration - 1.0) * np.log(x) - self.rate * x

    def dlogpdf_dlog(self, x: float) -> float:
        # derivative of logpdf(exp(t)) with respect to t = log x
        return (self.concentration - 1.0) - self.rate * x


@dataclass(frozen=True)
class HyperPriors:
    """Hyperprior and optimizer settings for outcome-model fitting."""

    kernel_family: str = "matern52"
    lengthscale: GammaPrior = GammaPrior(3.0, 6.0)
    outputscale: GammaPrior = GammaPrior(2.0, 0.15)
    noise_floor: float = 1e-6
    n_restarts: int = 8
    max_iter: int = 200
    gtol: float = 1e-5


class Dataset:
    """Decision/outcome table with provenance, tied to the decision box.

    Rows are rejected as duplicates when they coincide within 1e-10 in the
    normalized input box. All entries must be finite.
    """

    def __init__(self, X, Y, bounds, provenance=None, iteration=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        bounds = np.asarray(bounds, dtype=float)
        if bounds.shape != (X.shape[1], 2):
            raise InputError(f"bounds must have shape ({X.shape[1]}, 2)")
        if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise InputError("bounds must be finite with upper > lower")
        if X.shape[0] != Y.shape[0]:
            raise InputError("X and Y row counts differ")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InputError("dataset entries must be finite")
        self.X = X
        self.Y = Y
        self.bounds = bounds
        n = X.shape[0]
        self.provenance = list(provenance) if provenance is not None else ["init"] * n
        self.iteration = list(iteration) if iteration is not None else [0] * n
        if len(self.provenance) != n or len(self.iteration) != n:
            raise InputError("provenance/iteration length mismatch")
        for tag in self.provenance:
            if tag not in PROVENANCE_TAGS:
                raise InputError(f"unknown provenance tag {tag!r}")
        Xn = self.normalize(X)
        for i in range(n):
            d = np.max(np.abs(Xn[i + 1 :] - Xn[i]), axis=1) if i + 1 < n else np.array([])
            if d.size and np.min(d) <= DUPLICATE_TOL:
                raise InputError("duplicate rows in dataset (1e-10 normalized tolerance)")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_x(self) -> int:
        return self.X.shape[1]

    @property
    def n_f(self) -> int:
        return self.Y.shape[1]

    def normalize(self, X: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (np.asarray(X, dtype=float) - lo) / (hi - lo)

    def denormalize(self, Xn: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + np.asarray(Xn, dtype=float) * (hi - lo)

    def is_duplicate(self, x: np.ndarray) -> bool:
        xn = self.normalize(np.asarray(x, dtype=float))
        d = np.max(np.abs(self.normalize(self.X) - xn), axis=1)
        return bool(np.min(d) <= DUPLICATE_TOL)

    def append(self, x, y, provenance: str, iteration: int) -> "Dataset":
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if self.is_duplicate(x):
            raise InputError("appending a duplicate row")
        return Dataset(
            np.vstack([self.X, x[None, :]]),
            np.vstack([self.Y, y[None, :]]),
            self.bounds,
            self.provenance + [provenance],
            self.iteration + [iteration],
        )

    def to_jsonl(self) -> str:
        lines = []
        for i in range(self.n):
            lines.append(
                json.dumps(
                    {
                        "x": self.X[i].tolist(),
                        "y": self.Y[i].tolist(),
                        "provenance": self.provenance[i],
                        "iteration": self.iteration[i],
                    }
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str, bounds) -> "Dataset":
        X, Y, prov, it = [], [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            X.append(rec["x"])
            Y.append(rec["y"])
            prov.append(rec["provenance"])
            it.append(rec["iteration"])
        return cls(np.array(X), np.array(Y), bounds, prov, it)


@dataclass(frozen=True)
class GradientPosterior:
    """Posterior of the outcome gradients at one point.

    mean: (n_f, n_x) stacked gradient means; cov: (n_f, n_x, n_x) one
    covariance per objective, each symmetric PSD within tolerance.
    """

    mean: np.ndarray
    cov: np.ndarray


@dataclass
class _ObjectiveGP:
    spec: KernelSpec
    noise: float  # observation variance in standardized units
    chol: CholeskyFactor
    alpha: np.ndarray  # Ksigma^{-1} y_std
    inv: AugmentableInverse


def log_marginal_likelihood(spec: KernelSpec, noise: float, Xn: np.ndarray, y: np.ndarray) -> float:
    """Exact GP log marginal likelihood of standardized targets y at inputs Xn."""
    n = Xn.shape[0]
    K = kernel_matrix(spec, Xn) + noise * np.eye(n)
    factor = cholesky(K)
    alpha = factor.solve(y)
    return float(-0.5 * y @ alpha - 0.5 * factor.logdet() - 0.5 * n * np.log(2.0 * np.pi))


def _neg_log_posterior_and_grad(theta, Xn, y, priors: HyperPriors):
    nx = Xn.shape[1]
    ls = np.exp(theta[:nx])
    outputscale = float(np.exp(theta[nx]))
    noise = float(np.exp(theta[nx + 1]))
    spec = KernelSpec(priors.kernel_family, ls, outputscale)
    n = Xn.shape[0]
    Kf, gp = kernel_matrix_with_gprime(spec, Xn)
    K = Kf + noise * np.eye(n)
    try:
        factor = cholesky(K, 0.0)
    except Exception:
        return 1e12, np.zeros_like(theta)
    alpha = factor.solve(y)
    lml = -0.5 * y @ alpha - 0.5 * factor.logdet() - 0.5 * n * np.log(2.0 * np.pi)
    logprior = sum(priors.lengthscale.logpdf(l) for l in ls) + priors.outputscale.logpdf(
        outputscale
    )

    Kinv = factor.inverse()
    M = np.outer(alpha, alpha) - Kinv  # d lml = 0.5 tr(M dK)
    grad = np.zeros_like(theta)
    diff = Xn[:, None, :] - Xn[None, :, :]
    for d in range(nx):
        Dd = (diff[:, :, d] / ls[d]) ** 2
        dK = -2.0 * gp * Dd
        grad[d] = 0.5 * np.sum(M * dK) + priors.lengthscale.dlogpdf_dlog(ls[d])
    grad[nx] = 0.5 * np.sum(M * Kf) + priors.outputscale.dlogpdf_dlog(outputscale)
    grad[nx + 1] = 0.5 * noise * np.trace(M)
    return -(lml + logprior), -grad


def fit(dataset: Dataset, priors: HyperPriors | None = None, warm_start=None) -> "OutcomeModel":
    """MAP-fit one GP per objective.

    warm_start, when given, is a list of (KernelSpec, noise) per objective
    used as the first restart. Returns the best local optimum over
    priors.n_restarts Sobol-drawn log-space initializations; if no restart
    converges the best found is returned with a warning flag.
    """
    priors = priors or HyperPriors()
    if dataset.n < 2:
        raise InputError("fit requires at least 2 observations")
    Xn = dataset.normalize(dataset.X)
    y_mean = dataset.Y.mean(axis=0)
    y_std = np.maximum(dataset.Y.std(axis=0), STD_FLOOR)
    nx, nf = dataset.n_x, dataset.n_f

    # deterministic restart pool in log space
    n_restarts = max(priors.n_restarts, 1)
    unit = sobol_points(nx + 2, n_restarts)
    lo = np.concatenate([np.full(nx, np.log(0.08)), [np.log(0.2), np.log(1e-6)]])
    hi = np.concatenate([np.full(nx, np.log(1.5)), [np.log(5.0), np.log(1e-3)]])
    inits = lo + unit * (hi - lo)
    default = np.concatenate([np.full(nx, np.log(0.5)), [0.0, np.log(1e-4)]])
    bounds = (
        [(np.log(1e-3), np.log(1e3))] * nx
        + [(np.log(1e-6), np.log(1e6))]
        + [(np.log(priors.noise_floor), 0.0)]
    )

    objectives: list[_ObjectiveGP] = []
    any_warn = False
    for i in range(nf):
        y = (dataset.Y[:, i] - y_mean[i]) / y_std[i]
        starts = [default] + [inits[r] for r in range(n_restarts)]
        if warm_start is not None:
            spec0, noise0 = warm_start[i]
            starts[0] = np.concatenate(
                [
                    np.log(spec0.lengthscales),
                    [np.log(spec0.outputscale), np.log(max(noise0, priors.noise_floor))],
                ]
            )
        best = None
        converged = False
        for theta0 in starts:
            res = minimize(
                _neg_log_posterior_and_grad,
                theta0,
                args=(Xn, y, priors),
                method="L-BFGS-B",
                jac=True,
                bounds=bounds,
                options={"maxiter": priors.max_iter, "gtol": priors.gtol},
            )
            if best is None or res.fun < best.fun:
                best = res
            converged = converged or bool(res.success)
        if not converged:
            any_warn = True
        theta = best.x
        spec = KernelSpec(priors.kernel_family, np.exp(theta[:nx]), float(np.exp(theta[nx])))
        noise = float(np.exp(theta[nx + 1]))
        K = kernel_matrix(spec, Xn) + noise * np.eye(dataset.n)
        factor = cholesky(K)
        objectives.append(
            _ObjectiveGP(spec, noise, factor, factor.solve(y), AugmentableInverse.from_cholesky(factor))
        )
    if any_warn:
        warnings.warn("hyperparameter optimization did not converge; best restart kept")
    return OutcomeModel(dataset, objectives, y_mean, y_std, fit_warning=any_warn)


class OutcomeModel:
    """Fitted independent-GP surrogate of the outcome vector."""

    def __init__(self, dataset: Dataset, objectives, y_mean, y_std, fit_warning=False):
        self.dataset = dataset
        self.objectives = objectives
        self.y_mean = np.asarray(y_mean, dtype=float)
        self.y_std = np.asarray(y_std, dtype=float)
        self.fit_warning = fit_warning
        self._Xn = dataset.normalize(dataset.X)
        self._y_std_cols = (dataset.Y - self.y_mean) / self.y_std

    @property
    def n_f(self) -> int:
        return len(self.objectives)

    @property
    def n_x(self) -> int:
        return self.dataset.n_x

    @property
    def bounds(self) -> np.ndarray:
        return self.dataset.bounds

    def _clamp(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(x < lo) or np.any(x > hi):
            warnings.warn("query point outside model bounds; clamped")
            return np.clip(x, lo, hi)
        return x

    # -- value posterior ---------------------------------------------------

    def posterior_batch(self, X: np.ndarray):
        """Posterior mean/variance at many points, original units: (N,nf), (N,nf)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Xn = self.dataset.normalize(X)
        N = Xn.shape[0]
        mean = np.empty((N, self.n_f))
        var = np.empty((N, self.n_f))
        for i, obj in enumerate(self.objectives):
            ks = kernel_matrix(obj.spec, Xn, self._Xn)  # (N, n)
            mean[:, i] = ks @ obj.alpha
            var[:, i] = np.maximum(
                obj.spec.outputscale - np.sum(ks * (ks @ obj.inv.inv), axis=1), 0.0
            )
        return mean * self.y_std + self.y_mean, var * self.y_std**2

    def posterior(self, x):
        """Posterior mean and variance of each objective at one point."""
        x = self._clamp(np.asarray(x, dtype=float).ravel())
        mean, var = self.posterior_batch(x[None, :])
        return mean[0], var[0]

    def joint_pair_posterior(self, X1: np.ndarray, X2: np.ndarray):
        """Joint posterior over point pairs, vectorized over the batch.

        Returns (m1, m2, v11, v22, c12), each (B, n_f), in original units.
        """
        X1n = self.dataset.normalize(np.atleast_2d(X1))
        X2n = self.dataset.normalize(np.atleast_2d(X2))
        B = X1n.shape[0]
        out = [np.empty((B, self.n_f)) for _ in range(5)]
        m1, m2, v11, v22, c12 = out
        for i, obj in enumerate(self.objectives):
            k1 = kernel_matrix(obj.spec, X1n, self._Xn)
            k2 = kernel_matrix(obj.spec, X2n, self._Xn)
            m1[:, i] = k1 @ obj.alpha
            m2[:, i] = k2 @ obj.alpha
            G2 = k2 @ obj.inv.inv
            kc = kernel_rowwise(obj.spec, X1n, X2n)
            v11[:, i] = np.maximum(
                obj.spec.outputscale - np.sum(k1 * (k1 @ obj.inv.inv), axis=1), 0.0
            )
            v22[:, i] = np.maximum(obj.spec.outputscale - np.sum(k2 * G2, axis=1), 0.0)
            c12[:, i] = kc - np.sum(k1 * G2, axis=1)
        s, m = self.y_std, self.y_mean
        return m1 * s + m, m2 * s + m, v11 * s**2, v22 * s**2, c12 * s**2

    # -- derivative posterior ----------------------------------------------

    def gradient_posterior(self, x, normalized: bool = False) -> GradientPosterior:
        """Gradient-process posterior at x.

        normalized=True reports in the internal normalized-input /
        standardized-output units used by the descent stage; the default is
        original units via the chain rule through both affine maps.
        """
        x = self._clamp(np.asarray(x, dtype=float).ravel())
        xn = self.dataset.normalize(x)
        width = self.bounds[:, 1] - self.bounds[:, 0]
        mean = np.empty((self.n_f, self.n_x))
        cov = np.empty((self.n_f, self.n_x, self.n_x))
        for i, obj in enumerate(self.objectives):
            G = kernel_grad_matrix(obj.spec, xn, self._Xn)  # (d, n)
            mu = G @ obj.alpha
            A = obj.chol.solve_lower(G.T)  # (n, d)
            C = kernel_hessian(obj.spec, xn, xn) - A.T @ A
            C = 0.5 * (C + C.T)
            if not normalized:
                mu = mu * self.y_std[i] / width
                C = C * self.y_std[i] ** 2 / np.outer(width, width)
            mean[i] = mu
            cov[i] = C
        return GradientPosterior(mean, cov)

    def gradient_mean_normalized(self, xn: np.ndarray) -> np.ndarray:
        """Gradient-posterior means at a normalized point, (n_f, n_x); fast path."""
        mean = np.empty((self.n_f, self.n_x))
        for i, obj in enumerate(self.objectives):
            G = kernel_grad_matrix(obj.spec, xn, self._Xn)
            mean[i] = G @ obj.alpha
        return mean

    # -- conditioning --------------------------------------------------------

    def condition(self, x, y) -> "OutcomeModel":
        """Return a new model conditioned on one more (x, y) observation.

        Hyperparameters, normalization and standardization stay fixed;
        factorizations grow incrementally with a dense fallback.
        """
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        new_dataset = self.dataset.append(x, y, "GD", max(self.dataset.iteration, default=0))
        return self._with_dataset(new_dataset)

    def conditioned_on(self, x, y, provenance: str, iteration: int) -> "OutcomeModel":
        new_dataset = self.dataset.append(x, y, provenance, iteration)
        return self._with_dataset(new_dataset)

    def _with_dataset(self, new_dataset: Dataset) -> "OutcomeModel":
        xn = new_dataset.normalize(new_dataset.X[-1])
        y_new = (new_dataset.Y[-1] - self.y_mean) / self.y_std
        new_objs = []
        Xn_old = self._Xn
        for i, obj in enumerate(self.objectives):
            k_new = kernel_matrix(obj.spec, xn[None, :], Xn_old)[0]
            k_nn = obj.spec.outputscale + obj.noise
            try:
                factor = obj.chol.extend(k_new, k_nn)
                inv = augment_inverse(obj.inv, k_new, k_nn + obj.chol.jitter)
            except NumericalError:
                Xn_all = np.vstack([Xn_old, xn[None, :]])
                K = kernel_matrix(obj.spec, Xn_all) + obj.noise * np.eye(Xn_all.shape[0])
                factor = cholesky(K)
                inv = AugmentableInverse.from_cholesky(factor)
            y_col = np.concatenate([self._y_std_cols[:, i], [y_new[i]]])
            new_objs.append(_ObjectiveGP(obj.spec, obj.noise, factor, factor.solve(y_col), inv))
        return OutcomeModel(new_dataset, new_objs, self.y_mean, self.y_std, self.fit_warning)

    # -- sampling ------------------------------------------------------------

    def joint_posterior(self, xs: np.ndarray):
        """Joint posterior over q points: means (q, nf), covs (nf, q, q), original units."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        Xn = self.dataset.normalize(xs)
        q = Xn.shape[0]
        means = np.empty((q, self.n_f))
        covs = np.empty((self.n_f, q, q))
        for i, obj in enumerate(self.objectives):
            ks = kernel_matrix(obj.spec, Xn, self._Xn)
            means[:, i] = ks @ obj.alpha
            A = obj.chol.solve_lower(ks.T)
            C = kernel_matrix(obj.spec, Xn) - A.T @ A
            covs[i] = 0.5 * (C + C.T)
        return means * self.y_std + self.y_mean, covs * self.y_std[:, None, None] ** 2

    def sample_outcomes(self, xs: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
        """Reparameterized joint samples, (n_samples, q, n_f), original units.

        Base normal draws are keyed by seed, so repeated calls are identical;
        degenerate (zero-variance) directions sample exactly the mean.
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        q = xs.shape[0]
        means, covs = self.joint_posterior(xs)
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((int(n_samples), q, self.n_f))
        out = np.empty((int(n_samples), q, self.n_f))
        for i in range(self.n_f):
            L = _psd_sqrt(covs[i])
            out[:, :, i] = means[:, i] + z[:, :, i] @ L.T
        return out


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero."""
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.clip(w, 0.0, None))
