"""Local multi-gradient descent toward the Pareto front.

The min-norm convex combination of the posterior gradient means gives either
a common descent direction or a Pareto-stationarity certificate; the bounded
step follows it without projection, and the stage ends on a bounds violation
or a small squared step norm. Three variants differ only in what they
evaluate: the full variant refreshes the surrogate after every step and runs
gradient-information maximizations, the predicted-gradients variant never
evaluates, and the outcome-evaluation variant evaluates without the
information step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .outcome_gp import OutcomeModel

VARIANTS = ("full", "pg", "pg_oe")


@dataclass(frozen=True)
class SimplexWeights:
    """Convex weights over objectives: nonnegative, summing to one."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).ravel()
        if np.any(a < -1e-12) or abs(a.sum() - 1.0) > 1e-10:
            raise InputError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class GdConfig:
    n_gd: int = 10
    n_gi: int = 1
    eps_gd: float = 0.1
    eta: float = 0.05
    variant: str = "full"
    fw_max_steps: int = 200
    fw_gamma_tol: float = 1e-9

    def __post_init__(self):
        if self.n_gd < 0 or self.n_gi < 0:
            raise InputError("step counts must be >= 0")
        if self.eps_gd <= 0 or self.eta <= 0:
            raise InputError("eps_gd and eta must be positive")
        if self.variant not in VARIANTS:
            raise InputError(f"variant must be one of {VARIANTS}")


def frank_wolfe(M: np.ndarray, max_steps: int = 200, gamma_tol: float = 1e-9) -> SimplexWeights:
    """Minimize a^T M a over the probability simplex.

    Starts uniform and alternates toward-vertex and away-vertex moves with
    the closed-form exact line search for the quadratic (the away variant;
    the plain toward-only loop zig-zags on the simplex boundary and cannot
    reach tight tolerances in any reasonable step budget). The objective
    never increases; iteration stops when a toward-step size is at most
    gamma_tol.
    """
    weights, _ = frank_wolfe_trace(M, max_steps, gamma_tol)
    return weights


def frank_wolfe_trace(M: np.ndarray, max_steps: int = 200, gamma_tol: float = 1e-9):
    """frank_wolfe plus the per-iteration objective values (for diagnostics)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError("M must be square")
    if np.max(np.abs(M - M.T)) > 1e-8:
        raise InputError("M must be symmetric")
    nf = M.shape[0]
    alpha = np.full(nf, 1.0 / nf)
    history = [float(alpha @ M @ alpha)]
    if nf == 1:
        return SimplexWeights(alpha), history
    for _ in range(max_steps):
        Ma = M @ alpha
        a = float(alpha @ Ma)
        t = int(np.argmin(Ma))
        gap_toward = a - float(Ma[t])
        support = np.where(alpha > 1e-14)[0]
        v = int(support[np.argmax(Ma[support])])
        gap_away = float(Ma[v]) - a

        if gap_toward >= gap_away:
            # d = e_t - alpha, gamma in [0, 1]
            b, c = float(Ma[t]), float(M[t, t])
            denom = a - 2.0 * b + c  # d^T M d >= 0 for PSD M
            gamma = float(np.clip((a - b) / denom, 0.0, 1.0)) if denom > 1e-300 else 0.0
            alpha = (1.0 - gamma) * alpha + gamma * np.eye(nf)[t]
            history.append(float(alpha @ M @ alpha))
            if gamma <= gamma_tol:
                break
        else:
            # away move d = alpha - e_v, gamma in [0, alpha_v / (1 - alpha_v)]
            b, c = float(Ma[v]), float(M[v, v])
            denom = a - 2.0 * b + c
            gamma_max = alpha[v] / max(1.0 - alpha[v], 1e-300)
            gamma = float(np.clip((b - a) / denom, 0.0, gamma_max)) if denom > 1e-300 else 0.0
            alpha = (1.0 + gamma) * alpha - gamma * np.eye(nf)[v]
            alpha = np.clip(alpha, 0.0, None)
            alpha = alpha / alpha.sum()
            history.append(float(alpha @ M @ alpha))
    alpha = np.clip(alpha, 0.0, None)
    return SimplexWeights(alpha / alpha.sum()), history


def mgda_direction(grad_means: np.ndarray, fw_max_steps: int = 200, fw_gamma_tol: float = 1e-9):
    """Min-norm-weighted common direction from stacked gradient means.

    Returns (weights, direction, squared norm); a vanishing squared norm
    certifies Pareto stationarity of the current point under the surrogate.
    """
    G = np.atleast_2d(np.asarray(grad_means, dtype=float))
    if not np.all(np.isfinite(G)):
        raise InputError("gradient means must be finite")
    M = G @ G.T
    M = 0.5 * (M + M.T)
    w = frank_wolfe(M, fw_max_steps, fw_gamma_tol)
    d = w.alpha @ G
    return w, d, float(d @ d)


def gd_step(x, d, eta: float, bounds):
    """Unprojected step x - eta * d plus a box-membership flag."""
    x = np.asarray(x, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    bounds = np.asarray(bounds, dtype=float)
    x_next = x - eta * d
    in_bounds = bool(np.all(x_next >= bounds[:, 0]) and np.all(x_next <= bounds[:, 1]))
    return x_next, in_bounds


@dataclass
class GdStepRecord:
    step: int
    alpha: np.ndarray
    norm_sq: float
    in_bounds: bool
    evaluated: bool


@dataclass
class LocalGdResult:
    X_gd: np.ndarray  # (k, n_x) evaluated points, original coordinates
    Y_gd: np.ndarray  # (k, n_f)
    model: OutcomeModel
    eval_count: int
    steps: list = field(default_factory=list)


def local_gradient_descent(
    x_start,
    model: OutcomeModel,
    evaluate,
    gi_maximizer,
    cfg: GdConfig,
    on_step=None,
) -> LocalGdResult:
    """Run one descent stage from x_start (original coordinates).

    evaluate(x, tag) performs a true outcome evaluation and returns y, or
    None when the budget is exhausted, in which case the stage stops cleanly.
    gi_maximizer(model, x_gd) proposes the next information point (only used
    by the full variant). Gradient means, the stationarity threshold and the
    step size all live in normalized-input / standardized-output units; the
    evaluated points are reported in original coordinates.
    """
    ds = model.dataset
    unit_box = np.column_stack([np.zeros(ds.n_x), np.ones(ds.n_x)])
    xn = ds.normalize(np.asarray(x_start, dtype=float).ravel())
    X_gd: list[np.ndarray] = []
    Y_gd: list[np.ndarray] = []
    eval_count = 0
    steps: list[GdStepRecord] = []

    for i in range(cfg.n_gd):
        G = model.gradient_mean_normalized(xn)
        w, d, norm_sq = mgda_direction(G, cfg.fw_max_steps, cfg.fw_gamma_tol)
        xn, in_bounds = gd_step(xn, d, cfg.eta, unit_box)
        rec = GdStepRecord(i, w.alpha, norm_sq, in_bounds, False)
        steps.append(rec)
        if on_step is not None:
            on_step(rec)
        if not (in_bounds and norm_sq > cfg.eps_gd):
            break
        if cfg.variant == "pg":
            continue
        x_orig = ds.denormalize(xn)
        y = evaluate(x_orig, "GD")
        if y is None:
            break
        rec.evaluated = True
        eval_count += 1
        X_gd.append(x_orig)
        Y_gd.append(np.asarray(y, dtype=float))
        model = model.conditioned_on(x_orig, y, "GD", 0)
        if cfg.variant == "full":
            stop = False
            for _ in range(cfg.n_gi):
                x_gi = gi_maximizer(model, ds.denormalize(xn))
                y_gi = evaluate(x_gi, "GI")
                if y_gi is None:
                    stop = True
                    break
                eval_count += 1
                X_gd.append(np.asarray(x_gi, dtype=float))
                Y_gd.append(np.asarray(y_gi, dtype=float))
                model = model.conditioned_on(x_gi, y_gi, "GI", 0)
            if stop:
                break

    X = np.array(X_gd) if X_gd else np.empty((0, ds.n_x))
    Y = np.array(Y_gd) if Y_gd else np.empty((0, ds.n_f))
    return LocalGdResult(X, Y, model, eval_count, steps)
