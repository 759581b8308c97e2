"""The outer optimization loop: initialization, the preference-exploration /
experimentation / gradient-descent stage schedule, budget accounting, and
trace emission.

The loop is written as a generator that yields whenever a pairwise comparison
is needed, so the same stage code drives both the simulated-user harness and
the interactive session service.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import acquisitions as acq
from . import outcome_gp, preference_gp
from .benchmarks import BenchmarkProblem, ReferenceFront, reference_front
from .errors import ConfigError, InputError
from .local_gd import GdConfig, local_gradient_descent
from .metrics import best_utility_pareto_point, dist_to_front, utility_regret
from .outcome_gp import Dataset, HyperPriors
from .pduf import UtilityOracle, simulated_user
from .preference_gp import ComparisonRecord, PreferencePriors
from .sampling import derive_seed, scale_to_bounds, sobol_points

METHODS = ("pub-mobo", "pub-mobo-pg", "pub-mobo-pg-oe", "eubo-qeiuu")

_METHOD_VARIANT = {
    "pub-mobo": "full",
    "pub-mobo-pg": "pg",
    "pub-mobo-pg-oe": "pg_oe",
}

# stage tags for seed derivation
_TAG_INIT_D = 1
_TAG_INIT_PREF = 2
_TAG_PE = 3
_TAG_EXP = 4
_TAG_GI = 5
_TAG_PE_MC = 6
_TAG_EXP_MC = 7

TRIGGER_TOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    method: str = "pub-mobo"
    budget: int = 100
    seed: int = 1
    n_init_outcome: int = 6
    n_init_pref: int = 12
    n_last: int = 2
    mc: acq.McConfig = acq.McConfig()
    acq_opt: acq.AcqOptimizerConfig = acq.AcqOptimizerConfig()
    gd: GdConfig = GdConfig()
    outcome_priors: HyperPriors = HyperPriors()
    pref_priors: PreferencePriors = PreferencePriors()
    pref_hyper_refit_every: int = 5
    front_resolution: int = 2001

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.budget < self.n_init_outcome:
            raise ConfigError(
                f"budget {self.budget} is below the initialization cost {self.n_init_outcome}"
            )
        if self.n_init_pref % 2:
            raise ConfigError("n_init_pref must be even (consecutive pairing)")
        if self.n_last < 1:
            raise ConfigError("n_last must be >= 1")


@dataclass
class TraceRecord:
    event: str  # init | PE | EXP | GD | GI
    n_evals: int
    n_queries: int
    incumbent_x: list | None = None
    incumbent_y: list | None = None
    regret: float | None = None
    d_pareto: float | None = None
    x: list | None = None
    y: list | None = None
    gd_step: dict | None = None
    wall_time: float = 0.0  # excluded from the canonical serialization

    def to_json(self) -> str:
        d = {"event": self.event, "n_evals": self.n_evals, "n_queries": self.n_queries}
        for k in ("incumbent_x", "incumbent_y", "regret", "d_pareto", "x", "y", "gd_step"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return json.dumps(d)


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        return "\n".join(r.to_json() for r in self.records) + "\n"

    @staticmethod
    def records_from_jsonl(text: str) -> list[dict]:
        return [json.loads(line) for line in text.splitlines() if line.strip()]


class ComparisonQuery:
    """A pending pairwise question: two outcome vectors shown to the user."""

    def __init__(self, query_id: str, y1: np.ndarray, y2: np.ndarray, purpose: str):
        self.query_id = query_id
        self.y1 = np.asarray(y1, dtype=float)
        self.y2 = np.asarray(y2, dtype=float)
        self.purpose = purpose  # "init" | "PE"


@dataclass
class RunState:
    problem: BenchmarkProblem
    cfg: RunConfig
    dataset: Dataset | None = None
    comparisons: list = field(default_factory=list)
    outcome_model: object = None
    pref_model: object = None
    used_evaluations: int = 0
    used_queries: int = 0
    iteration: int = 0
    trigger_utilities: list = field(default_factory=list)
    pref_refit_count: int = 0
    trace: RunTrace = field(default_factory=RunTrace)
    # metrics context (simulated mode only)
    oracle: UtilityOracle | None = None
    front: ReferenceFront | None = None
    u_star: float | None = None
    comparison_source: str = "simulated"
    _y_seen: list = field(default_factory=list)
    _gen: object = None
    _pending: object = None
    _user: object = None

    @property
    def budget(self) -> int:
        return self.cfg.budget

    @property
    def budget_left(self) -> int:
        return self.cfg.budget - self.used_evaluations


def _outcome_box(state: RunState):
    Y = np.array(state._y_seen) if state._y_seen else np.zeros((1, state.problem.n_f))
    lo, hi = Y.min(axis=0), Y.max(axis=0)
    width = np.maximum(hi - lo, 1e-12)
    return lo, lo + width


def _metrics_fields(state: RunState, incumbent_y):
    if state.oracle is None or incumbent_y is None:
        return None, None
    r = utility_regret(state.oracle, incumbent_y, state.u_star)
    d = dist_to_front(incumbent_y, state.front)
    return float(r), float(d)


def _provisional_incumbent(state: RunState):
    """Best true-utility outcome seen so far (used before models exist)."""
    if state.oracle is None or not state._y_seen:
        return None, None
    Y = np.array(state._y_seen)
    u = state.oracle.utility_batch(Y)
    i = int(np.argmax(u))
    return None, Y[i]


def _model_incumbent(state: RunState):
    x, _ = acq.incumbent(state.outcome_model, state.pref_model, state.dataset.X)
    idx = int(np.argmin(np.max(np.abs(state.dataset.X - x), axis=1)))
    return state.dataset.X[idx], state.dataset.Y[idx]


def _record(state: RunState, event: str, x=None, y=None, gd_step=None):
    if state.outcome_model is not None and state.pref_model is not None:
        inc_x, inc_y = _model_incumbent(state)
    else:
        inc_x, inc_y = _provisional_incumbent(state)
    r, d = _metrics_fields(state, inc_y)
    state.trace.records.append(
        TraceRecord(
            event=event,
            n_evals=state.used_evaluations,
            n_queries=state.used_queries,
            incumbent_x=None if inc_x is None else list(map(float, inc_x)),
            incumbent_y=None if inc_y is None else list(map(float, inc_y)),
            regret=r,
            d_pareto=d,
            x=None if x is None else list(map(float, x)),
            y=None if y is None else list(map(float, y)),
            gd_step=gd_step,
            wall_time=time.monotonic(),
        )
    )


def _evaluate(state: RunState, x, charge_budget: bool = True):
    y = state.problem.evaluator(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if charge_budget:
        state.used_evaluations += 1
    state._y_seen.append(y.copy())
    return y


def _dedupe(state: RunState, x: np.ndarray) -> np.ndarray:
    """Nudge a proposed point off an existing dataset row, deterministically."""
    lo, hi = state.problem.bounds[:, 0], state.problem.bounds[:, 1]
    center = 0.5 * (lo + hi)
    x = np.asarray(x, dtype=float).copy()
    scale = 1e-6
    while state.dataset is not None and state.dataset.is_duplicate(x) and scale <= 1e-2:
        x = x + (center - x) * scale
        scale *= 10.0
    return x


def _fit_outcome(state: RunState, warm=True):
    warm_start = None
    if warm and state.outcome_model is not None:
        warm_start = [(o.spec, o.noise) for o in state.outcome_model.objectives]
    state.outcome_model = outcome_gp.fit(state.dataset, state.cfg.outcome_priors, warm_start)


def _fit_preferences(state: RunState):
    refit_hyper = state.pref_refit_count % max(state.cfg.pref_hyper_refit_every, 1) == 0
    warm = None if state.pref_model is None else state.pref_model.spec
    state.pref_model = preference_gp.fit_preferences(
        state.comparisons,
        state.cfg.pref_priors,
        norm_bounds=_outcome_box(state),
        warm_spec=warm,
        refit_hyperparams=refit_hyper or warm is None,
    )
    state.pref_refit_count += 1


def pipeline(state: RunState):
    """Generator driving the full optimization; yields ComparisonQuery objects
    and expects .send(choice) with choice in {0, 1} for each."""
    cfg = state.cfg
    problem = state.problem
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]

    # -- initialization: preference design first (budget-exempt, logged at
    # evaluation count zero), then the charged outcome design --
    pref_unit = sobol_points(problem.n_x, cfg.n_init_pref, derive_seed(cfg.seed, _TAG_INIT_PREF))
    pref_X = scale_to_bounds(pref_unit, lo, hi)
    pref_Y = np.array([_evaluate(state, x, charge_budget=False) for x in pref_X])
    for k in range(0, cfg.n_init_pref, 2):
        y1, y2 = pref_Y[k], pref_Y[k + 1]
        choice = yield ComparisonQuery(f"q{state.used_queries}", y1, y2, "init")
        state.comparisons.append(
            ComparisonRecord(y1, y2, int(choice), source=state.comparison_source)
        )
        state.used_queries += 1
        _record(state, "init")

    d_unit = sobol_points(problem.n_x, cfg.n_init_outcome, derive_seed(cfg.seed, _TAG_INIT_D))
    d_X = scale_to_bounds(d_unit, lo, hi)
    rows_X, rows_Y = [], []
    for x in d_X:
        y = _evaluate(state, x)
        rows_X.append(x)
        rows_Y.append(y)
        _record(state, "init", x=x, y=y)
    state.dataset = Dataset(
        np.array(rows_X), np.array(rows_Y), problem.bounds,
        ["init"] * len(rows_X), [0] * len(rows_X),
    )
    _fit_outcome(state, warm=False)
    _fit_preferences(state)
    _record(state, "init")

    # -- main loop --
    while state.used_evaluations < cfg.budget:
        state.iteration += 1
        it = state.iteration

        # PE stage: pick a pair, show posterior-mean outcomes, no true evals
        x1, x2 = acq.maximize_eubo(
            state.outcome_model,
            state.pref_model,
            problem.bounds,
            cfg.acq_opt,
            replace(cfg.mc, seed=derive_seed(cfg.seed, _TAG_PE_MC, it)),
            derive_seed(cfg.seed, _TAG_PE, it),
        )
        mean1, _ = state.outcome_model.posterior_batch(x1[None, :])
        mean2, _ = state.outcome_model.posterior_batch(x2[None, :])
        y1, y2 = mean1[0], mean2[0]
        if np.array_equal(y1, y2):  # degenerate pair; perturb display copy
            y2 = y2 + 1e-12
        choice = yield ComparisonQuery(f"q{state.used_queries}", y1, y2, "PE")
        state.comparisons.append(
            ComparisonRecord(y1, y2, int(choice), source=state.comparison_source)
        )
        state.used_queries += 1
        _fit_preferences(state)
        _record(state, "PE")

        # EXP stage: one true evaluation at the utility-improvement argmax
        x_best, u_best = acq.incumbent(state.outcome_model, state.pref_model, state.dataset.X)
        x_exp = acq.maximize_qeiuu(
            state.outcome_model,
            state.pref_model,
            problem.bounds,
            u_best,
            cfg.acq_opt,
            replace(cfg.mc, seed=derive_seed(cfg.seed, _TAG_EXP_MC, it)),
            derive_seed(cfg.seed, _TAG_EXP, it),
        )
        x_exp = _dedupe(state, x_exp)
        y_exp = _evaluate(state, x_exp)
        state.dataset = state.dataset.append(x_exp, y_exp, "EXP", it)
        _fit_outcome(state)
        _record(state, "EXP", x=x_exp, y=y_exp)

        # GD trigger: cumulative max incumbent utility flat over the last
        # n_last EXP outcomes
        _, u_now = acq.incumbent(state.outcome_model, state.pref_model, state.dataset.X)
        state.trigger_utilities.append(float(u_now))
        cummax = np.maximum.accumulate(state.trigger_utilities)
        fire = (
            cfg.method != "eubo-qeiuu"
            and len(cummax) >= cfg.n_last
            and cummax[-1] - cummax[-cfg.n_last] <= TRIGGER_TOL
        )

        if fire and state.budget_left > 0:
            gd_cfg = replace(cfg.gd, variant=_METHOD_VARIANT[cfg.method])
            gi_seed_counter = {"k": 0}

            def evaluate_cb(x, tag):
                if state.budget_left <= 0:
                    return None
                x = _dedupe(state, x)
                y = _evaluate(state, x)
                state.dataset = state.dataset.append(x, y, tag, it)
                _record(state, tag, x=x, y=y)
                return y

            def gi_maximizer(model, x_gd):
                gi_seed_counter["k"] += 1
                return acq.maximize_gi(
                    model,
                    x_gd,
                    problem.bounds,
                    cfg.acq_opt,
                    derive_seed(cfg.seed, _TAG_GI, it, gi_seed_counter["k"]),
                )

            def on_step(rec):
                _record(
                    state,
                    "GD",
                    gd_step={
                        "step": rec.step,
                        "alpha": list(map(float, rec.alpha)),
                        "norm_sq": rec.norm_sq,
                        "in_bounds": bool(rec.in_bounds),
                    },
                )

            result = local_gradient_descent(
                x_exp, state.outcome_model, evaluate_cb, gi_maximizer, gd_cfg, on_step
            )
            # adopt the conditioned model (hyperparameters unchanged); a full
            # refit happens at the next EXP stage
            if result.eval_count > 0:
                state.outcome_model = result.model
    return state


class SimulatedUser:
    """Answers comparisons with the configured true-utility oracle."""

    def __init__(self, oracle: UtilityOracle):
        self.oracle = oracle

    def compare(self, y1, y2) -> int:
        return simulated_user(self.oracle, y1, y2)


def _attach_metrics(state: RunState, oracle: UtilityOracle | None):
    if oracle is None:
        return
    state.oracle = oracle
    state.front = reference_front(state.problem, state.cfg.front_resolution)
    _, state.u_star = best_utility_pareto_point(oracle, state.front)


def initialize(problem: BenchmarkProblem, user, cfg: RunConfig, seed: int | None = None,
               oracle: UtilityOracle | None = None) -> RunState:
    """Run the initialization phase with a blocking user and return the state.

    user is any object with compare(y1, y2) -> {0, 1}; pass
    SimulatedUser(oracle) for benchmarking. The returned state carries the
    fitted models, 6 charged evaluations and 6 answered comparisons, and can
    be advanced with run_iteration / run.
    """
    if seed is not None and seed != cfg.seed:
        cfg = replace(cfg, seed=seed)
    state = RunState(problem=problem, cfg=cfg)
    _attach_metrics(state, oracle)
    gen = pipeline(state)
    query = next(gen)
    while query.purpose == "init":
        try:
            query = gen.send(user.compare(query.y1, query.y2))
        except StopIteration:
            break
    state._gen = gen
    state._pending = query if query.purpose != "init" else None
    state._user = user
    return state


def run_iteration(state: RunState) -> RunState:
    """Advance exactly one PE -> EXP (-> GD) iteration with the blocking user.

    One pending preference query belongs to one iteration: answering it lets
    the generator finish the iteration's EXP (and GD, when triggered) work and
    surface the next iteration's query.
    """
    if state.used_evaluations >= state.budget or state._pending is None:
        raise InputError("budget exhausted")
    query = state._pending
    try:
        state._pending = state._gen.send(state._user.compare(query.y1, query.y2))
    except StopIteration:
        state._pending = None
    return state


def run(state: RunState, budget: int | None = None) -> RunTrace:
    """Iterate until the evaluation budget is consumed; returns the trace."""
    if budget is not None and budget != state.cfg.budget:
        state.cfg = replace(state.cfg, budget=budget)
    gen = state._gen
    query = state._pending
    while query is not None:
        try:
            query = gen.send(state._user.compare(query.y1, query.y2))
        except StopIteration:
            query = None
    state._pending = None
    state.trace.meta = run_metadata(state)
    return state.trace


def run_metadata(state: RunState) -> dict:
    return {
        "method": state.cfg.method,
        "seed": state.cfg.seed,
        "budget": state.cfg.budget,
        "problem": state.problem.name,
        "used_evaluations": state.used_evaluations,
        "used_queries": state.used_queries,
        "iterations": state.iteration,
        "init_pref_evaluations_budget_exempt": state.cfg.n_init_pref,
    }


def simulate_run(problem: BenchmarkProblem, oracle: UtilityOracle, cfg: RunConfig) -> RunTrace:
    """Convenience wrapper: initialize with a simulated user and run to budget."""
    state = initialize(problem, SimulatedUser(oracle), cfg, oracle=oracle)
    return run(state)
