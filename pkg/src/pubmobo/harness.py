"""Multi-seed experiment driver: runs (benchmark x method x seed) cells,
aggregates best-so-far curves, compares methods statistically, and exports
plot-ready CSV data.

Trace files are deterministic for a fixed config (wall-clock timing lives in
sidecar meta files excluded from idempotence and determinism checks).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__ as pkg_version
from .acquisitions import AcqOptimizerConfig, McConfig
from .benchmarks import get_problem, problem_from_descriptor, reference_front
from .errors import ConfigError, InputError
from .local_gd import GdConfig
from .metrics import best_utility_pareto_point, mann_whitney_one_sided
from .orchestrator import METHODS, RunConfig, RunTrace, simulate_run
from .outcome_gp import GammaPrior, HyperPriors
from .pduf import PdufSpec, UtilityOracle, make_centers
from .preference_gp import PreferencePriors

AXES = ("evaluations", "queries")
MMETRICS = ("regret", "d_pareto")
_AXIS_FIELD = {"evaluations": "n_evals", "queries": "n_queries"}

ENV_OUTPUT_ROOT = "PUBMOBO_OUTPUT_ROOT"


@dataclass(frozen=True)
class ExperimentConfig:
    benchmarks: tuple  # tuple of descriptor dicts ({"name": ...} or plugin)
    methods: tuple
    seeds: tuple = tuple(range(1, 21))
    budget: int = 100
    output_dir: str = "results"
    workers: int = 2
    front_resolution: int = 2001
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.benchmarks or not self.methods:
            raise ConfigError("benchmarks and methods must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(
            benchmarks=tuple(
                {"name": b} if isinstance(b, str) else dict(b) for b in raw["benchmarks"]
            ),
            methods=tuple(raw["methods"]),
            seeds=tuple(raw.get("seeds", range(1, 21))),
            budget=int(raw.get("budget", 100)),
            output_dir=raw.get("output_dir", "results"),
            workers=int(raw.get("workers", 2)),
            front_resolution=int(raw.get("front_resolution", 2001)),
            overrides=raw.get("overrides", {}),
        )

    def canonical(self) -> dict:
        return {
            "benchmarks": [dict(sorted(b.items())) for b in self.benchmarks],
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "budget": self.budget,
            "front_resolution": self.front_resolution,
            "overrides": self.overrides,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def resolved_output_dir(self) -> Path:
        root = os.environ.get(ENV_OUTPUT_ROOT)
        out = Path(self.output_dir)
        if root and not out.is_absolute():
            return Path(root) / out
        return out


def _build_problem(desc: dict):
    if set(desc) <= {"name", "pduf"}:
        return get_problem(desc["name"])
    return problem_from_descriptor(desc)


def build_oracle(problem, front_resolution: int, pduf_cfg: dict | None) -> UtilityOracle:
    """Reference-front-normalized logistic-product oracle for a benchmark."""
    pduf_cfg = dict(pduf_cfg or {})
    front = reference_front(problem, front_resolution).points
    lo, hi = front.min(axis=0), front.max(axis=0)
    width = np.maximum(hi - lo, 1e-12)
    hi = lo + width
    if "centers" in pduf_cfg:
        centers = np.asarray(pduf_cfg["centers"], dtype=float)
    else:
        t = float(pduf_cfg.get("anchor_t", 0.5))
        idx = int(round(t * (front.shape[0] - 1)))
        anchor = (front[idx] - lo) / width
        direction = np.asarray(pduf_cfg.get("direction", np.ones(problem.n_f)), dtype=float)
        centers = make_centers(
            anchor, direction, int(pduf_cfg.get("n_c", 10)), float(pduf_cfg.get("spacing", 0.1))
        )
    spec = PdufSpec(centers, beta=float(pduf_cfg.get("beta", 10.0)))
    return UtilityOracle("pduf", pduf=spec, norm_lo=lo, norm_hi=hi)


def _run_config_from_overrides(method: str, budget: int, seed: int, front_resolution: int,
                               overrides: dict) -> RunConfig:
    ov = overrides or {}

    def sub(name, cls, **extra):
        d = dict(ov.get(name, {}))
        d.update(extra)
        return cls(**d) if d else cls()

    priors = dict(ov.get("outcome_priors", {}))
    for key in ("lengthscale", "outputscale"):
        if key in priors:
            priors[key] = GammaPrior(*priors[key])
    return RunConfig(
        method=method,
        budget=budget,
        seed=seed,
        front_resolution=front_resolution,
        mc=sub("mc", McConfig),
        acq_opt=sub("acq_opt", AcqOptimizerConfig),
        gd=sub("gd", GdConfig),
        outcome_priors=HyperPriors(**priors) if priors else HyperPriors(),
        pref_priors=sub("pref_priors", PreferencePriors),
        n_last=int(ov.get("n_last", 2)),
        pref_hyper_refit_every=int(ov.get("pref_hyper_refit_every", 5)),
    )


def cell_paths(out_dir: Path, bench: str, method: str, seed: int):
    d = out_dir / bench / method
    return d / f"seed_{seed:03d}.jsonl", d / f"seed_{seed:03d}.meta.json"


def _run_cell(args) -> dict:
    desc, method, seed, budget, front_resolution, overrides, out_dir = args
    bench_name = desc["name"]
    trace_path, meta_path = cell_paths(Path(out_dir), bench_name, method, seed)
    try:
        problem = _build_problem(desc)
        oracle = build_oracle(problem, front_resolution, desc.get("pduf"))
        cfg = _run_config_from_overrides(method, budget, seed, front_resolution, overrides)
        t0 = time.perf_counter()
        trace = simulate_run(problem, oracle, cfg)
        wall = time.perf_counter() - t0
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = trace_path.with_suffix(".tmp")
        tmp.write_text(trace.to_jsonl())
        os.replace(tmp, trace_path)
        meta = dict(trace.meta)
        meta["wall_time_sec"] = round(wall, 3)
        meta_path.write_text(json.dumps(meta, sort_keys=True) + "\n")
        return {"bench": bench_name, "method": method, "seed": seed, "status": "ok"}
    except Exception as exc:  # cell failures must not abort the sweep
        return {
            "bench": bench_name, "method": method, "seed": seed,
            "status": "failed", "error": f"{type(exc).__name__}: {exc}",
        }


def run_experiment(cfg: ExperimentConfig, force: bool = False) -> Path:
    """Run all cells (idempotently unless force) and return the results dir."""
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    chash = cfg.config_hash()

    manifest = {"config_hash": None, "cells": {}}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    if manifest.get("config_hash") != chash:
        manifest = {"config_hash": chash, "cells": {}}
        force_all = True
    else:
        force_all = False

    jobs = []
    for desc in cfg.benchmarks:
        for method in cfg.methods:
            for seed in cfg.seeds:
                cell_id = f"{desc['name']}/{method}/seed{seed}"
                trace_path, _ = cell_paths(out, desc["name"], method, seed)
                done = (
                    manifest["cells"].get(cell_id, {}).get("status") == "ok"
                    and trace_path.exists()
                )
                if done and not force and not force_all:
                    continue
                jobs.append(
                    (dict(desc), method, seed, cfg.budget, cfg.front_resolution,
                     cfg.overrides, str(out))
                )

    if jobs:
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_run_cell, jobs))
        else:
            results = [_run_cell(j) for j in jobs]
        for r in results:
            cell_id = f"{r['bench']}/{r['method']}/seed{r['seed']}"
            manifest["cells"][cell_id] = {k: v for k, v in r.items() if k not in ("bench", "method", "seed")}

    manifest["config_hash"] = chash
    manifest["versions"] = {"pubmobo": pkg_version, "numpy": np.__version__}
    manifest["config"] = cfg.canonical()
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return out


# ---- aggregation ------------------------------------------------------------------


@dataclass
class AggregateCurve:
    """Per-step percentile summary of best-so-far metrics across seeds."""

    benchmark: str
    method: str
    axis: str
    steps: np.ndarray
    median: dict  # metric -> array
    p25: dict
    p75: dict


def _load_traces(results_dir: Path, bench: str, method: str) -> dict[int, list[dict]]:
    d = Path(results_dir) / bench / method
    traces = {}
    if not d.exists():
        return traces
    for p in sorted(d.glob("seed_*.jsonl")):
        seed = int(p.stem.split("_")[1])
        traces[seed] = RunTrace.records_from_jsonl(p.read_text())
    return traces


def _best_so_far_on_grid(records: list[dict], axis: str, grid: np.ndarray, metric: str):
    field_name = _AXIS_FIELD[axis]
    xs = np.array([r[field_name] for r in records if r.get(metric) is not None])
    vs = np.array([r[metric] for r in records if r.get(metric) is not None])
    out = np.empty(grid.size)
    best = np.inf
    j = 0
    order = np.argsort(xs, kind="stable")
    xs, vs = xs[order], vs[order]
    for i, g in enumerate(grid):
        while j < xs.size and xs[j] <= g:
            best = min(best, vs[j])
            j += 1
        out[i] = best
    return out


def _axis_range(traces_by_method: dict, axis: str):
    field_name = _AXIS_FIELD[axis]
    starts, ends = [], []
    for traces in traces_by_method.values():
        for records in traces.values():
            xs = [r[field_name] for r in records if r.get("regret") is not None]
            starts.append(min(xs))
            ends.append(max(xs))
    return max(starts), min(ends)


def aggregate(results_dir, axis: str = "evaluations", benchmarks=None, methods=None):
    """Best-so-far percentile curves per (benchmark, method) on a common grid."""
    if axis not in AXES:
        raise InputError(f"axis must be one of {AXES}")
    results_dir = Path(results_dir)
    benches = benchmarks or sorted(
        p.name for p in results_dir.iterdir() if p.is_dir()
    )
    curves = []
    for bench in benches:
        mlist = methods or sorted(p.name for p in (results_dir / bench).iterdir() if p.is_dir())
        traces_by_method = {m: _load_traces(results_dir, bench, m) for m in mlist}
        traces_by_method = {m: t for m, t in traces_by_method.items() if t}
        if not traces_by_method:
            continue
        start, end = _axis_range(traces_by_method, axis)
        grid = np.arange(start, end + 1)
        for m, traces in traces_by_method.items():
            med, lo, hi = {}, {}, {}
            for metric in MMETRICS:
                mat = np.vstack(
                    [_best_so_far_on_grid(rec, axis, grid, metric) for rec in traces.values()]
                )
                med[metric] = np.percentile(mat, 50, axis=0)
                lo[metric] = np.percentile(mat, 25, axis=0)
                hi[metric] = np.percentile(mat, 75, axis=0)
            curves.append(AggregateCurve(bench, m, axis, grid, med, lo, hi))
    return curves


def terminal_values(results_dir, bench: str, method_pair, metric: str, axis: str):
    """Per-seed terminal best-so-far values at the pair's common axis endpoint."""
    traces_by_method = {m: _load_traces(results_dir, bench, m) for m in method_pair}
    for m, t in traces_by_method.items():
        if not t:
            raise InputError(f"no traces for {bench}/{m}")
    seed_sets = [set(t.keys()) for t in traces_by_method.values()]
    if seed_sets[0] != seed_sets[1]:
        raise InputError(f"mismatched seed sets for {bench}: {method_pair}")
    _, end = _axis_range(traces_by_method, axis)
    grid = np.array([end])
    out = {}
    for m, traces in traces_by_method.items():
        out[m] = np.array(
            [_best_so_far_on_grid(traces[s], axis, grid, metric)[0] for s in sorted(traces)]
        )
    return out


def compare_methods(results_dir, method_a: str, method_b: str, benchmarks=None):
    """One-sided Mann-Whitney p-values that method_a ends lower than method_b.

    Returns {benchmark: {(metric, axis): p}} over per-seed terminal
    best-so-far values; mirrors the benchmark-by-metric/axis table layout.
    """
    results_dir = Path(results_dir)
    benches = benchmarks or sorted(p.name for p in results_dir.iterdir() if p.is_dir())
    table = {}
    for bench in benches:
        row = {}
        for metric in MMETRICS:
            for axis in AXES:
                vals = terminal_values(results_dir, bench, (method_a, method_b), metric, axis)
                row[f"{metric}/{axis}"] = float(
                    mann_whitney_one_sided(vals[method_a], vals[method_b])
                )
        table[bench] = row
    return table


def export_plotdata(curves, out_dir) -> list[Path]:
    """One CSV per (benchmark, metric, axis): step,method,median,p25,p75."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_key = {}
    for c in curves:
        for metric in MMETRICS:
            by_key.setdefault((c.benchmark, metric, c.axis), []).append(c)
    written = []
    for (bench, metric, axis), cs in sorted(by_key.items()):
        path = out_dir / f"{bench}_{metric}_{axis}.csv"
        lines = ["step,method,median,p25,p75"]
        for c in cs:
            for i, s in enumerate(c.steps):
                lines.append(
                    f"{int(s)},{c.method},{c.median[metric][i]:.10g},"
                    f"{c.p25[metric][i]:.10g},{c.p75[metric][i]:.10g}"
                )
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written
