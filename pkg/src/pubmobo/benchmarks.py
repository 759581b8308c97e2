"""Synthetic two-objective benchmark problems with analytic reference fronts,
plus a pluggable interface for external problems."""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ReferenceFront:
    """Discretized image of the Pareto set in outcome space, (m, n_f)."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))

    @property
    def resolution(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    n_x: int
    n_f: int
    bounds: np.ndarray  # (n_x, 2)
    evaluator: Callable[[np.ndarray], np.ndarray]
    front_generator: Callable[[int], np.ndarray] | None = None

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.shape != (self.n_x, 2) or not np.all(np.isfinite(b)):
            raise InputError("bounds must be finite with shape (n_x, 2)")
        object.__setattr__(self, "bounds", b)


def evaluate_benchmark(problem: BenchmarkProblem, x) -> np.ndarray:
    """Noiseless evaluation; out-of-bounds points are rejected."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (problem.n_x,):
        raise InputError(f"x must have {problem.n_x} coordinates")
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
        raise InputError("x outside problem bounds")
    y = np.asarray(problem.evaluator(x), dtype=float).ravel()
    if y.shape != (problem.n_f,):
        raise InputError("evaluator returned wrong dimension")
    return y


def reference_front(problem: BenchmarkProblem, resolution: int) -> ReferenceFront:
    if resolution < 2:
        raise InputError("resolution must be >= 2")
    if problem.front_generator is None:
        raise InputError(f"no reference front available for {problem.name!r}")
    return ReferenceFront(problem.front_generator(int(resolution)))


# ---- built-in problems ---------------------------------------------------------


def _dtlz2_eval(x: np.ndarray) -> np.ndarray:
    g = np.sum((x[1:] - 0.5) ** 2)
    a = 0.5 * np.pi * x[0]
    return np.array([(1 + g) * np.cos(a), (1 + g) * np.sin(a)])


def _dtlz2_front(resolution: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, resolution)
    a = 0.5 * np.pi * t
    return np.column_stack([np.cos(a), np.sin(a)])


def _dtlz1_eval(x: np.ndarray) -> np.ndarray:
    tail = x[1:] - 0.5
    g = 100.0 * (tail.size + np.sum(tail**2 - np.cos(20.0 * np.pi * tail)))
    return np.array([0.5 * x[0] * (1 + g), 0.5 * (1 - x[0]) * (1 + g)])


def _dtlz1_front(resolution: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, resolution)
    return np.column_stack([0.5 * t, 0.5 * (1 - t)])


def _dh1_eval(x: np.ndarray) -> np.ndarray:
    g = np.sum(10.0 + x[1:] ** 2 - 10.0 * np.cos(4.0 * np.pi * x[1:]))
    h = 1.0 - x[0] ** 2
    s = 1.0 / (0.2 + x[0]) + x[0] ** 2
    return np.array([x[0], h + g * s])


def _dh1_front(resolution: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, resolution)
    return np.column_stack([t, 1.0 - t**2])


def dtlz2(n_x: int = 8) -> BenchmarkProblem:
    return BenchmarkProblem(
        "dtlz2", n_x, 2, np.repeat([[0.0, 1.0]], n_x, axis=0), _dtlz2_eval, _dtlz2_front
    )


def dtlz1(n_x: int = 9) -> BenchmarkProblem:
    return BenchmarkProblem(
        "dtlz1", n_x, 2, np.repeat([[0.0, 1.0]], n_x, axis=0), _dtlz1_eval, _dtlz1_front
    )


def dh1(n_x: int = 10) -> BenchmarkProblem:
    bounds = np.vstack([[0.0, 1.0], np.repeat([[-1.0, 1.0]], n_x - 1, axis=0)])
    return BenchmarkProblem("dh1", n_x, 2, bounds, _dh1_eval, _dh1_front)


_BUILTINS: dict[str, Callable[[], BenchmarkProblem]] = {
    "dtlz2": dtlz2,
    "dtlz1": dtlz1,
    "dh1": dh1,
}


def get_problem(name: str) -> BenchmarkProblem:
    if name not in _BUILTINS:
        raise InputError(f"unknown problem {name!r}; available: {sorted(_BUILTINS)}")
    return _BUILTINS[name]()


# ---- plugin problems -----------------------------------------------------------


def _external_evaluator(command: list[str]) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(x: np.ndarray) -> np.ndarray:
        proc = subprocess.run(
            command,
            input=json.dumps(list(map(float, x))) + "\n",
            capture_output=True,
            text=True,
            check=True,
        )
        return np.asarray(json.loads(proc.stdout.strip().splitlines()[-1]), dtype=float)

    return evaluate


def problem_from_descriptor(desc: dict) -> BenchmarkProblem:
    """Build a problem from a config entry.

    Either {"builtin": name} or {"name", "n_x", "n_f", "bounds", "command",
    optional "front_csv"} where command reads x as a JSON line on stdin and
    writes y as a JSON line on stdout.
    """
    if "builtin" in desc:
        return get_problem(desc["builtin"])
    for key in ("name", "n_x", "n_f", "bounds", "command"):
        if key not in desc:
            raise InputError(f"problem descriptor missing {key!r}")
    front_gen = None
    if desc.get("front_csv"):
        pts = np.loadtxt(desc["front_csv"], delimiter=",", ndmin=2)

        def front_gen(resolution: int, _pts=pts) -> np.ndarray:
            return _pts

    return BenchmarkProblem(
        desc["name"],
        int(desc["n_x"]),
        int(desc["n_f"]),
        np.asarray(desc["bounds"], dtype=float),
        _external_evaluator(list(desc["command"])),
        front_gen,
    )


def non_dominated_mask(Y: np.ndarray, slack: float = 0.0) -> np.ndarray:
    """Mask of rows not dominated by any other row (minimization)."""
    Y = np.atleast_2d(Y)
    n = Y.shape[0]
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        dominated = np.any(
            np.all(Y <= Y[i] + slack, axis=1) & np.any(Y < Y[i] - slack, axis=1)
        )
        mask[i] = not dominated
    return mask
