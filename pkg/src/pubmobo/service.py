"""HTTP service for interactive optimization sessions.

A human answers pairwise outcome queries; between answers the service
advances the optimization pipeline synchronously (desk-scale stage costs).
Sessions persist as append-only JSONL event logs; replaying a log through the
deterministic pipeline reconstructs the exact session state, which is also
the crash-recovery path.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import acquisitions as acq
from .benchmarks import get_problem, problem_from_descriptor
from .errors import ConfigError, PubmoboError
from .harness import _run_config_from_overrides
from .orchestrator import RunState, pipeline

AWAITING = "awaiting_comparison"
COMPUTING = "computing"
COMPLETED = "completed"


def _dominates(a, b) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def heuristic_init_choice(y1, y2) -> int:
    """Auto-answer for init comparisons: dominance first, then smaller sum."""
    if _dominates(y1, y2):
        return 0
    if _dominates(y2, y1):
        return 1
    return 0 if float(np.sum(y1)) <= float(np.sum(y2)) else 1


@dataclass
class Snapshot:
    lifecycle: str
    n_evals: int
    n_queries: int
    budget: int
    revision: int
    stage: str
    pending: dict | None


class Session:
    """One optimization run driven by comparison submissions."""

    def __init__(self, session_id: str, spec: dict, log_path: Path):
        self.id = session_id
        self.spec = spec
        self.log_path = log_path
        self.lock = threading.Lock()
        self.answered: dict[str, dict] = {}
        self._revision = 0

        desc = spec["problem"]
        problem = get_problem(desc) if isinstance(desc, str) else problem_from_descriptor(desc)
        cfg = _run_config_from_overrides(
            spec.get("method", "pub-mobo"),
            int(spec.get("budget", 100)),
            int(spec.get("seed", 1)),
            int(spec.get("front_resolution", 2001)),
            spec.get("config", {}),
        )
        self.auto_init = bool(spec.get("auto_init_comparisons", False))
        self.state = RunState(problem=problem, cfg=cfg, comparison_source="human")
        self.gen = pipeline(self.state)
        self.query = None
        self.snapshot: Snapshot = Snapshot(COMPUTING, 0, 0, cfg.budget, 0, "init", None)

    # -- engine driving (callers hold self.lock) --

    def _advance(self, send_value=None, record=True) -> None:
        try:
            query = self.gen.send(send_value) if send_value is not None else next(self.gen)
        except StopIteration:
            self.query = None
            self._publish(COMPLETED)
            return
        while query.purpose == "init" and self.auto_init:
            choice = heuristic_init_choice(query.y1, query.y2)
            if record:
                self._log({"type": "comparison", "query_id": query.query_id,
                           "choice": choice, "auto": True})
            self.answered[query.query_id] = {"recorded": True, "choice": choice}
            try:
                query = self.gen.send(choice)
            except StopIteration:
                self.query = None
                self._publish(COMPLETED)
                return
        self.query = query
        self._publish(AWAITING)

    def start(self) -> None:
        with self.lock:
            self._log({"type": "created", "spec": self.spec, "ts": time.time()})
            self._advance()

    def submit(self, query_id: str, choice: int) -> dict:
        with self.lock:
            if query_id in self.answered:
                return {**self.answered[query_id], "status": self.status_payload()}
            if self.query is None or self.snapshot.lifecycle != AWAITING:
                raise HTTPException(409, detail={"code": "conflict",
                                                 "message": "no pending comparison"})
            if query_id != self.query.query_id:
                raise HTTPException(409, detail={"code": "stale_query",
                                                 "message": "query already superseded"})
            if choice not in (0, 1):
                raise HTTPException(422, detail={"code": "invalid_choice",
                                                 "message": "choice must be 0 or 1",
                                                 "field": "choice"})
            self._log({"type": "comparison", "query_id": query_id, "choice": choice,
                       "ts": time.time()})
            self.answered[query_id] = {"recorded": True, "choice": choice}
            self._publish(COMPUTING)
            self._advance(send_value=choice)
            return {"recorded": True, "choice": choice, "status": self.status_payload()}

    def replay(self, events: list[dict]) -> None:
        """Rebuild state by replaying logged comparisons (no re-logging)."""
        with self.lock:
            self._advance(record=False)
            for ev in events:
                if ev["type"] != "comparison" or ev.get("auto"):
                    continue
                if self.query is None:
                    break
                qid, choice = ev["query_id"], int(ev["choice"])
                self.answered[qid] = {"recorded": True, "choice": choice}
                self._advance(send_value=choice)

    # -- reads --

    def _publish(self, lifecycle: str) -> None:
        state = self.state
        stage = "init"
        if state.trace.records:
            stage = state.trace.records[-1].event
        pending = None
        if lifecycle == AWAITING and self.query is not None:
            pending = {
                "query_id": self.query.query_id,
                "y1": self.query.y1.tolist(),
                "y2": self.query.y2.tolist(),
                "purpose": self.query.purpose,
                "objective_labels": [f"f{i+1}" for i in range(state.problem.n_f)],
            }
        self._revision += 1
        self.snapshot = Snapshot(
            lifecycle, state.used_evaluations, state.used_queries,
            state.cfg.budget, self._revision, stage, pending,
        )

    def status_payload(self) -> dict:
        snap = self.snapshot
        state = self.state
        incumbent = None
        if state.outcome_model is not None and state.pref_model is not None:
            x, u = acq.incumbent(state.outcome_model, state.pref_model, state.dataset.X)
            idx = int(np.argmin(np.max(np.abs(state.dataset.X - x), axis=1)))
            incumbent = {
                "x": state.dataset.X[idx].tolist(),
                "y": state.dataset.Y[idx].tolist(),
                "utility": float(u),
            }
        recent_gd = sum(
            1 for r in state.trace.records[-40:] if r.event in ("GD", "GI") and r.x is not None
        )
        return {
            "session_id": self.id,
            "lifecycle": snap.lifecycle,
            "stage": snap.stage,
            "evaluations_used": snap.n_evals,
            "budget": snap.budget,
            "queries_answered": snap.n_queries,
            "incumbent": incumbent,
            "recent_gd_evaluations": recent_gd,
            "revision": snap.revision,
            "objective_labels": [f"f{i+1}" for i in range(state.problem.n_f)],
        }

    def candidates(self, k: int) -> list[dict]:
        with self.lock:
            state = self.state
            if state.outcome_model is None or state.pref_model is None:
                return []
            mean, _ = state.outcome_model.posterior_batch(state.dataset.X)
            u, _ = state.pref_model.utility_mean_var(mean)
            order = sorted(range(len(u)), key=lambda i: (-u[i], -i))  # recency breaks ties
            out = []
            for i in order[: max(k, 1)]:
                out.append(
                    {
                        "x": state.dataset.X[i].tolist(),
                        "y": state.dataset.Y[i].tolist(),
                        "utility": float(u[i]),
                        "provenance": state.dataset.provenance[i],
                    }
                )
            return out

    def _log(self, event: dict) -> None:
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(event) + "\n")


class SessionStore:
    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.events.jsonl"

    def create(self, spec: dict) -> Session:
        session_id = uuid.uuid4().hex[:12]
        session = Session(session_id, spec, self._log_path(session_id))
        session.start()
        with self._lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
        session = self._recover(session_id)
        if session is None:
            raise HTTPException(404, detail={"code": "not_found",
                                             "message": f"unknown session {session_id}"})
        with self._lock:
            self.sessions[session_id] = session
        return session

    def _recover(self, session_id: str) -> Session | None:
        path = self._log_path(session_id)
        if not path.exists():
            return None
        events = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        if not events or events[0]["type"] != "created":
            return None
        session = Session(session_id, events[0]["spec"], path)
        session.replay(events[1:])
        return session


class CreateSessionBody(BaseModel):
    problem: Any
    seed: int = 1
    budget: int = 100
    method: str = "pub-mobo"
    auto_init_comparisons: bool = False
    front_resolution: int = 2001
    config: dict = {}


class ComparisonBody(BaseModel):
    query_id: str
    choice: int


def create_app(data_dir: Path, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="pubmobo sessions")
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(PubmoboError)
    async def pubmobo_error(_req: Request, exc: PubmoboError):
        status = 400 if isinstance(exc, ConfigError) else 422
        return JSONResponse(status_code=status,
                            content={"code": type(exc).__name__, "message": str(exc)})

    @app.exception_handler(HTTPException)
    async def http_error(_req: Request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else {"code": "error",
                                                                  "message": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        spec = body.model_dump()
        session = store.create(spec)
        return {"session_id": session.id, "status": session.status_payload()}

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        session = store.get(session_id)
        snap = session.snapshot
        if snap.lifecycle != AWAITING or snap.pending is None:
            raise HTTPException(409, detail={"code": "conflict",
                                             "message": f"lifecycle is {snap.lifecycle}"})
        return snap.pending

    @app.post("/sessions/{session_id}/comparison")
    def submit_comparison(session_id: str, body: ComparisonBody):
        session = store.get(session_id)
        return session.submit(body.query_id, body.choice)

    @app.get("/sessions/{session_id}/status")
    def get_status(session_id: str, wait: float = 0.0, revision: int | None = None):
        session = store.get(session_id)
        deadline = time.monotonic() + min(max(wait, 0.0), 30.0)
        while (
            revision is not None
            and session.snapshot.revision == revision
            and time.monotonic() < deadline
        ):
            time.sleep(0.05)
        return session.status_payload()

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str, k: int = 5):
        if k < 1:
            raise HTTPException(422, detail={"code": "invalid_k",
                                             "message": "k must be >= 1", "field": "k"})
        session = store.get(session_id)
        return {"candidates": session.candidates(k)}

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

        @app.get("/")
        def root():
            return RedirectResponse("/ui/")

    return app
