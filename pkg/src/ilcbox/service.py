"""HTTP session service exposing the interactive discovery loop."""

from __future__ import annotations

import threading
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .boxes import GridParams
from .dataset import Dataset, load_page_blocks, load_wbc
from .evaluation import evaluate_ruleset
from .explain import ExplanationRequest, explain_local
from .projection import ProjectionSpec, consecutive_assignment, wbc_default_spec
from .session import Session, SessionConfig, SessionError

API_PREFIX = "/api/v1"


class CreateSessionBody(BaseModel):
    dataset: str = "wbc"
    mode: str = "ilc2_partial_dynamic"
    cell_width: float = 0.5
    cell_height: float = 0.5
    coverage_fraction: float = 0.1
    purity_threshold: float = 1.0
    mirror: str = "none"


class AcceptBody(BaseModel):
    digest: str
    corners: list
    predicted_class: Optional[str] = None


class DigestBody(BaseModel):
    digest: str


class PruneBody(BaseModel):
    digest: str
    min_cases: int
    mode: str = "refuse"
    decisions: Optional[dict] = None


class ExplainBody(BaseModel):
    point: list
    purity_threshold: float = 1.0
    initial_resolution: float = 1.0
    decrement: float = 0.25
    min_resolution: float = 0.25


class SessionStore:
    def __init__(self):
        self.sessions: dict = {}
        self.locks: dict = {}
        self._guard = threading.Lock()

    def add(self, session: Session):
        with self._guard:
            self.sessions[session.id] = session
            self.locks[session.id] = threading.Lock()

    def get(self, session_id: str) -> tuple:
        with self._guard:
            if session_id not in self.sessions:
                raise HTTPException(404, f"no session {session_id}")
            return self.sessions[session_id], self.locks[session_id]


def _load_dataset(name: str) -> Dataset:
    if name == "wbc":
        return load_wbc()
    if name in ("pbc", "page_blocks"):
        return load_page_blocks()
    raise HTTPException(400, f"unknown dataset {name!r}; use 'wbc' or 'page_blocks'")


def create_app(store: Optional[SessionStore] = None, log_dir=None) -> FastAPI:
    """log_dir, when set, gets one append-only action log file per session."""
    app = FastAPI(title="ilcbox session service")
    store = store or SessionStore()
    app.state.store = store
    if log_dir is not None:
        from pathlib import Path
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

    def check_digest(session: Session, digest: str):
        if digest != session.digest():
            raise HTTPException(409, "stale session digest; refresh and retry")

    @app.post(API_PREFIX + "/sessions")
    def create_session(body: CreateSessionBody):
        dataset = _load_dataset(body.dataset)
        spec = (wbc_default_spec(body.mode) if body.dataset == "wbc"
                else ProjectionSpec(mode=body.mode,
                                    assignment=consecutive_assignment(dataset.dimension)))
        config = SessionConfig(
            dataset_name=body.dataset,
            spec=spec,
            grid=GridParams(cell_width=body.cell_width, cell_height=body.cell_height,
                            coverage_fraction=body.coverage_fraction,
                            purity_threshold=body.purity_threshold),
            mirror=body.mirror,
        )
        session = Session(dataset, config)
        if log_dir is not None:
            session.log_path = log_dir / f"{session.id}.jsonl"
        store.add(session)
        return session.summary()

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session(session_id: str):
        session, _ = store.get(session_id)
        return session.summary()

    @app.get(API_PREFIX + "/sessions/{session_id}/projection")
    def get_projection(session_id: str, decimate: int = 0, full: bool = False):
        session, _ = store.get(session_id)
        polylines = session.polylines
        step = 1
        if decimate and not full and len(polylines) > decimate:
            step = max(1, len(polylines) // decimate)
        rows = []
        for i in range(0, len(polylines), step):
            p = polylines[i]
            rows.append({"index": i, "label": p.label, "render_side": p.render_side,
                         "nodes": [list(n) for n in p.nodes],
                         "remaining": i in set(session.remaining)})
        remaining_set = set(session.remaining)
        for row in rows:
            row["remaining"] = row["index"] in remaining_set
        return {"digest": session.digest(), "count": len(polylines),
                "decimated": step > 1, "polylines": rows}

    @app.get(API_PREFIX + "/sessions/{session_id}/candidates")
    def get_candidates(session_id: str, top_k: int = 10):
        session, lock = store.get(session_id)
        with lock:
            return {"digest": session.digest(), "candidates": session.candidates(top_k)}

    @app.post(API_PREFIX + "/sessions/{session_id}/accept")
    def accept(session_id: str, body: AcceptBody):
        session, lock = store.get(session_id)
        with lock:
            check_digest(session, body.digest)
            try:
                session.accept(tuple(body.corners), body.predicted_class)
            except (SessionError, ValueError) as exc:
                raise HTTPException(400, str(exc))
            return session.summary()

    @app.post(API_PREFIX + "/sessions/{session_id}/undo")
    def undo(session_id: str, body: DigestBody):
        session, lock = store.get(session_id)
        with lock:
            check_digest(session, body.digest)
            session.undo()
            return session.summary()

    @app.post(API_PREFIX + "/sessions/{session_id}/prune")
    def prune_rules(session_id: str, body: PruneBody):
        session, lock = store.get(session_id)
        with lock:
            check_digest(session, body.digest)
            try:
                session.prune(body.min_cases, body.mode, body.decisions)
            except (SessionError, ValueError) as exc:
                raise HTTPException(400, str(exc))
            return session.summary()

    @app.post(API_PREFIX + "/sessions/{session_id}/join")
    def join(session_id: str, body: DigestBody):
        session, lock = store.get(session_id)
        with lock:
            check_digest(session, body.digest)
            try:
                session.join()
            except (SessionError, ValueError) as exc:
                raise HTTPException(400, str(exc))
            return session.summary()

    @app.get(API_PREFIX + "/sessions/{session_id}/rules")
    def rules(session_id: str):
        session, _ = store.get(session_id)
        if session.ruleset is None:
            return {"digest": session.digest(), "rules_file": None, "rules_text": ""}
        return {"digest": session.digest(),
                "rules_file": session.export_rules().decode(),
                "rules_text": session.ruleset.render_text()}

    @app.get(API_PREFIX + "/sessions/{session_id}/log")
    def log(session_id: str):
        session, _ = store.get(session_id)
        return {"digest": session.digest(), "actions": session.actions}

    @app.post(API_PREFIX + "/sessions/{session_id}/evaluate")
    def evaluate(session_id: str):
        session, lock = store.get(session_id)
        with lock:
            if session.ruleset is None:
                raise HTTPException(400, "no rules to evaluate")
            report = evaluate_ruleset(session.ruleset, session.dataset, "train")
            return {
                "digest": session.digest(),
                "weighted_precision": report.weighted_precision,
                "refused": report.refused,
                "total": report.total,
                "rules": [
                    {"rule_id": o.rule_id, "class": o.predicted_class,
                     "classified": o.classified_cases, "correct": o.correct,
                     "precision": o.precision, "recall": o.recall}
                    for o in report.outcomes
                ],
            }

    @app.post(API_PREFIX + "/sessions/{session_id}/explain")
    def explain(session_id: str, body: ExplainBody):
        session, lock = store.get(session_id)
        with lock:
            if session.ruleset is None:
                raise HTTPException(400, "no rules to explain against")
            request = ExplanationRequest(
                point=tuple(body.point), predictor=session.ruleset,
                purity_threshold=body.purity_threshold,
                initial_resolution=body.initial_resolution,
                decrement=body.decrement, min_resolution=body.min_resolution)
            try:
                result = explain_local(request, session.dataset, session.config.spec)
            except ValueError as exc:
                raise HTTPException(400, str(exc))
            return {"digest": session.digest(),
                    "explanation": result.payload(session.config.spec, tuple(body.point))}

    return app
