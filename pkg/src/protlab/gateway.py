"""HTTP facade over sessions: create, stream events (SSE with replay and
live tail), answer clarifications, browse tools and reports. State above the
persisted run records is disposable; a restarted gateway reloads them."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .builtins import FixtureStore, build_builtin_registry
from .errors import ProtlabError
from .events import EventEnvelope, RunRecorder
from .evalharness import aggregate_corpus, score_tournament
from .orchestrator import Phase, Session, SessionConfig, WrongPhase

TERMINAL_PHASES = {Phase.DONE.value, Phase.FAILED.value}
_PAUSED_PHASES = {Phase.AWAITING_CLARIFICATION.value}


@dataclass
class SessionEntry:
    session_id: str
    objective: str
    created_at: str
    session: Optional[Session] = None
    recorder: Optional[RunRecorder] = None
    thread: Optional[threading.Thread] = None

    def phase(self) -> str:
        recorder = self.live_recorder()
        phase = Phase.OBJECTIVE.value
        for event in recorder.snapshot():
            if event.kind == "phase_change":
                phase = event.payload["to"]
        return phase

    def live_recorder(self) -> RunRecorder:
        if self.session is not None:
            return self.session.recorder
        return self.recorder

    def handle(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "phase": self.phase(),
            "objective": self.objective,
        }


class SessionManager:
    """Owns the session table, schedules runs on worker threads, and reloads
    completed records from disk on boot."""

    def __init__(self, data_dir: Path, fixtures_dir: Optional[Path] = None, seed: int = 0):
        self.data_dir = Path(data_dir)
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.seed = seed
        self._entries: dict[str, SessionEntry] = {}
        self._idempotency: dict[str, str] = {}
        self._lock = threading.Lock()
        self._reload()

    def _reload(self) -> None:
        runs = self.data_dir / "runs"
        if not runs.is_dir():
            return
        for path in sorted(runs.glob("*.ndjson")):
            recorder = RunRecorder.load(path)
            objective = ""
            for event in recorder.events:
                if event.kind == "phase_change" and "objective" in event.payload:
                    objective = event.payload["objective"]
                    break
            created = recorder.events[0].at if recorder.events else ""
            self._entries[path.stem] = SessionEntry(
                session_id=path.stem,
                objective=objective,
                created_at=created,
                recorder=recorder,
            )

    def _build_config(self, overrides: dict) -> SessionConfig:
        backend = None
        fixtures = None
        if self.fixtures_dir is not None:
            from .agents import ScriptedBackend

            backend = ScriptedBackend.from_dir(self.fixtures_dir).fresh()
            fixtures = FixtureStore.from_dir(self.fixtures_dir)
        uploads = dict(overrides.get("uploads", {}))
        if self.fixtures_dir is not None and (self.fixtures_dir / "session.json").exists():
            meta = json.loads((self.fixtures_dir / "session.json").read_text())
            for name, content in meta.get("uploads", {}).items():
                uploads.setdefault(name, content)
        return SessionConfig(
            data_dir=self.data_dir,
            backend=backend,
            fixtures=fixtures,
            seed=int(overrides.get("seed", self.seed)),
            uploads=uploads,
            context_note=str(overrides.get("context_note", "")),
            strict_citations=bool(overrides.get("strict_citations", False)),
            session_id=overrides.get("session_id"),
        )

    def create(self, objective: str, overrides: dict, idempotency_key: Optional[str]) -> SessionEntry:
        with self._lock:
            if idempotency_key and idempotency_key in self._idempotency:
                return self._entries[self._idempotency[idempotency_key]]
            config = self._build_config(overrides or {})
            session = Session(objective, config)
            entry = SessionEntry(
                session_id=session.state.session_id,
                objective=objective,
                created_at=session.recorder.events[0].at,
                session=session,
            )
            self._entries[entry.session_id] = entry
            if idempotency_key:
                self._idempotency[idempotency_key] = entry.session_id
        entry.thread = threading.Thread(target=session.start, daemon=True)
        entry.thread.start()
        return entry

    def get(self, session_id: str) -> SessionEntry:
        entry = self._entries.get(session_id)
        if entry is None:
            raise KeyError(session_id)
        return entry

    def answer(self, session_id: str, answer: str) -> SessionEntry:
        entry = self.get(session_id)
        if entry.thread is not None:
            entry.thread.join(timeout=30)
        if entry.session is None or entry.phase() != Phase.AWAITING_CLARIFICATION.value:
            raise WrongPhase(f"session {session_id} is not awaiting clarification")
        session = entry.session
        entry.thread = threading.Thread(target=session.resume, args=(answer,), daemon=True)
        entry.thread.start()
        return entry

    def wait(self, session_id: str, timeout: float = 30.0) -> None:
        entry = self.get(session_id)
        if entry.thread is not None:
            entry.thread.join(timeout=timeout)

    def registry_for_browse(self):
        entry = next(
            (e for e in self._entries.values() if e.session is not None), None
        )
        if entry is not None:
            return entry.session.registry
        return build_builtin_registry(manifests_dir=self.data_dir / "manifests")


class CreateSessionBody(BaseModel):
    objective: str = ""
    config: dict = {}


class ClarificationBody(BaseModel):
    answer: str


class EvalRunBody(BaseModel):
    instances: list[dict]
    tiers: dict[str, str] = {}
    normalized: bool = False


def _sse_frame(event: EventEnvelope) -> str:
    return f"id: {event.seq}\ndata: {event.to_json()}\n\n"


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="protlab gateway")

    @app.exception_handler(ProtlabError)
    async def _domain_error(request: Request, exc: ProtlabError):
        status = 409 if isinstance(exc, WrongPhase) else 400
        return JSONResponse(status_code=status, content={"error": exc.code, "message": str(exc)})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody, idempotency_key: Optional[str] = Header(default=None)):
        if not body.objective.strip():
            raise HTTPException(status_code=400, detail="objective must be non-empty")
        entry = manager.create(body.objective, body.config, idempotency_key)
        return entry.handle()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return manager.get(session_id).handle()
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.get("/sessions/{session_id}/events")
    def stream_events(
        session_id: str,
        last_event_id: Optional[str] = Header(default=None),
        after: Optional[int] = None,
        follow: bool = True,
    ):
        try:
            entry = manager.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        start_after = -1
        if last_event_id is not None:
            start_after = int(last_event_id)
        elif after is not None:
            start_after = after

        def generate() -> Iterator[str]:
            recorder = entry.live_recorder()
            cursor = start_after
            while True:
                batch = recorder.since(cursor)
                for event in batch:
                    cursor = event.seq
                    yield _sse_frame(event)
                if not follow:
                    return
                # Close once the session cannot emit more without outside
                # input; reconnect with Last-Event-ID resumes losslessly.
                phase = entry.phase()
                if phase in TERMINAL_PHASES or phase in _PAUSED_PHASES:
                    if not recorder.since(cursor):
                        return
                    continue
                with recorder.changed:
                    if not recorder.since(cursor):
                        recorder.changed.wait(timeout=0.25)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/clarification", status_code=202)
    def answer_clarification(session_id: str, body: ClarificationBody):
        try:
            entry = manager.answer(session_id, body.answer)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        return {"accepted": True, "session_id": entry.session_id}

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str):
        try:
            entry = manager.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        for event in reversed(entry.live_recorder().snapshot()):
            if event.kind == "report":
                return event.payload
        raise HTTPException(status_code=409, detail="report not ready")

    @app.get("/sessions/{session_id}/record")
    def get_record(session_id: str):
        try:
            entry = manager.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        return [json.loads(e.to_json()) for e in entry.live_recorder().snapshot()]

    @app.get("/tools")
    def list_tools():
        registry = manager.registry_for_browse()
        return [t.to_dict() for t in registry.tools()]

    @app.get("/tools/{name}")
    def show_tool(name: str):
        registry = manager.registry_for_browse()
        if not registry.has_tool(name):
            raise HTTPException(status_code=404, detail="unknown tool")
        out = registry.lookup(name).to_dict()
        manifest = registry.manifest_for(name)
        if manifest is not None:
            out["manifest"] = manifest.to_dict()
        return out

    @app.post("/eval/runs")
    def eval_run(body: EvalRunBody):
        results = []
        for item in body.instances:
            results.append(score_tournament(item["wins"], instance_id=item.get("instance_id", "")))
        response = {
            "results": [
                {
                    "instance_id": r.instance_id,
                    "wins": r.wins,
                    "ranks": r.ranks,
                    "scores": r.scores,
                }
                for r in results
            ]
        }
        if body.tiers:
            response["per_tier_mean"] = aggregate_corpus(results, body.tiers, body.normalized)
        return response

    return app
