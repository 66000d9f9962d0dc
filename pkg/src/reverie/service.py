"""HTTP/WebSocket service exposing chat sessions and introspection streams.

Commands travel over HTTP+JSON; the per-session introspection feed (the same
ordered event log the session records) streams over a WebSocket with replay,
heartbeats while idle, and periodic queue snapshots. Session state lives in
memory; an optional append-only JSONL transcript per session can be enabled
with a persistence directory.
"""

from __future__ import annotations

import asyncio
import json
import os
from contextlib import asynccontextmanager
import queue as queue_mod
import threading
from typing import Any, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .gateway import (
    Backend,
    BackendError,
    LiveBackend,
    ScriptedBackend,
    SyntheticBackend,
)
from .session import AgentConfig, AgentSession, SessionBusyError

HEARTBEAT_S = 5.0

CONFIG_FIELDS = (
    "variant",
    "model_id",
    "talker_model_id",
    "manager_model_id",
    "controller_model_id",
    "temperature",
    "max_tokens",
    "conversation_budget",
    "monologue_budget",
    "recent_window",
    "retries",
    "worker_cap",
)


def build_backend(spec: Optional[dict]) -> Backend:
    """Construct the session backend from a request-supplied description.

    kinds: synthetic (default), scripted (inline plan or plan_path), live.
    """
    spec = spec or {}
    kind = spec.get("kind", "synthetic")
    if kind == "synthetic":
        return SyntheticBackend(
            talker_words=int(spec.get("talker_words", 85)),
            delay_s=float(spec.get("delay_s", 0.0)),
        )
    if kind == "scripted":
        if "plan" in spec:
            return ScriptedBackend.from_plan_data(spec["plan"])
        if "plan_path" in spec:
            return ScriptedBackend.from_file(spec["plan_path"])
        raise ValueError("scripted backend needs 'plan' or 'plan_path'")
    if kind == "live":
        return LiveBackend(base_url=spec.get("base_url"), api_key=spec.get("api_key"))
    raise ValueError(f"unknown backend kind: {kind!r}")


def parse_config(body: dict) -> AgentConfig:
    kwargs: dict[str, Any] = {}
    for name in CONFIG_FIELDS:
        if name in body:
            kwargs[name] = body[name]
    unknown = set(body) - set(CONFIG_FIELDS) - {"backend", "session_id"}
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    return AgentConfig(**kwargs)


class TranscriptWriter:
    """Append-only JSONL transcript: one line per committed exchange."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class SessionStore:
    def __init__(self, persist_dir: Optional[str] = None):
        self._sessions: dict[str, AgentSession] = {}
        self._transcripts: dict[str, TranscriptWriter] = {}
        self._lock = threading.Lock()
        self.persist_dir = persist_dir
        if persist_dir:
            os.makedirs(persist_dir, exist_ok=True)

    def create(self, config: AgentConfig, backend: Backend) -> AgentSession:
        session = AgentSession(backend, config)
        with self._lock:
            self._sessions[session.session_id] = session
            if self.persist_dir:
                path = os.path.join(self.persist_dir, f"{session.session_id}.jsonl")
                self._transcripts[session.session_id] = TranscriptWriter(path)
        return session

    def get(self, session_id: str) -> Optional[AgentSession]:
        with self._lock:
            return self._sessions.get(session_id)

    def transcript(self, session_id: str) -> Optional[TranscriptWriter]:
        with self._lock:
            return self._transcripts.get(session_id)

    def all_sessions(self) -> list[AgentSession]:
        with self._lock:
            return list(self._sessions.values())

    def shutdown(self, timeout: float = 10.0) -> None:
        for session in self.all_sessions():
            session.drain(timeout=timeout)
            session.scheduler.shutdown()


def event_payload(event) -> dict:
    return {"seq": event.seq, "kind": event.kind, "payload": event.payload, "ts": event.ts}


def create_app(
    persist_dir: Optional[str] = None,
    static_dir: Optional[str] = None,
    heartbeat_s: float = HEARTBEAT_S,
) -> FastAPI:
    store = SessionStore(persist_dir=persist_dir)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        # Let in-flight reflection jobs settle before the process exits.
        await asyncio.to_thread(store.shutdown)

    app = FastAPI(title="reverie", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.store = store

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(store.all_sessions())}

    @app.post("/sessions", status_code=201)
    def create_session(body: Optional[dict] = None):
        body = body or {}
        try:
            config = parse_config(body)
            backend = build_backend(body.get("backend"))
        except (ValueError, TypeError, KeyError) as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        session = store.create(config, backend)
        return {
            "session_id": session.session_id,
            "variant": config.variant,
            "conversation_budget": config.conversation_budget,
            "monologue_budget": config.monologue_budget,
            "temperature": config.temperature,
        }

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: dict):
        session = store.get(session_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown session"})
        text = body.get("text", "")
        if not isinstance(text, str) or not text:
            return JSONResponse(status_code=400, content={"error": "text must be non-empty"})
        try:
            trace = session.post_message(text)
        except SessionBusyError:
            return JSONResponse(
                status_code=409,
                content={"error": "a foreground request is already in flight"},
            )
        except BackendError as exc:
            return JSONResponse(
                status_code=502,
                content={
                    "error": str(exc),
                    "kind": exc.kind,
                    "retryable": exc.retryable,
                    "rolled_back": True,
                },
            )
        writer = store.transcript(session_id)
        if writer is not None:
            writer.append(
                {
                    "turn_index": trace["turn_index"],
                    "user": text,
                    "assistant": trace["reply"],
                    "latency_ms": trace["latency_ms"],
                    "narrative_injected": trace["narrative_injected"],
                }
            )
        return trace

    @app.get("/sessions/{session_id}/state")
    def session_state(session_id: str):
        session = store.get(session_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown session"})
        snapshot = session.state_snapshot()
        stats = session.scheduler.snapshot_queue_stats()
        snapshot["queue"] = {
            "length_histogram": {str(k): v for k, v in stats.length_histogram.items()},
            "active_fraction": stats.active_fraction,
            "mean_length": stats.mean_length,
            "max_length": stats.max_length,
        }
        return snapshot

    @app.websocket("/sessions/{session_id}/events")
    async def events(websocket: WebSocket, session_id: str):
        session = store.get(session_id)
        if session is None:
            await websocket.close(code=4404, reason="unknown session")
            return
        await websocket.accept()
        subscription = session.events.subscribe(replay=True)
        try:
            while True:
                try:
                    event = await asyncio.to_thread(
                        subscription.get, True, heartbeat_s
                    )
                except queue_mod.Empty:
                    stats = session.scheduler.snapshot_queue_stats()
                    await websocket.send_json(
                        {
                            "seq": None,
                            "kind": "heartbeat",
                            "payload": {
                                "turn": session.turn,
                                "queue_mean_length": stats.mean_length,
                            },
                            "ts": None,
                        }
                    )
                    await websocket.send_json(
                        {
                            "seq": None,
                            "kind": "queue_snapshot",
                            "payload": {
                                "length_histogram": {
                                    str(k): v for k, v in stats.length_histogram.items()
                                },
                                "active_fraction": stats.active_fraction,
                                "mean_length": stats.mean_length,
                                "max_length": stats.max_length,
                            },
                            "ts": None,
                        }
                    )
                    continue
                await websocket.send_json(event_payload(event))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            session.events.unsubscribe(subscription)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
