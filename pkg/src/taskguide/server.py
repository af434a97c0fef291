"""HTTP and websocket service around the session engine.

REST endpoints cover spec and session lifecycle plus log fetch/replay; the
websocket channel carries the live event stream.  A client opens the socket,
sends a handshake ``{"session_id", "role", "last_seq"?}``, receives the
backlog of events it is allowed to see, then gets live events as they are
appended.  Wizard sockets may send actions; performer sockets may send
narration chunks and frame embeddings.

All session mutation is serialized through the per-session lock, so the
append-only log stays densely sequenced no matter how requests interleave.
"""

from __future__ import annotations

import queue
from typing import Any, Optional

import anyio
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from taskguide.model import TranscriptChunk, spec_to_document
from taskguide.session import (
    SessionConfig,
    SessionEngine,
    SessionError,
    SessionEvent,
    SessionLog,
    WizardAction,
    event_visible_to,
)

_CONFIG_KEYS = frozenset(
    {
        "window_ms",
        "cadence_ms",
        "encoder_dim",
        "required_slots",
        "utterance_catalog",
        "templates",
        "auto_prompts",
        "suggestion_limit",
    }
)


def _error_response(exc: Exception) -> JSONResponse:
    message = str(exc)
    status = 404 if message.startswith(("unknown spec", "unknown session")) else 400
    return JSONResponse(status_code=status, content={"error": message})


def create_app(engine: Optional[SessionEngine] = None) -> FastAPI:
    engine = engine if engine is not None else SessionEngine()
    app = FastAPI(title="taskguide")
    app.state.engine = engine

    @app.exception_handler(SessionError)
    async def _session_error(_request, exc: SessionError):  # noqa: ANN001
        return _error_response(exc)

    # -- specs --------------------------------------------------------------

    @app.get("/specs")
    def list_specs() -> dict:
        return {
            "specs": [
                {
                    "spec_id": spec.spec_id,
                    "title": spec.title,
                    "item_count": len(spec.items),
                }
                for spec_id, spec in sorted(engine.specs.items())
            ]
        }

    @app.post("/specs")
    def add_spec(document: dict) -> dict:
        spec = engine.load_spec_document(document)
        return {"spec_id": spec.spec_id}

    @app.get("/specs/{spec_id}")
    def get_spec(spec_id: str) -> dict:
        return spec_to_document(engine.get_spec(spec_id))

    # -- sessions -----------------------------------------------------------

    @app.post("/sessions")
    def create_session(body: dict) -> dict:
        config_data = dict(body.get("config") or {})
        unknown = set(config_data) - _CONFIG_KEYS
        if unknown:
            raise SessionError(f"unknown config keys: {sorted(unknown)}")
        session = engine.create_session(
            mode=body.get("mode", ""),
            spec_id=body.get("spec_id", ""),
            config=SessionConfig(**config_data),
        )
        return {
            "session_id": session.session_id,
            "mode": session.mode,
            "spec_id": session.spec.spec_id,
            "window_ms": session.config.window_ms,
        }

    @app.get("/sessions")
    def list_sessions() -> dict:
        return {
            "sessions": [
                {
                    "session_id": session.session_id,
                    "mode": session.mode,
                    "spec_id": session.spec.spec_id,
                    "active": session.active,
                    "events": len(session.log.events),
                }
                for session in engine.sessions.values()
            ]
        }

    @app.get("/sessions/{session_id}/log")
    def fetch_log(session_id: str) -> dict:
        session = engine.get_session(session_id)
        with session.lock:
            events = [event.to_dict() for event in session.log.events]
            header = dict(session.log.header)
        return {"header": header, "events": events}

    @app.post("/sessions/{session_id}/replay")
    def replay_session(session_id: str) -> dict:
        session = engine.get_session(session_id)
        with session.lock:
            log = SessionLog(
                header=dict(session.log.header), events=list(session.log.events)
            )
        derived = engine.replay_log(log)
        recorded = [e.to_line() for e in log.derived_events()]
        replayed = [e.to_line() for e in derived]
        return {
            "derived": [e.to_dict() for e in derived],
            "matches_recorded": recorded == replayed,
        }

    # -- live channel -------------------------------------------------------

    @app.websocket("/ws")
    async def channel(ws: WebSocket) -> None:
        await ws.accept()
        try:
            hello = await ws.receive_json()
        except WebSocketDisconnect:
            return
        role = hello.get("role")
        last_seq = int(hello.get("last_seq", -1))

        outbox: "queue.Queue[Optional[SessionEvent]]" = queue.Queue()

        try:
            session = engine.get_session(hello.get("session_id"))
            if role not in ("wizard", "performer"):
                raise SessionError(f"unknown role: {role!r}")

            def listener(event: SessionEvent) -> None:
                if event_visible_to(event, role, session.mode):
                    outbox.put(event)

            with session.lock:
                session.connect(role)  # occupancy check records the event too
                backlog = [
                    e
                    for e in session.log.events
                    if e.seq > last_seq and event_visible_to(e, role, session.mode)
                ]
                session.listeners.append(listener)
        except SessionError as exc:
            await ws.send_json({"type": "error", "error": str(exc)})
            await ws.close(code=1008)
            return

        await ws.send_json(
            {
                "type": "welcome",
                "session_id": session.session_id,
                "role": role,
                "mode": session.mode,
            }
        )
        try:
            for event in backlog:
                await ws.send_json({"type": "event", "event": event.to_dict()})

            async def pump_outbox() -> None:
                while True:
                    event = await anyio.to_thread.run_sync(outbox.get)
                    if event is None:
                        return
                    await ws.send_json({"type": "event", "event": event.to_dict()})

            async with anyio.create_task_group() as tg:
                tg.start_soon(pump_outbox)
                try:
                    while True:
                        message = await ws.receive_json()
                        reply = _handle_channel_message(session, role, message)
                        await ws.send_json(reply)
                except WebSocketDisconnect:
                    pass
                finally:
                    outbox.put(None)  # unblock the sender so the group can exit
        finally:
            with session.lock:
                if listener in session.listeners:
                    session.listeners.remove(listener)
                if session.participants.get(role):
                    session.disconnect(role)

    return app


def _handle_channel_message(session, role: str, message: dict) -> dict:  # noqa: ANN001
    try:
        mtype = message.get("type")
        if mtype == "act":
            if role != "wizard":
                raise SessionError("only the wizard can act")
            action = WizardAction(
                kind=message.get("kind", ""),
                utterance_id=message.get("utterance_id"),
                text=message.get("text"),
                slot=message.get("slot"),
                provenance=message.get("provenance"),
                command=message.get("cmd"),
                item=message.get("item"),
            )
            with session.lock:
                events = session.wizard_act(session.server_now_ms(), action)
            return {"type": "ack", "seqs": [e.seq for e in events]}
        if mtype == "narration":
            if role != "performer":
                raise SessionError("only the performer can narrate")
            chunk = TranscriptChunk(
                chunk_index=message["chunk_index"],
                text=message["text"],
                start_ms=message["start_ms"],
                end_ms=message["end_ms"],
            )
            with session.lock:
                events = session.ingest_narration(chunk)
            return {"type": "ack", "seqs": [e.seq for e in events]}
        if mtype == "frame-embedding":
            if role != "performer":
                raise SessionError("only the performer can send embeddings")
            with session.lock:
                events = session.ingest_frame_embedding(
                    int(message["t_ms"]), message["vector"]
                )
            return {"type": "ack", "seqs": [e.seq for e in events]}
        raise SessionError(f"unknown message type: {mtype!r}")
    except (KeyError, TypeError, ValueError) as exc:
        return {"type": "error", "error": str(exc)}
