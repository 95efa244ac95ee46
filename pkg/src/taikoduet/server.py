"""HTTP wire protocol for the editor.

Single message endpoint: POST /api/message with a JSON document

    {"v": 1, "type": <type>, "session_id": <id or null>, "payload": {...}}

and a JSON reply {"v": 1, "type": "<type>_result" | "error",
"session_id": ..., "payload": {...}}. Message types mirror the session
operations: create_session, place, delete, pass_to_ai, snapshot, stats,
finish, list_songs. Domain failures come back as type "error" with a
message, never as transport failures.

Commands for one session are serialized behind a per-session lock;
independent sessions proceed concurrently.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse

from .adaptation import StrategyKind
from .chart import ChartError, NoteKind
from .session import SessionError, SessionManager, compute_log_statistics

PROTOCOL_VERSION = 1

MESSAGE_TYPES = (
    "create_session",
    "place",
    "delete",
    "pass_to_ai",
    "snapshot",
    "stats",
    "finish",
    "list_songs",
)


def create_app(manager: SessionManager, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="taikoduet", docs_url=None, redoc_url=None)
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(session_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(session_id, threading.Lock())

    def reply(msg_type: str, session_id, payload) -> JSONResponse:
        return JSONResponse(
            {"v": PROTOCOL_VERSION, "type": msg_type, "session_id": session_id,
             "payload": payload}
        )

    def error(session_id, message: str) -> JSONResponse:
        return reply("error", session_id, {"message": message})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/message")
    async def message(request: Request):
        try:
            doc = await request.json()
        except Exception:
            return error(None, "body is not valid JSON")
        if not isinstance(doc, dict) or doc.get("v") != PROTOCOL_VERSION:
            return error(None, f"message must carry v={PROTOCOL_VERSION}")
        msg_type = doc.get("type")
        session_id = doc.get("session_id")
        payload = doc.get("payload") or {}
        if msg_type not in MESSAGE_TYPES:
            return error(session_id, f"unknown message type {msg_type!r}")

        try:
            if msg_type == "list_songs":
                return reply("list_songs_result", None, {
                    "songs": [
                        {"song_id": s.song_id, "bpm": s.bpm, "offset_ms": s.offset_ms,
                         "duration_ms": s.duration_ms, "audio": s.audio_file}
                        for s in manager.songs.values()
                    ]
                })
            if msg_type == "create_session":
                strategy = payload.get("strategy")
                session = manager.create_session(
                    study_id=payload.get("study_id"),
                    leg=payload.get("leg", "first"),
                    strategy=StrategyKind(strategy) if strategy else None,
                    song_id=payload.get("song_id"),
                )
                return reply("create_session_result", session.session_id,
                             {"snapshot": session.snapshot()})

            session = manager.sessions.get(session_id)
            if session is None:
                return error(session_id, f"unknown session {session_id!r}")
            with lock_for(session_id):
                if msg_type == "place":
                    ack = manager.place(session, int(payload["time_ms"]),
                                        NoteKind(payload["kind"]))
                    return reply("place_result", session_id,
                                 {"ack": ack.__dict__, "snapshot": session.snapshot()})
                if msg_type == "delete":
                    ack = manager.delete(session, int(payload["time_ms"]))
                    return reply("delete_result", session_id,
                                 {"ack": ack.__dict__, "snapshot": session.snapshot()})
                if msg_type == "pass_to_ai":
                    fill = manager.pass_to_ai(session, int(payload["start_ms"]),
                                              int(payload["end_ms"]))
                    return reply("pass_to_ai_result", session_id,
                                 {"fill": fill, "snapshot": session.snapshot()})
                if msg_type == "snapshot":
                    return reply("snapshot_result", session_id,
                                 {"snapshot": session.snapshot()})
                if msg_type == "stats":
                    stats = compute_log_statistics(session.log.events)
                    return reply("stats_result", session_id, {
                        "time_spent_mins": stats.time_spent_mins,
                        "end_turn_count": stats.end_turn_count,
                        "human_notes_kept_pct": stats.human_notes_kept_pct,
                        "ai_notes_kept_pct": stats.ai_notes_kept_pct,
                    })
                if msg_type == "finish":
                    report = manager.finalize_session(session)
                    return reply("finish_result", session_id,
                                 {"report": report, "snapshot": session.snapshot()})
        except (SessionError, ChartError, ValueError, KeyError) as exc:
            return error(session_id, str(exc))
        return error(session_id, "unhandled message")

    @app.get("/songs/{name}")
    def song_file(name: str):
        if manager.songs_dir is None:
            return JSONResponse({"message": "no songs directory"}, status_code=404)
        target = (manager.songs_dir / name).resolve()
        if manager.songs_dir.resolve() not in target.parents or not target.is_file():
            return JSONResponse({"message": "not found"}, status_code=404)
        return FileResponse(target)

    @app.get("/api/log/{session_id}")
    def get_log(session_id: str):
        session = manager.sessions.get(session_id)
        if session is None:
            return JSONResponse({"message": f"unknown session {session_id!r}"}, status_code=404)
        return JSONResponse({
            "events": [
                {"seq": e.seq, "ts_ms": e.ts_ms, "kind": e.kind, "payload": e.payload}
                for e in session.log.events
            ]
        })

    if frontend_dir is not None:
        frontend_dir = Path(frontend_dir)

        @app.get("/")
        def index():
            return FileResponse(frontend_dir / "index.html")

        @app.get("/assets/{name}")
        def asset(name: str):
            assets_dir = (frontend_dir / "assets").resolve()
            target = (assets_dir / name).resolve()
            if assets_dir not in target.parents or not target.is_file():
                return JSONResponse({"message": "not found"}, status_code=404)
            return FileResponse(target)

    return app
