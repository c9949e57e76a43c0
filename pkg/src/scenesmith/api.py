"""REST API for the orchestrator, consumed by the feedback UI."""

from __future__ import annotations

import logging
import mimetypes
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import __version__
from .engine import Engine, parse_feedback
from .errors import (
    IllegalTransition,
    InvalidFeedback,
    SessionNotFound,
    StorageFailure,
)
from .store import PipelineSession

logger = logging.getLogger(__name__)


def session_view(session: PipelineSession) -> dict:
    """The session record as the UI sees it, artifact URLs included."""
    view = session.to_dict()
    view["artifact_urls"] = {
        name: f"/v1/sessions/{session.id}/artifacts/{name}" for name in session.artifacts
    }
    return view


def create_api(engine: Engine, ui_dir: str | Path | None = None) -> FastAPI:
    """API app; pass the built frontend directory to also serve the UI at /ui."""
    app = FastAPI(title="scenesmith", version=__version__)

    @app.exception_handler(SessionNotFound)
    async def _not_found(_, exc: SessionNotFound):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(IllegalTransition)
    async def _conflict(_, exc: IllegalTransition):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(InvalidFeedback)
    async def _bad_feedback(_, exc: InvalidFeedback):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_value(_, exc: ValueError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(StorageFailure)
    async def _storage(_, exc: StorageFailure):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__, "mock_mode": engine.config.mock_mode}

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request) -> dict:
        body = await request.json()
        prompt = body.get("prompt", "")
        mode = body.get("mode", "auto")
        session = engine.create_session(prompt, mode=mode)
        return session_view(session)

    @app.get("/v1/sessions")
    def list_sessions(phase: str | None = None) -> list[dict]:
        return [session_view(s) for s in engine.list_sessions(phase=phase)]

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return session_view(engine.get_session(session_id))

    @app.post("/v1/sessions/{session_id}/advance")
    async def advance(session_id: str, request: Request) -> dict:
        body = {}
        if (await request.body()):
            body = await request.json()
        max_steps = body.get("max_steps")
        return session_view(engine.advance(session_id, max_steps=max_steps))

    @app.post("/v1/sessions/{session_id}/feedback")
    async def feedback(session_id: str, request: Request) -> dict:
        body = await request.json()
        expected_revision = body.pop("revision", None)
        if expected_revision is not None:
            current = engine.get_session(session_id).revision
            if current != expected_revision:
                return JSONResponse(
                    status_code=409,
                    content={"error": f"stale revision {expected_revision}, current {current}"},
                )
        parsed = parse_feedback(body)
        return session_view(engine.submit_feedback(session_id, parsed))

    @app.get("/v1/sessions/{session_id}/artifacts/{name}")
    def artifact(session_id: str, name: str) -> Response:
        path = engine.store.artifact_path(session_id, name)
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media_type)

    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
