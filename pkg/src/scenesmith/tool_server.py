"""HTTP tool server exposing a tool suite over the wire protocol.

One POST route per tool kind under /v1/, plus a health/capability
endpoint.  Semantic errors map to 422, unexpected failures to 500.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import EngineError
from .mocks import MockToolSuite
from .protocol import ToolKind, request_from_dict

logger = logging.getLogger(__name__)


def create_tool_server(suite: MockToolSuite | None = None) -> FastAPI:
    suite = suite or MockToolSuite()
    app = FastAPI(title="scenesmith tool server")

    @app.get("/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "tools": [kind.value for kind in ToolKind],
            "capabilities": {
                "attention_bias": True,
                "region_masks": True,
                "condition_image": True,
                "step_range": False,
                "layout_meta": True,
            },
        }

    def _make_route(kind: ToolKind):
        async def route(request: Request) -> JSONResponse:
            body = await request.json()
            body["kind"] = kind.value
            try:
                tool_request = request_from_dict(body)
                response = suite.handle(tool_request)
            except (EngineError, ValueError, KeyError, TypeError) as exc:
                logger.info("semantic error on %s: %s", kind.value, exc)
                return JSONResponse(
                    status_code=422,
                    content={
                        "status": "error",
                        "error": {"code": "bad_request", "message": str(exc)},
                    },
                )
            status = 200 if response.ok else 422
            return JSONResponse(status_code=status, content=response.to_dict())

        return route

    for kind in ToolKind:
        app.post(kind.route)(_make_route(kind))
    return app
