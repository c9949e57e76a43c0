"""HTTP tool server: schema-validated routes over a generation backend.

Every incoming body is validated against the shared protocol schema
(422 on violation); GPU-bound generation routes are serialized behind a
single-slot queue with bounded depth, while verify/segment/complete may
run in parallel.  The capability handshake at /v1/health advertises which
guidance artifacts the backend actually consumes.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import threading
from importlib import resources

import jsonschema
import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image

from .backend import GenerationBackend, ProceduralBackend, decode_bitmask, decode_png

logger = logging.getLogger(__name__)

GENERATION_KINDS = {"text2img", "customize", "layout2img", "edit"}
ALL_KINDS = ["text2img", "customize", "layout2img", "edit", "verify", "segment", "complete"]


def load_protocol_schema() -> dict:
    text = resources.files("scenesmith.assets").joinpath("protocol_schema.json").read_text("utf-8")
    return json.loads(text)


def _validator(document: dict, kind: str, side: str) -> jsonschema.Draft202012Validator:
    schema = dict(document)
    schema["$ref"] = f"#/kinds/{kind}/{side}"
    return jsonschema.Draft202012Validator(schema)


def _png_payload(array: np.ndarray) -> dict:
    img = Image.fromarray(np.asarray(array, dtype=np.uint8), "RGB")
    buffer = io.BytesIO()
    img.save(buffer, format="PNG")
    return {"b64": base64.b64encode(buffer.getvalue()).decode("ascii"), "path": None}


def _pack_mask(mask: np.ndarray) -> dict:
    packed = np.packbits(mask.astype(bool), axis=None)
    return {
        "kind": "mask",
        "height": int(mask.shape[0]),
        "width": int(mask.shape[1]),
        "data": base64.b64encode(packed.tobytes()).decode("ascii"),
    }


def _image_bytes(payload: dict) -> bytes:
    if payload.get("b64"):
        return base64.b64decode(payload["b64"])
    if payload.get("path"):
        with open(payload["path"], "rb") as handle:
            return handle.read()
    raise ValueError("image payload carries neither bytes nor a path")


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": "error", "error": {"code": code, "message": message}},
    )


class RequestQueue:
    """One generation request in flight; bounded waiting depth."""

    def __init__(self, depth: int = 8):
        self._slot = threading.Semaphore(1)
        self._waiting = threading.Semaphore(depth)

    def __enter__(self):
        if not self._waiting.acquire(blocking=False):
            raise QueueFull()
        self._slot.acquire()
        return self

    def __exit__(self, *exc):
        self._slot.release()
        self._waiting.release()
        return False


class QueueFull(Exception):
    pass


def create_app(backend: GenerationBackend | None = None, queue_depth: int = 8) -> FastAPI:
    backend = backend or ProceduralBackend()
    schema = load_protocol_schema()
    request_validators = {kind: _validator(schema, kind, "request") for kind in ALL_KINDS}
    queue = RequestQueue(queue_depth)

    app = FastAPI(title="scenesmith tool adapter")

    @app.get("/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "backend": backend.name,
            "tools": ALL_KINDS,
            "queue_depth": queue_depth,
            "capabilities": {
                "attention_bias": True,
                "region_masks": True,
                "condition_image": True,
                "step_range": False,
                "layout_meta": False,
            },
        }

    def handle(kind: str, body: dict) -> dict:
        if kind == "text2img":
            image = backend.text_to_image(body["prompt"], body.get("seed", 0))
            return {"status": "ok", "payload": {"images": [_png_payload(image)]}}
        if kind == "customize":
            condition = body.get("condition_image")
            image = backend.compose(
                body["prompt"],
                body["layout"],
                body.get("attention_biases", []),
                None,
                _image_bytes(condition) if condition else None,
                0,
            )
            return {"status": "ok", "payload": {"images": [_png_payload(image)]}}
        if kind == "layout2img":
            image = backend.compose(
                body["prompt"],
                body["layout"],
                [],
                body.get("region_masks"),
                None,
                body.get("seed", 0),
            )
            return {"status": "ok", "payload": {"images": [_png_payload(image)]}}
        if kind == "edit":
            base = decode_png(_image_bytes(body["base_image"]))
            mask_payload = body["edit_mask"]
            mask = decode_bitmask(
                mask_payload["data"], (mask_payload["height"], mask_payload["width"])
            )
            if not mask.any():
                raise EmptyMaskError("edit mask has no foreground pixels")
            edited = backend.edit(base, mask, body["target_phrase"])
            return {"status": "ok", "payload": {"images": [_png_payload(edited)]}}
        if kind == "verify":
            image = decode_png(_image_bytes(body["image"]))
            questions = [q["text"] for q in body["questions"]]
            answers = backend.verify(image, questions)
            return {
                "status": "ok",
                "payload": {
                    "answers": [
                        {"question": question, "answer": bool(answer), "confidence": float(conf)}
                        for question, (answer, conf) in zip(questions, answers)
                    ]
                },
            }
        if kind == "segment":
            image = decode_png(_image_bytes(body["image"]))
            mask = backend.segment(image, body["caption"], body.get("box_hint"))
            return {"status": "ok", "payload": {"mask": _pack_mask(mask)}}
        return {"status": "ok", "payload": {"text": backend.complete(body["prompt"])}}

    def make_route(kind: str):
        async def route(request: Request) -> JSONResponse:
            try:
                body = await request.json()
            except Exception:
                return _error(422, "bad_json", "request body is not valid JSON")
            body["kind"] = kind
            errors = list(request_validators[kind].iter_errors(body))
            if errors:
                return _error(422, "schema_violation", "; ".join(e.message for e in errors[:3]))
            try:
                if kind in GENERATION_KINDS:
                    with queue:
                        result = handle(kind, body)
                else:
                    result = handle(kind, body)
            except QueueFull:
                return _error(503, "queue_full", "generation queue is full")
            except EmptyMaskError as exc:
                return _error(422, "empty_mask", str(exc))
            except Exception as exc:  # backend failure
                logger.exception("backend failure on %s", kind)
                return _error(500, "backend_failure", str(exc))
            return JSONResponse(status_code=200, content=result)

        return route

    for kind in ALL_KINDS:
        app.post(f"/v1/{kind}")(make_route(kind))
    return app


class EmptyMaskError(Exception):
    pass


def main() -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="Serve the scenesmith tool adapter")
    parser.add_argument("--port", type=int, default=9000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--queue-depth", type=int, default=8)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO)
    uvicorn.run(create_app(queue_depth=args.queue_depth), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
