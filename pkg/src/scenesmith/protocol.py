"""Request/response contract for all external tools.

One request kind per tool route.  Images travel base64-encoded PNG inside
request/response bodies, or as file-path references when engine and tool
share a filesystem.  Mock tools additionally receive the scene layout as
out-of-band metadata (``layout_meta``) so verification can be exact; real
tool servers ignore that field.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from PIL import Image

from .layout import BBox, SceneLayout
from .policy import VerificationQuestion


class ToolKind(str, Enum):
    TEXT_TO_IMAGE = "text2img"
    CUSTOMIZE = "customize"
    LAYOUT_TO_IMAGE = "layout2img"
    LOCAL_EDIT = "edit"
    VERIFY = "verify"
    SEGMENT = "segment"
    COMPLETE = "complete"

    @property
    def route(self) -> str:
        return f"/v1/{self.value}"


@dataclass(frozen=True)
class ImagePayload:
    """An encoded image: inline base64 PNG or a shared-filesystem path."""

    b64: str | None = None
    path: str | None = None

    def to_dict(self) -> dict:
        return {"b64": self.b64, "path": self.path}

    @classmethod
    def from_dict(cls, data: dict) -> "ImagePayload":
        return cls(b64=data.get("b64"), path=data.get("path"))

    def to_array(self) -> np.ndarray:
        if self.b64 is not None:
            raw = base64.b64decode(self.b64)
            with Image.open(io.BytesIO(raw)) as img:
                return np.asarray(img.convert("RGB"))
        if self.path is not None:
            with Image.open(self.path) as img:
                return np.asarray(img.convert("RGB"))
        raise ValueError("image payload carries neither bytes nor a path")


def image_to_payload(array: np.ndarray) -> ImagePayload:
    """Encode an (H, W, 3) uint8 array as an inline PNG payload."""
    img = Image.fromarray(np.asarray(array, dtype=np.uint8), "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return ImagePayload(b64=base64.b64encode(buf.getvalue()).decode("ascii"))


def png_bytes(array: np.ndarray) -> bytes:
    img = Image.fromarray(np.asarray(array, dtype=np.uint8), "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# --- requests -----------------------------------------------------------------


@dataclass
class TextToImageRequest:
    prompt: str
    seed: int = 0
    kind: ToolKind = field(default=ToolKind.TEXT_TO_IMAGE, init=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "prompt": self.prompt, "seed": self.seed}


@dataclass
class CustomizeRequest:
    prompt: str
    concept_images: list[list[ImagePayload]]
    layout: SceneLayout
    attention_biases: list[dict] = field(default_factory=list)
    condition_image: ImagePayload | None = None
    kind: ToolKind = field(default=ToolKind.CUSTOMIZE, init=False)

    def __post_init__(self) -> None:
        if any(len(images) < 1 for images in self.concept_images):
            raise ValueError("each concept needs at least one image")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "prompt": self.prompt,
            "concept_images": [[im.to_dict() for im in group] for group in self.concept_images],
            "layout": self.layout.to_dict(),
            "attention_biases": self.attention_biases,
            "condition_image": self.condition_image.to_dict() if self.condition_image else None,
        }


@dataclass
class LayoutToImageRequest:
    prompt: str
    layout: SceneLayout
    region_masks: dict | None = None
    seed: int = 0
    kind: ToolKind = field(default=ToolKind.LAYOUT_TO_IMAGE, init=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "prompt": self.prompt,
            "layout": self.layout.to_dict(),
            "region_masks": self.region_masks,
            "seed": self.seed,
        }


@dataclass
class LocalEditRequest:
    base_image: ImagePayload
    edit_mask: dict
    target_phrase: str
    reference_images: list[ImagePayload] = field(default_factory=list)
    attention_bias: dict | None = None
    layout_meta: SceneLayout | None = None
    kind: ToolKind = field(default=ToolKind.LOCAL_EDIT, init=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "base_image": self.base_image.to_dict(),
            "edit_mask": self.edit_mask,
            "target_phrase": self.target_phrase,
            "reference_images": [im.to_dict() for im in self.reference_images],
            "attention_bias": self.attention_bias,
            "layout_meta": self.layout_meta.to_dict() if self.layout_meta else None,
        }


@dataclass
class VerifyRequest:
    image: ImagePayload
    questions: list[VerificationQuestion]
    layout_meta: SceneLayout | None = None
    kind: ToolKind = field(default=ToolKind.VERIFY, init=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "image": self.image.to_dict(),
            "questions": [q.to_dict() for q in self.questions],
            "layout_meta": self.layout_meta.to_dict() if self.layout_meta else None,
        }


@dataclass
class SegmentRequest:
    image: ImagePayload
    caption: str
    box_hint: BBox | None = None
    layout_meta: SceneLayout | None = None
    kind: ToolKind = field(default=ToolKind.SEGMENT, init=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "image": self.image.to_dict(),
            "caption": self.caption,
            "box_hint": self.box_hint.to_dict() if self.box_hint else None,
            "layout_meta": self.layout_meta.to_dict() if self.layout_meta else None,
        }


@dataclass
class CompleteRequest:
    prompt: str
    kind: ToolKind = field(default=ToolKind.COMPLETE, init=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "prompt": self.prompt}


ToolRequest = (
    TextToImageRequest
    | CustomizeRequest
    | LayoutToImageRequest
    | LocalEditRequest
    | VerifyRequest
    | SegmentRequest
    | CompleteRequest
)


def request_from_dict(data: dict) -> ToolRequest:
    kind = ToolKind(data["kind"])
    if kind is ToolKind.TEXT_TO_IMAGE:
        return TextToImageRequest(prompt=data["prompt"], seed=data.get("seed", 0))
    if kind is ToolKind.CUSTOMIZE:
        return CustomizeRequest(
            prompt=data["prompt"],
            concept_images=[
                [ImagePayload.from_dict(im) for im in group] for group in data["concept_images"]
            ],
            layout=SceneLayout.from_dict(data["layout"]),
            attention_biases=data.get("attention_biases", []),
            condition_image=(
                ImagePayload.from_dict(data["condition_image"]) if data.get("condition_image") else None
            ),
        )
    if kind is ToolKind.LAYOUT_TO_IMAGE:
        return LayoutToImageRequest(
            prompt=data["prompt"],
            layout=SceneLayout.from_dict(data["layout"]),
            region_masks=data.get("region_masks"),
            seed=data.get("seed", 0),
        )
    if kind is ToolKind.LOCAL_EDIT:
        return LocalEditRequest(
            base_image=ImagePayload.from_dict(data["base_image"]),
            edit_mask=data["edit_mask"],
            target_phrase=data["target_phrase"],
            reference_images=[ImagePayload.from_dict(im) for im in data.get("reference_images", [])],
            attention_bias=data.get("attention_bias"),
            layout_meta=SceneLayout.from_dict(data["layout_meta"]) if data.get("layout_meta") else None,
        )
    if kind is ToolKind.VERIFY:
        return VerifyRequest(
            image=ImagePayload.from_dict(data["image"]),
            questions=[VerificationQuestion.from_dict(q) for q in data.get("questions", [])],
            layout_meta=SceneLayout.from_dict(data["layout_meta"]) if data.get("layout_meta") else None,
        )
    if kind is ToolKind.SEGMENT:
        return SegmentRequest(
            image=ImagePayload.from_dict(data["image"]),
            caption=data["caption"],
            box_hint=BBox.from_dict(data["box_hint"]) if data.get("box_hint") else None,
            layout_meta=SceneLayout.from_dict(data["layout_meta"]) if data.get("layout_meta") else None,
        )
    return CompleteRequest(prompt=data["prompt"])


# --- responses -----------------------------------------------------------------


@dataclass
class QuestionAnswer:
    question: str
    answer: bool
    confidence: float = 1.0

    def to_dict(self) -> dict:
        return {"question": self.question, "answer": self.answer, "confidence": self.confidence}

    @classmethod
    def from_dict(cls, data: dict) -> "QuestionAnswer":
        return cls(data["question"], bool(data["answer"]), float(data.get("confidence", 1.0)))


@dataclass
class ToolResponse:
    status: str = "ok"  # ok | error
    error_code: str | None = None
    error_message: str | None = None
    images: list[ImagePayload] = field(default_factory=list)
    answers: list[QuestionAnswer] = field(default_factory=list)
    mask: dict | None = None
    text: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def ok_images(cls, images: list[ImagePayload]) -> "ToolResponse":
        return cls(images=images)

    @classmethod
    def ok_answers(cls, answers: list[QuestionAnswer]) -> "ToolResponse":
        return cls(answers=answers)

    @classmethod
    def ok_mask(cls, mask: dict) -> "ToolResponse":
        return cls(mask=mask)

    @classmethod
    def ok_text(cls, text: str) -> "ToolResponse":
        return cls(text=text)

    @classmethod
    def semantic_error(cls, code: str, message: str) -> "ToolResponse":
        return cls(status="error", error_code=code, error_message=message)

    def to_dict(self) -> dict:
        data: dict = {"status": self.status}
        if self.status == "error":
            data["error"] = {"code": self.error_code, "message": self.error_message}
            return data
        payload: dict = {}
        if self.images:
            payload["images"] = [im.to_dict() for im in self.images]
        if self.answers:
            payload["answers"] = [a.to_dict() for a in self.answers]
        if self.mask is not None:
            payload["mask"] = self.mask
        if self.text is not None:
            payload["text"] = self.text
        data["payload"] = payload
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ToolResponse":
        if data.get("status") == "error":
            err = data.get("error") or {}
            return cls.semantic_error(err.get("code", "unknown"), err.get("message", ""))
        payload = data.get("payload") or {}
        return cls(
            images=[ImagePayload.from_dict(im) for im in payload.get("images", [])],
            answers=[QuestionAnswer.from_dict(a) for a in payload.get("answers", [])],
            mask=payload.get("mask"),
            text=payload.get("text"),
        )


@dataclass(frozen=True)
class ToolEndpoint:
    """Where and how to reach one tool kind.

    ``target`` is "mock:<name>" for in-process handlers registered on the
    dispatcher, or an http(s) base URL for remote servers.
    """

    kind: ToolKind
    target: str
    timeout_ms: int = 10_000
    max_retries: int = 2
    backoff_s: tuple[float, ...] = (0.05, 0.2, 0.5)

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
