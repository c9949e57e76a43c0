"""Generation backend interface and the model-free procedural reference.

The procedural backend consumes every guidance artifact the engine
produces: it seeds composition from the condition image, tints each
attention-bias region, and outlines region-mask interiors.  Output
quality is irrelevant; artifact consumption and determinism are the
point.
"""

from __future__ import annotations

import base64
import io
import zlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from PIL import Image

from .tokens import span_to_token_indices

CANVAS = (512, 512)
NEUTRAL = (90, 96, 104)


class GenerationBackend(Protocol):
    name: str

    def text_to_image(self, prompt: str, seed: int) -> np.ndarray: ...

    def compose(
        self,
        prompt: str,
        layout: dict,
        biases: list[dict],
        region_masks: dict | None,
        condition_png: bytes | None,
        seed: int,
    ) -> np.ndarray: ...

    def edit(self, base: np.ndarray, mask: np.ndarray, target_phrase: str) -> np.ndarray: ...

    def verify(self, image: np.ndarray, questions: list[str]) -> list[tuple[bool, float]]: ...

    def segment(self, image: np.ndarray, caption: str, box_hint: dict | None) -> np.ndarray: ...

    def complete(self, prompt: str) -> str: ...


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"))


def decode_bias_grid(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    grid = np.frombuffer(raw, dtype="<f4").reshape(payload["height"], payload["width"])
    return grid.astype(np.float32)


def decode_bitmask(data: str, shape: tuple[int, int]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(data), dtype=np.uint8)
    bits = np.unpackbits(raw)[: shape[0] * shape[1]]
    return bits.reshape(shape).astype(bool)


def _hash_color(text: str) -> tuple[int, int, int]:
    digest = zlib.crc32(text.encode("utf-8"))
    return (48 + (digest & 0x9F), 48 + ((digest >> 8) & 0x9F), 48 + ((digest >> 16) & 0x9F))


def _upscale_mask(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    reps_y = max(1, height // mask.shape[0])
    reps_x = max(1, width // mask.shape[1])
    scaled = np.repeat(np.repeat(mask, reps_y, axis=0), reps_x, axis=1)
    return scaled[:height, :width]


@dataclass
class ProceduralBackend:
    """Deterministic placeholder imagery that honors the guidance inputs."""

    name: str = "procedural"

    def text_to_image(self, prompt: str, seed: int) -> np.ndarray:
        rng = np.random.default_rng(zlib.crc32(f"{prompt}:{seed}".encode("utf-8")))
        base = np.empty((*CANVAS[::-1], 3), dtype=np.uint8)
        base[:] = _hash_color(prompt)
        noise = rng.integers(-12, 13, size=base.shape, dtype=np.int16)
        return np.clip(base.astype(np.int16) + noise, 0, 255).astype(np.uint8)

    def compose(self, prompt, layout, biases, region_masks, condition_png, seed) -> np.ndarray:
        height, width = layout["canvas"][1], layout["canvas"][0]
        if condition_png is not None:
            canvas = (decode_png(condition_png).astype(np.float32) * 0.35).astype(np.uint8)
            canvas = canvas[:height, :width]
        else:
            canvas = np.empty((height, width, 3), dtype=np.uint8)
            canvas[:] = NEUTRAL

        for entry in layout.get("entries", []):
            box = entry["box"]
            x0, y0 = max(0, box["x"]), max(0, box["y"])
            x1 = min(width, box["x"] + box["w"])
            y1 = min(height, box["y"] + box["h"])
            if x1 > x0 and y1 > y0:
                canvas[y0:y1, x0:x1] = _hash_color(entry["caption"])

        for payload in biases:
            grid = decode_bias_grid(payload)
            positive = _upscale_mask(grid > 0, height, width)
            spans = payload.get("spans") or []
            token_key = ",".join(
                str(i) for span in spans for i in span_to_token_indices(prompt, span[0], span[1])
            )
            tint = np.array(_hash_color(f"bias:{token_key}"), dtype=np.float32)
            region = canvas[positive].astype(np.float32)
            canvas[positive] = (0.8 * region + 0.2 * tint).astype(np.uint8)

        if region_masks is not None:
            shape = (region_masks["height"], region_masks["width"])
            for encoded in region_masks.get("inner", []):
                inner = _upscale_mask(decode_bitmask(encoded, shape), height, width)
                edge = inner & ~np.roll(inner, 1, axis=0)
                canvas[edge] = (255, 255, 255)
        return canvas

    def edit(self, base: np.ndarray, mask: np.ndarray, target_phrase: str) -> np.ndarray:
        out = base.copy()
        out[mask] = _hash_color(target_phrase)
        return out

    def verify(self, image: np.ndarray, questions: list[str]) -> list[tuple[bool, float]]:
        # a placeholder VQA: uncommitted low-confidence yes per question
        return [(True, 0.5) for _ in questions]

    def segment(self, image: np.ndarray, caption: str, box_hint: dict | None) -> np.ndarray:
        height, width = image.shape[:2]
        mask = np.zeros((height, width), dtype=bool)
        if box_hint is not None:
            x0, y0 = max(0, box_hint["x"]), max(0, box_hint["y"])
            x1 = min(width, box_hint["x"] + box_hint["w"])
            y1 = min(height, box_hint["y"] + box_hint["h"])
            mask[y0:y1, x0:x1] = True
        else:
            mask[height // 4 : 3 * height // 4, width // 4 : 3 * width // 4] = True
        return mask

    def complete(self, prompt: str) -> str:
        caption = prompt.rsplit("Caption:", 1)[-1].strip() if "Caption:" in prompt else prompt
        caption = caption.replace("'", "").strip() or "an object"
        return f"Analysis: simple.\nObjects: [('{caption}', [128, 128, 256, 256])]"
