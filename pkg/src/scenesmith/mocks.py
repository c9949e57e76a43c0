"""Deterministic mock tools that close the pipeline loop offline.

The renderer draws each layout entry as a filled primitive whose color,
shape, and hatch overlay come from the caption's attributes; the verifier
answers questions by inspecting pixels (colors, shapes, hatches) and the
layout sidecar (counts, free-form attributes).  A configurable fault
injector corrupts chosen objects' colors at render time to exercise the
verification and self-correction path.
"""

from __future__ import annotations

import logging
import re
import zlib
from dataclasses import dataclass, field

import numpy as np

from .analysis import parse_noun_phrase, singularize
from .errors import EmptyMask, NoMatch, UnparseablePrompt
from .layout import BBox, LayoutEntry, SceneLayout, caption_noun, iou, plan_layout
from .lexicon import COLOR_WORDS, SHAPE_WORDS, TEXTURE_WORDS
from .protocol import (
    CompleteRequest,
    CustomizeRequest,
    ImagePayload,
    LayoutToImageRequest,
    LocalEditRequest,
    QuestionAnswer,
    SegmentRequest,
    TextToImageRequest,
    ToolRequest,
    ToolResponse,
    VerifyRequest,
    image_to_payload,
)
from .guidance import mask_from_payload, mask_payload

logger = logging.getLogger(__name__)

BACKGROUND = (127, 127, 127)

# 16 CSS basic colors plus brown, gold, orange, pink.
COLOR_TABLE: dict[str, tuple[int, int, int]] = {
    "black": (0, 0, 0),
    "silver": (192, 192, 192),
    "gray": (128, 128, 128),
    "grey": (128, 128, 128),
    "white": (255, 255, 255),
    "maroon": (128, 0, 0),
    "red": (255, 0, 0),
    "purple": (128, 0, 128),
    "fuchsia": (255, 0, 255),
    "green": (0, 128, 0),
    "lime": (0, 255, 0),
    "olive": (128, 128, 0),
    "yellow": (255, 255, 0),
    "navy": (0, 0, 128),
    "blue": (0, 0, 255),
    "teal": (0, 128, 128),
    "aqua": (0, 255, 255),
    "brown": (150, 75, 0),
    "gold": (255, 215, 0),
    "orange": (255, 165, 0),
    "pink": (255, 192, 203),
}

_SHAPE_PRIMITIVES = {
    "oval": "ellipse",
    "round": "ellipse",
    "circular": "ellipse",
    "spherical": "ellipse",
    "rectangular": "rectangle",
    "square": "rectangle",
    "triangular": "triangle",
    "conical": "triangle",
}

_ATTR_QUESTION = re.compile(r"^Is the (?P<noun>.+?) in the image (?P<value>.+?)\?$")
_COUNT_QUESTION = re.compile(r"^Are there (?P<count>\d+) (?P<nouns>.+?) in the image\?$")


@dataclass(frozen=True)
class CaptionStyle:
    fill: tuple[int, int, int]
    primitive: str
    hatch: tuple[int, int, int] | None


def hatch_color(fill: tuple[int, int, int], texture_value: str) -> tuple[int, int, int]:
    """Deterministic hatch shade per texture word, never equal to the fill."""
    digest = zlib.crc32(texture_value.encode("utf-8"))
    mixed = tuple(
        int(0.55 * c + 0.45 * ((digest >> (8 * i)) & 0xFF)) for i, c in enumerate(fill)
    )
    if mixed == fill or mixed == BACKGROUND:
        mixed = (mixed[0], mixed[1], (mixed[2] + 13) % 256)
    return mixed


def default_fill(noun: str) -> tuple[int, int, int]:
    """Mid-tone per-noun fill for objects without a color attribute.

    Kept distinct from the color name table and the background so the
    rectangle-fitting detector can separate nouns by paint color.
    """
    digest = zlib.crc32(f"fill:{noun}".encode("utf-8"))
    fill = (64 + (digest & 0x7F), 64 + ((digest >> 8) & 0x7F), 64 + ((digest >> 16) & 0x7F))
    taken = set(COLOR_TABLE.values()) | {BACKGROUND}
    while fill in taken:
        fill = ((fill[0] + 1) % 256, (fill[1] + 3) % 256, (fill[2] + 7) % 256)
    return fill


def caption_style(caption: str, color_override: str | None = None) -> CaptionStyle:
    """Resolve a caption's fill color, primitive shape, and hatch overlay."""
    color_name: str | None = color_override
    shape_word: str | None = None
    texture_word: str | None = None
    try:
        parsed = parse_noun_phrase(caption)
    except UnparseablePrompt:
        parsed = None
    if parsed is not None:
        for attr in parsed.attributes:
            if attr.kind == "color" and color_name is None:
                color_name = attr.value
            elif attr.kind == "shape" and shape_word is None:
                shape_word = attr.value
            elif attr.kind == "texture" and texture_word is None:
                texture_word = attr.value

    if color_name is None:
        fill = default_fill(parsed.noun if parsed is not None else caption.strip().lower())
    elif color_name in COLOR_TABLE:
        fill = COLOR_TABLE[color_name]
    else:
        logger.warning("unknown color name %r, falling back to gray", color_name)
        fill = COLOR_TABLE["gray"]

    primitive = _SHAPE_PRIMITIVES.get(shape_word or "", "rectangle")
    hatch = hatch_color(fill, texture_word) if texture_word else None
    return CaptionStyle(fill=fill, primitive=primitive, hatch=hatch)


def _primitive_mask(primitive: str, w: int, h: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    if primitive == "ellipse":
        cx, cy = w / 2, h / 2
        return ((xx + 0.5 - cx) / cx) ** 2 + ((yy + 0.5 - cy) / cy) ** 2 <= 1.0
    if primitive == "triangle":
        halfwidth = (yy + 0.5) / h * (w / 2)
        return np.abs(xx + 0.5 - w / 2) <= halfwidth
    return np.ones((h, w), dtype=bool)


def _paint_entry(canvas: np.ndarray, box: BBox, style: CaptionStyle) -> None:
    h, w = box.h, box.w
    if w <= 0 or h <= 0:
        return
    ch, cw = canvas.shape[:2]
    x0, y0 = max(0, box.x), max(0, box.y)
    x1, y1 = min(cw, box.right), min(ch, box.bottom)
    if x1 <= x0 or y1 <= y0:
        return
    mask = _primitive_mask(style.primitive, w, h)[y0 - box.y : y1 - box.y, x0 - box.x : x1 - box.x]
    region = canvas[y0:y1, x0:x1]
    region[mask] = style.fill
    if style.hatch is not None:
        yy, xx = np.mgrid[y0:y1, x0:x1]
        lines = ((xx + yy) % 16) < 2
        region[mask & lines] = style.hatch


@dataclass
class FaultInjector:
    """Per-session color corruption: object_ref -> wrong color name."""

    color_overrides: dict[int, str] = field(default_factory=dict)

    def override_for(self, object_ref: int | None) -> str | None:
        if object_ref is None:
            return None
        return self.color_overrides.get(object_ref)


def render_layout(
    layout: SceneLayout, injector: FaultInjector | None = None
) -> np.ndarray:
    """Draw every entry over a mid-gray background, in entry order."""
    cw, ch = layout.canvas
    canvas = np.empty((ch, cw, 3), dtype=np.uint8)
    canvas[:] = BACKGROUND
    injector = injector or FaultInjector()
    for entry in layout.entries:
        style = caption_style(entry.caption, injector.override_for(entry.object_ref))
        _paint_entry(canvas, entry.box, style)
    return canvas


def mock_render(
    request: TextToImageRequest | CustomizeRequest | LayoutToImageRequest,
    canvas: tuple[int, int] = (512, 512),
    injector: FaultInjector | None = None,
) -> ToolResponse:
    """Deterministic renderer for the three generation request kinds."""
    if isinstance(request, TextToImageRequest):
        cw, ch = canvas
        w, h = int(cw * 0.6), int(ch * 0.6)
        box = BBox((cw - w) // 2, (ch - h) // 2, w, h)
        layout = SceneLayout(
            canvas=canvas,
            entries=[LayoutEntry(object_ref=0, instance_index=0, caption=request.prompt, box=box)],
        )
        # concept renders are never fault-injected: they are the references
        # whose attributes are correct by construction
        image = render_layout(layout, None)
        return ToolResponse.ok_images([image_to_payload(image)])
    image = render_layout(request.layout, injector)
    return ToolResponse.ok_images([image_to_payload(image)])


def _entries_for_noun(layout: SceneLayout, noun: str) -> list:
    noun = noun.strip().lower()
    return [e for e in layout.entries if caption_noun(e.caption) == noun]


def _dominant_color(image: np.ndarray, box: BBox) -> tuple[int, int, int] | None:
    region = image[box.y : box.bottom, box.x : box.right].reshape(-1, 3)
    if region.size == 0:
        return None
    colors, counts = np.unique(region, axis=0, return_counts=True)
    keep = [i for i, c in enumerate(colors) if tuple(int(v) for v in c) != BACKGROUND]
    if not keep:
        return None
    best = max(keep, key=lambda i: counts[i])
    return tuple(int(v) for v in colors[best])


def _classify_primitive(image: np.ndarray, box: BBox) -> str:
    """Corner/center occupancy signature of the painted primitive."""
    inset = 2
    h, w = box.h, box.w
    if h <= 2 * inset or w <= 2 * inset:
        return "rectangle"

    def fg(px: int, py: int) -> bool:
        x = min(max(box.x + px, 0), image.shape[1] - 1)
        y = min(max(box.y + py, 0), image.shape[0] - 1)
        return tuple(int(v) for v in image[y, x]) != BACKGROUND

    tl, tr = fg(inset, inset), fg(w - 1 - inset, inset)
    bl, br = fg(inset, h - 1 - inset), fg(w - 1 - inset, h - 1 - inset)
    if tl and tr and bl and br:
        return "rectangle"
    if not tl and not tr and bl and br:
        return "triangle"
    return "ellipse"


def _answer_question(
    question: str, image: np.ndarray, layout: SceneLayout
) -> QuestionAnswer:
    count_match = _COUNT_QUESTION.match(question)
    if count_match:
        noun = singularize(count_match.group("nouns"))
        matched = _entries_for_noun(layout, noun)
        return QuestionAnswer(question, len(matched) == int(count_match.group("count")))

    attr_match = _ATTR_QUESTION.match(question)
    if not attr_match:
        return QuestionAnswer(question, False, confidence=0.0)
    noun = attr_match.group("noun").strip().lower()
    value = attr_match.group("value").strip().lower()
    matched = _entries_for_noun(layout, noun)
    if not matched:
        return QuestionAnswer(question, False, confidence=0.0)

    if value in COLOR_TABLE:
        expected = COLOR_TABLE[value]
        ok = all(_dominant_color(image, e.box) == expected for e in matched)
        return QuestionAnswer(question, ok)
    if value in SHAPE_WORDS and value in _SHAPE_PRIMITIVES:
        expected_primitive = _SHAPE_PRIMITIVES[value]
        ok = all(_classify_primitive(image, e.box) == expected_primitive for e in matched)
        return QuestionAnswer(question, ok)
    if value in TEXTURE_WORDS:
        ok = True
        for entry in matched:
            fill = _dominant_color(image, entry.box)
            if fill is None:
                ok = False
                break
            expected_hatch = np.array(hatch_color(fill, value), dtype=np.uint8)
            region = image[entry.box.y : entry.box.bottom, entry.box.x : entry.box.right]
            ok = ok and bool((region == expected_hatch).all(axis=-1).any())
        return QuestionAnswer(question, ok)
    # free-form attribute: decided against the caption text in the sidecar
    ok = all(re.search(rf"\b{re.escape(value)}\b", e.caption.lower()) for e in matched)
    return QuestionAnswer(question, bool(ok), confidence=0.5)


def mock_verify(request: VerifyRequest) -> ToolResponse:
    """Exact verification over mock renders via pixels plus layout sidecar."""
    if request.layout_meta is None:
        return ToolResponse.semantic_error("missing_layout_meta", "mock verifier needs layout metadata")
    image = request.image.to_array()
    answers = [
        _answer_question(q.text, image, request.layout_meta) for q in request.questions
    ]
    return ToolResponse.ok_answers(answers)


def mock_segment(request: SegmentRequest) -> ToolResponse:
    """Mask equal to the exact box rasterization of the matched entry."""
    if request.layout_meta is None:
        return ToolResponse.semantic_error("missing_layout_meta", "mock segmenter needs layout metadata")
    layout = request.layout_meta
    wanted = caption_noun(request.caption)
    candidates = [
        e
        for e in layout.entries
        if caption_noun(e.caption) == wanted or e.caption == request.caption
    ]
    entry = None
    if candidates:
        if request.box_hint is not None and len(candidates) > 1:
            entry = max(candidates, key=lambda e: iou(request.box_hint, e.box))
        else:
            entry = candidates[0]
    elif request.box_hint is not None:
        scored = [(iou(request.box_hint, e.box), i, e) for i, e in enumerate(layout.entries)]
        scored.sort(key=lambda t: (-t[0], t[1]))
        if scored and scored[0][0] > 0:
            entry = scored[0][2]
    if entry is None:
        raise NoMatch(f"no layout entry matches caption {request.caption!r}")
    cw, ch = layout.canvas
    mask = np.zeros((ch, cw), dtype=bool)
    box = entry.box
    mask[max(0, box.y) : box.bottom, max(0, box.x) : box.right] = True
    return ToolResponse.ok_mask(mask_payload(mask))


def mock_edit(request: LocalEditRequest) -> ToolResponse:
    """Re-render the masked region from the target phrase; leave the rest
    byte-identical."""
    mask = mask_from_payload(request.edit_mask)
    if not mask.any():
        raise EmptyMask("local edit mask has no foreground pixels")
    base = request.base_image.to_array().copy()
    style = caption_style(request.target_phrase)

    ys, xs = np.nonzero(mask)
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    primitive = _primitive_mask(style.primitive, x1 - x0, y1 - y0)
    region_mask = mask[y0:y1, x0:x1]
    region = base[y0:y1, x0:x1]
    region[region_mask & ~primitive] = BACKGROUND
    region[region_mask & primitive] = style.fill
    if style.hatch is not None:
        yy, xx = np.mgrid[y0:y1, x0:x1]
        lines = ((xx + yy) % 16) < 2
        region[region_mask & primitive & lines] = style.hatch
    return ToolResponse.ok_images([image_to_payload(base)])


def mock_complete(request: CompleteRequest, canvas: tuple[int, int] = (512, 512)) -> ToolResponse:
    """Stand-in agent completion: rule-parse the trailing caption, plan a
    layout, and format the two-line answer."""
    from .agent_io import serialize_agent_response
    from .analysis import decompose_rule_based

    captions = re.findall(r"Caption:\s*(.+)", request.prompt)
    if not captions:
        return ToolResponse.ok_text("Analysis: unknown.\nObjects: []")
    caption = captions[-1].strip()
    try:
        analysis = decompose_rule_based(caption)
        layout = plan_layout(analysis, seed=zlib.crc32(caption.encode("utf-8")) % 10_000, canvas=canvas)
    except Exception:
        return ToolResponse.ok_text("Analysis: unknown.\nObjects: []")
    return ToolResponse.ok_text(serialize_agent_response(analysis, layout))


@dataclass
class MockToolSuite:
    """In-process deterministic tool endpoints for closed-loop runs."""

    canvas: tuple[int, int] = (512, 512)
    injector: FaultInjector = field(default_factory=FaultInjector)

    def handle(self, request: ToolRequest) -> ToolResponse:
        try:
            if isinstance(request, (TextToImageRequest, CustomizeRequest, LayoutToImageRequest)):
                return mock_render(request, canvas=self.canvas, injector=self.injector)
            if isinstance(request, VerifyRequest):
                return mock_verify(request)
            if isinstance(request, SegmentRequest):
                return mock_segment(request)
            if isinstance(request, LocalEditRequest):
                return mock_edit(request)
            if isinstance(request, CompleteRequest):
                return mock_complete(request, canvas=self.canvas)
        except NoMatch as exc:
            return ToolResponse.semantic_error("no_match", str(exc))
        except EmptyMask as exc:
            return ToolResponse.semantic_error("empty_mask", str(exc))
        raise TypeError(f"unsupported request type {type(request).__name__}")


def legend_for_layout(layout: SceneLayout) -> dict[tuple[int, int, int], str]:
    """Fill-color to noun mapping for detector stubs over mock renders."""
    legend: dict[tuple[int, int, int], str] = {}
    for entry in layout.entries:
        style = caption_style(entry.caption)
        legend[style.fill] = caption_noun(entry.caption)
    return legend
