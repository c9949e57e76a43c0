"""Building agent completion prompts and parsing agent responses.

The completion prompt concatenates a task specification, the tool-library
introduction, the decomposition format instructions, in-context Q/A
examples, and the user caption.  Responses follow a two-line grammar::

    Analysis: attribute-only.
    Objects: [('a blue horse', [50, 70, 220, 300]), ...]

The parser is tolerant of a missing closing quote inside a tuple (such
responses occur in practice) and clamps out-of-bounds boxes to the canvas
with a logged warning rather than rejecting them.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources

from .analysis import AttributedObject, Category, PromptAnalysis, parse_noun_phrase
from .errors import MalformedResponse, NegativeBoxSize, UnparseablePrompt
from .layout import BBox, LayoutEntry, SceneLayout

logger = logging.getLogger(__name__)

TASK_SECTION = (
    "You are an intelligent research assistant. You have access to the following "
    "tools to address the compositional text-to-image generation problem:"
)

TOOLS_SECTION = """\
1) The multi-concept customization tool. It is good at texts where objects are \
coupled complex attributes, like color, shape, texture. It can also handle certain \
spatial relationships, like "on the left of, on the right of" and some simple and \
straightforward object relationships, like the mirror hanging above, the snow covering.

2) The layout-to-image generation tool. It is good at texts where objects are \
interacted with complicated relationships or actions, like playing, holding. It can \
also process attributes that are easy or straightforward, like a red apple, the white snow.

3) The text-to-image generation tool. It can handle those simple texts without \
complex attributes and relationships."""

FORMAT_SECTION = (
    "I will provide you with a caption for an image. Your should also extract "
    "individual objects and generate the bounding boxes for the objects mentioned "
    "in the caption. The images are of size 512x512. The top-left corner has "
    "coordinate [0, 0]. The bottom-right corner has coordinate [512, 512]. The "
    "bounding boxes should not go beyond the boundaries and it is better to avoid "
    "overlapping bounding boxes. Each bounding box should be in the format of "
    "(object name, [top-left x coordinate, top-left y coordinate, box width, box "
    "height]) and include exactly one object (i.e., start the object name with a "
    "or an if possible). If needed, you can make reasonable guesses. Please refer "
    "to the example below for the desired format."
)


@dataclass(frozen=True)
class InContextExample:
    """One Q/A demonstration pair: a caption and the expected answer text."""

    caption: str
    answer: str


def _load_asset_text(name: str) -> str:
    return resources.files("scenesmith.assets").joinpath(name).read_text("utf-8")


def default_examples() -> list[InContextExample]:
    """The five packaged in-context Q/A pairs."""
    text = _load_asset_text("incontext_examples.txt")
    examples: list[InContextExample] = []
    caption: str | None = None
    answer_lines: list[str] = []
    mode = ""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped == "Q:":
            if caption is not None:
                examples.append(InContextExample(caption, "\n".join(answer_lines).strip()))
            caption, answer_lines, mode = None, [], "q"
        elif stripped == "A:":
            mode = "a"
        elif mode == "q" and stripped.startswith("Caption:"):
            caption = stripped[len("Caption:") :].strip()
        elif mode == "a" and stripped:
            answer_lines.append(stripped)
    if caption is not None:
        examples.append(InContextExample(caption, "\n".join(answer_lines).strip()))
    return examples


def build_agent_prompt(prompt: str, examples: list[InContextExample] | None = None) -> str:
    """Assemble the full completion prompt ending in ``Caption: {prompt}``."""
    if examples is None:
        examples = default_examples()
    blocks = []
    for i, example in enumerate(examples, start=1):
        blocks.append(f"Q{i}:\nCaption: {example.caption}\nA{i}:\n{example.answer}\n\n")
    template = _load_asset_text("agent_prompt_template.txt")
    return template.format(
        TASK=TASK_SECTION,
        TOOLS=TOOLS_SECTION,
        FORMAT=FORMAT_SECTION,
        EXAMPLES="".join(blocks),
        CAPTION=prompt,
    ).rstrip("\n")


# --- response parsing ---------------------------------------------------------

_ANALYSIS_LINE = re.compile(r"Analysis:\s*(?P<cat>[A-Za-z-]+)\s*\.?", re.IGNORECASE)
_CATEGORY_TOKENS = {
    "attribute-only": Category.ATTRIBUTE_ONLY,
    "relationship-only": Category.RELATION_ONLY,
    "both": Category.BOTH,
    "simple": Category.SIMPLE,
}


def _extract_object_list(text: str) -> str:
    """Return the bracketed list following ``Objects:``, brackets balanced."""
    marker = text.find("Objects:")
    if marker < 0:
        raise MalformedResponse("missing Objects: line")
    start = text.find("[", marker)
    if start < 0:
        raise MalformedResponse("missing object list bracket")
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "[":
            depth += 1
        elif text[i] == "]":
            depth -= 1
            if depth == 0:
                return text[start + 1 : i]
    raise MalformedResponse("unbalanced brackets in object list")


def _parse_tuples(list_body: str) -> list[tuple[str, list[int]]]:
    """Scan ``('phrase', [x, y, w, h])`` tuples, tolerating a lost quote."""
    results: list[tuple[str, list[int]]] = []
    pos = 0
    while True:
        open_paren = list_body.find("(", pos)
        if open_paren < 0:
            break
        close_paren = list_body.find(")", open_paren)
        if close_paren < 0:
            raise MalformedResponse("unterminated tuple")
        body = list_body[open_paren + 1 : close_paren]
        bracket = body.rfind("[")
        if bracket < 0:
            raise MalformedResponse(f"tuple without coordinates: {body!r}")
        coord_text = body[bracket:].strip()
        if not coord_text.endswith("]"):
            raise MalformedResponse(f"unbalanced coordinate bracket: {body!r}")
        phrase = body[:bracket].strip().rstrip(",").strip()
        for quote in ("'", '"'):
            if phrase.startswith(quote):
                phrase = phrase[1:]
            if phrase.endswith(quote):
                phrase = phrase[:-1]
        phrase = phrase.strip()
        if not phrase:
            raise MalformedResponse("tuple with empty object name")
        parts = [p.strip() for p in coord_text[1:-1].split(",")]
        if len(parts) != 4:
            raise MalformedResponse(f"expected 4 coordinates, got {parts!r}")
        try:
            coords = [int(p) for p in parts]
        except ValueError as exc:
            raise MalformedResponse(f"non-integer coordinate in {parts!r}") from exc
        results.append((phrase, coords))
        pos = close_paren + 1
    return results


def _clamp_to_canvas(coords: list[int], canvas: tuple[int, int]) -> tuple[BBox, bool]:
    x, y, w, h = coords
    if w <= 0 or h <= 0:
        raise NegativeBoxSize(f"box {coords} has non-positive size")
    cw, ch = canvas
    left, top = max(x, 0), max(y, 0)
    right, bottom = min(x + w, cw), min(y + h, ch)
    if right <= left:
        left = min(max(x, 0), cw - 1)
        right = left + 1
    if bottom <= top:
        top = min(max(y, 0), ch - 1)
        bottom = top + 1
    box = BBox(left, top, right - left, bottom - top)
    return box, (box.x, box.y, box.w, box.h) != (x, y, w, h)


def _object_from_phrase(phrase: str) -> AttributedObject:
    """Re-extract attributes from a printed phrase, keeping the phrase verbatim."""
    try:
        parsed = parse_noun_phrase(phrase)
    except UnparseablePrompt:
        noun = re.sub(r"^(a|an|the)\s+", "", phrase.lower()).strip() or phrase
        if noun not in phrase:
            noun = phrase
        return AttributedObject(phrase=phrase, noun=noun)
    noun = parsed.noun if parsed.noun in phrase else phrase
    return AttributedObject(phrase=phrase, noun=noun, attributes=parsed.attributes, count=1)


def parse_agent_response(
    text: str, canvas: tuple[int, int] = (512, 512), raw_prompt: str = ""
) -> tuple[PromptAnalysis, SceneLayout]:
    """Parse an agent completion into an analysis and a scene layout.

    Boxes exceeding the canvas are clamped to it and a warning is logged;
    non-positive sizes raise NegativeBoxSize.
    """
    match = _ANALYSIS_LINE.search(text)
    if not match:
        raise MalformedResponse("missing Analysis: line")
    token = match.group("cat").lower().rstrip(".")
    category = _CATEGORY_TOKENS.get(token)
    if category is None:
        raise MalformedResponse(f"unknown analysis category {token!r}")

    tuples = _parse_tuples(_extract_object_list(text))
    if not tuples and category is not Category.SIMPLE:
        raise MalformedResponse("empty object list on non-Simple category")

    if not raw_prompt:
        caption_match = re.search(r"Caption:\s*(.+)", text)
        raw_prompt = caption_match.group(1).strip() if caption_match else ""

    objects: list[AttributedObject] = []
    entries: list[LayoutEntry] = []
    for index, (phrase, coords) in enumerate(tuples):
        box, clamped = _clamp_to_canvas(coords, canvas)
        if clamped:
            logger.warning("box %s for %r clamped to canvas %s -> %s", coords, phrase, canvas, box)
        objects.append(_object_from_phrase(phrase))
        entries.append(LayoutEntry(object_ref=index, instance_index=0, caption=phrase, box=box))

    analysis = PromptAnalysis(raw_prompt=raw_prompt, objects=objects, relations=[], category=category)
    layout = SceneLayout(canvas=canvas, entries=entries)
    return analysis, layout


def serialize_agent_response(analysis: PromptAnalysis, layout: SceneLayout) -> str:
    """Render an analysis and layout in the two-line answer grammar."""
    tuples = ", ".join(
        f"('{entry.caption}', [{entry.box.x}, {entry.box.y}, {entry.box.w}, {entry.box.h}])"
        for entry in layout.entries
    )
    return f"Analysis: {analysis.category.value}.\nObjects: [{tuples}]"
