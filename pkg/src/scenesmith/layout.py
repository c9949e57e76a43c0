"""Scene layouts: captioned bounding boxes on a fixed canvas.

Provides the layout value types, a deterministic constraint-satisfying
planner, validation, relation predicates, human-edit application, and
rasterization to a condition image.
"""

from __future__ import annotations

import math
import random
import re
import zlib
from dataclasses import dataclass, field, replace

from PIL import Image, ImageDraw

from .analysis import PromptAnalysis, Relation
from .errors import InvalidDiffIndex, LayoutInfeasible

DEFAULT_CANVAS = (512, 512)
TAU_OVERLAP = 0.1
EPS_CONTACT = 10
DELTA_NEAR = 40


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus size, integer pixels."""

    x: int
    y: int
    w: int
    h: int

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def center_x(self) -> float:
        return self.x + self.w / 2

    @property
    def center_y(self) -> float:
        return self.y + self.h / 2

    @property
    def area(self) -> int:
        return self.w * self.h

    def intersection_area(self, other: "BBox") -> int:
        iw = min(self.right, other.right) - max(self.x, other.x)
        ih = min(self.bottom, other.bottom) - max(self.y, other.y)
        return max(0, iw) * max(0, ih)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, data: dict) -> "BBox":
        return cls(int(data["x"]), int(data["y"]), int(data["w"]), int(data["h"]))


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union on pixel areas; symmetric, in [0, 1]."""
    inter = a.intersection_area(b)
    if inter == 0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class LayoutEntry:
    """One placed instance: which object it realizes, its caption and box."""

    object_ref: int | None
    instance_index: int
    caption: str
    box: BBox

    def to_dict(self) -> dict:
        return {
            "object_ref": self.object_ref,
            "instance_index": self.instance_index,
            "caption": self.caption,
            "box": self.box.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LayoutEntry":
        return cls(
            object_ref=data.get("object_ref"),
            instance_index=data.get("instance_index", 0),
            caption=data["caption"],
            box=BBox.from_dict(data["box"]),
        )


@dataclass
class SceneLayout:
    canvas: tuple[int, int] = DEFAULT_CANVAS
    entries: list[LayoutEntry] = field(default_factory=list)

    def entry_for_object(self, object_index: int) -> LayoutEntry | None:
        for entry in self.entries:
            if entry.object_ref == object_index:
                return entry
        return None

    def entries_for_object(self, object_index: int) -> list[LayoutEntry]:
        return [e for e in self.entries if e.object_ref == object_index]

    def to_dict(self) -> dict:
        return {
            "canvas": list(self.canvas),
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneLayout":
        return cls(
            canvas=tuple(data.get("canvas", DEFAULT_CANVAS)),
            entries=[LayoutEntry.from_dict(e) for e in data.get("entries", [])],
        )

    def to_text(self) -> str:
        """Layout file format: canvas line, then ``caption | instance | x y w h``."""
        lines = [f"canvas {self.canvas[0]} {self.canvas[1]}"]
        for entry in self.entries:
            box = entry.box
            lines.append(f"{entry.caption} | {entry.instance_index} | {box.x} {box.y} {box.w} {box.h}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SceneLayout":
        canvas = DEFAULT_CANVAS
        entries: list[LayoutEntry] = []
        caption_refs: dict[str, int] = {}
        for raw_line in text.splitlines():
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("canvas "):
                _, w, h = line.split()
                canvas = (int(w), int(h))
                continue
            parts = [p.strip() for p in line.split("|")]
            if len(parts) != 3:
                raise ValueError(f"bad layout line: {raw_line!r}")
            caption, instance_text, coords_text = parts
            coords = [int(c) for c in coords_text.split()]
            if len(coords) != 4:
                raise ValueError(f"expected 4 coordinates in {raw_line!r}")
            if caption not in caption_refs:
                caption_refs[caption] = len(caption_refs)
            entries.append(
                LayoutEntry(
                    object_ref=caption_refs[caption],
                    instance_index=int(instance_text),
                    caption=caption,
                    box=BBox(*coords),
                )
            )
        return cls(canvas=canvas, entries=entries)


# --- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # out_of_bounds | non_positive_size | overlap
    entry_index: int
    other_index: int | None = None
    iou: float | None = None

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind, "entry_index": self.entry_index}
        if self.other_index is not None:
            data["other_index"] = self.other_index
        if self.iou is not None:
            data["iou"] = self.iou
        return data


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"clean": self.clean, "violations": [v.to_dict() for v in self.violations]}


def validate(layout: SceneLayout, tau_overlap: float = TAU_OVERLAP) -> ValidationReport:
    """List every violation; an empty report means the layout is clean."""
    violations: list[Violation] = []
    cw, ch = layout.canvas
    for i, entry in enumerate(layout.entries):
        box = entry.box
        if box.w <= 0 or box.h <= 0:
            violations.append(Violation("non_positive_size", i))
            continue
        if box.x < 0 or box.y < 0 or box.right > cw or box.bottom > ch:
            violations.append(Violation("out_of_bounds", i))
    for i in range(len(layout.entries)):
        for j in range(i + 1, len(layout.entries)):
            pair_iou = iou(layout.entries[i].box, layout.entries[j].box)
            if pair_iou > tau_overlap:
                violations.append(Violation("overlap", i, other_index=j, iou=pair_iou))
    return ValidationReport(violations)


# --- relation predicates ---------------------------------------------------------


def relation_satisfied(
    layout: SceneLayout,
    relation: Relation,
    eps_contact: int = EPS_CONTACT,
    delta_near: int = DELTA_NEAR,
) -> bool:
    """Geometric check of a spatial relation between first instances.

    Non-spatial relations return True: geometry cannot decide them, they
    are the layout-to-image tool's job.
    """
    if not relation.is_spatial:
        return True
    subject = layout.entry_for_object(relation.subject_index)
    obj = layout.entry_for_object(relation.object_index)
    if subject is None or obj is None:
        raise ValueError(f"relation {relation.kind} indices do not resolve to layout entries")
    s, o = subject.box, obj.box
    if relation.kind == "left":
        return s.center_x < o.center_x
    if relation.kind == "right":
        return s.center_x > o.center_x
    if relation.kind == "above":
        return s.center_y < o.center_y
    if relation.kind == "below":
        return s.center_y > o.center_y
    if relation.kind == "on_top":
        horizontal_overlap = min(s.right, o.right) - max(s.x, o.x)
        in_top_region = (o.y - eps_contact) <= s.bottom <= (o.y + o.h / 2 + eps_contact)
        return horizontal_overlap > 0 and in_top_region
    if relation.kind == "next_to":
        if s.intersection_area(o) > 0:
            return False
        dx = max(0, max(s.x - o.right, o.x - s.right))
        dy = max(0, max(s.y - o.bottom, o.y - s.bottom))
        return math.hypot(dx, dy) <= delta_near
    raise ValueError(f"unknown spatial relation kind {relation.kind!r}")


# --- human edits -----------------------------------------------------------------


@dataclass(frozen=True)
class Add:
    caption: str
    box: BBox


@dataclass(frozen=True)
class Remove:
    index: int


@dataclass(frozen=True)
class Move:
    index: int
    x: int
    y: int


@dataclass(frozen=True)
class Resize:
    index: int
    w: int
    h: int


Edit = Add | Remove | Move | Resize


@dataclass
class LayoutDiff:
    """An ordered list of human edits, applied sequentially."""

    edits: list[Edit] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = []
        for edit in self.edits:
            if isinstance(edit, Add):
                out.append({"op": "add", "caption": edit.caption, "box": edit.box.to_dict()})
            elif isinstance(edit, Remove):
                out.append({"op": "remove", "index": edit.index})
            elif isinstance(edit, Move):
                out.append({"op": "move", "index": edit.index, "x": edit.x, "y": edit.y})
            else:
                out.append({"op": "resize", "index": edit.index, "w": edit.w, "h": edit.h})
        return {"edits": out}

    @classmethod
    def from_dict(cls, data: dict) -> "LayoutDiff":
        edits: list[Edit] = []
        for item in data.get("edits", []):
            op = item.get("op")
            if op == "add":
                edits.append(Add(item["caption"], BBox.from_dict(item["box"])))
            elif op == "remove":
                edits.append(Remove(int(item["index"])))
            elif op == "move":
                edits.append(Move(int(item["index"]), int(item["x"]), int(item["y"])))
            elif op == "resize":
                edits.append(Resize(int(item["index"]), int(item["w"]), int(item["h"])))
            else:
                raise ValueError(f"unknown edit op {op!r}")
        return cls(edits)


def apply_diff(layout: SceneLayout, diff: LayoutDiff) -> SceneLayout:
    """Apply edits in order, producing a new layout.

    Human edits are never clamped: people may intentionally create
    overlap or out-of-bounds boxes; validation reports, not rejects.
    """
    entries = list(layout.entries)
    for edit in diff.edits:
        if isinstance(edit, Add):
            entries.append(
                LayoutEntry(object_ref=None, instance_index=0, caption=edit.caption, box=edit.box)
            )
            continue
        if not (0 <= edit.index < len(entries)):
            raise InvalidDiffIndex(f"edit index {edit.index} out of range for {len(entries)} entries")
        entry = entries[edit.index]
        if isinstance(edit, Remove):
            entries.pop(edit.index)
        elif isinstance(edit, Move):
            entries[edit.index] = replace(entry, box=replace(entry.box, x=edit.x, y=edit.y))
        elif isinstance(edit, Resize):
            entries[edit.index] = replace(entry, box=replace(entry.box, w=edit.w, h=edit.h))
    return SceneLayout(canvas=layout.canvas, entries=entries)


# --- deterministic planner -------------------------------------------------------

SMALL_NOUNS = frozenset(
    {
        "apple", "bell", "cup", "mug", "book", "bowl", "vase", "bird", "phone",
        "ball", "candle", "clock", "hat", "shoe", "bottle", "glass", "belt",
        "wallet", "key", "pen", "remote", "plate", "banana", "orange", "mouse",
        "crown", "coaster",
    }
)
LARGE_NOUNS = frozenset(
    {
        "table", "car", "horse", "bed", "sofa", "couch", "tree", "house", "bus",
        "truck", "elephant", "cow", "rug", "bench", "desk", "bookshelf",
        "wardrobe", "refrigerator", "giraffe", "airplane", "boat", "train",
    }
)
_SIZE_FRACTIONS = {"small": (0.10, 0.20), "medium": (0.25, 0.45), "large": (0.45, 0.70)}


def size_class(noun: str) -> str:
    head = noun.split()[-1] if noun.split() else noun
    if head in SMALL_NOUNS:
        return "small"
    if head in LARGE_NOUNS:
        return "large"
    return "medium"


def plan_layout(
    analysis: PromptAnalysis,
    seed: int,
    canvas: tuple[int, int] = DEFAULT_CANVAS,
    tau_overlap: float = TAU_OVERLAP,
    eps_contact: int = EPS_CONTACT,
    delta_near: int = DELTA_NEAR,
) -> SceneLayout:
    """Deterministically place one box per counted instance.

    Boxes are sized from per-noun priors with seeded jitter, laid out
    left-to-right in object order, then adjusted to satisfy spatial
    relations.  If the result is not clean after the bounded relaxation
    schedule (three 10% shrinks), raises LayoutInfeasible.
    """
    if not analysis.objects:
        raise ValueError("plan_layout requires at least one object")
    cw, ch = canvas
    instances: list[tuple[int, int, str, str]] = []
    for oi, obj in enumerate(analysis.objects):
        for ii in range(obj.count):
            instances.append((oi, ii, obj.phrase, size_class(obj.noun)))
    n = len(instances)

    rng = random.Random(f"plan:{seed}:{analysis.raw_prompt}:{n}")
    jitters = [
        (rng.random(), rng.uniform(0.8, 1.25), rng.uniform(-0.08, 0.08)) for _ in range(n)
    ]

    first_instance = {}
    for idx, (oi, ii, _, _) in enumerate(instances):
        if oi not in first_instance:
            first_instance[oi] = idx

    spatial = [r for r in analysis.relations if r.is_spatial]
    before_pairs: list[tuple[int, int]] = []
    for rel in spatial:
        s, o = first_instance[rel.subject_index], first_instance[rel.object_index]
        if rel.kind == "left":
            before_pairs.append((s, o))
        elif rel.kind == "right":
            before_pairs.append((o, s))

    for attempt in range(4):
        scale = 0.9**attempt
        layout = _place_once(
            instances, jitters, before_pairs, spatial, first_instance,
            canvas, scale, tau_overlap, eps_contact, delta_near,
        )
        if layout is None:
            continue
        report = validate(layout, tau_overlap)
        relations_ok = all(
            relation_satisfied(layout, rel, eps_contact, delta_near) for rel in spatial
        )
        if report.clean and relations_ok:
            return layout
    raise LayoutInfeasible(
        f"could not satisfy layout constraints for {analysis.raw_prompt!r} after relaxation"
    )


def _order_with_constraints(n: int, before_pairs: list[tuple[int, int]]) -> list[int] | None:
    order = list(range(n))
    for _ in range(n * max(1, len(before_pairs)) + 1):
        changed = False
        for a, b in before_pairs:
            pa, pb = order.index(a), order.index(b)
            if pa > pb:
                order.pop(pa)
                order.insert(pb, a)
                changed = True
        if not changed:
            positions = {v: i for i, v in enumerate(order)}
            if all(positions[a] < positions[b] for a, b in before_pairs):
                return order
            return None
    return None


def _place_once(
    instances, jitters, before_pairs, spatial, first_instance,
    canvas, scale, tau_overlap, eps_contact, delta_near,
) -> SceneLayout | None:
    cw, ch = canvas
    n = len(instances)

    sizes: list[tuple[int, int]] = []
    for (oi, ii, phrase, cls), (u, aspect, _) in zip(instances, jitters):
        lo, hi = _SIZE_FRACTIONS[cls]
        side = min(cw, ch) * (lo + u * (hi - lo)) * scale
        w = max(8, int(round(side * math.sqrt(aspect))))
        h = max(8, int(round(side / math.sqrt(aspect))))
        sizes.append((w, h))

    total_w = sum(w for w, _ in sizes)
    if total_w > 0.85 * cw:
        factor = 0.85 * cw / total_w
        sizes = [(max(8, int(w * factor)), max(8, int(h * factor))) for w, h in sizes]
        total_w = sum(w for w, _ in sizes)

    order = _order_with_constraints(n, before_pairs)
    if order is None:
        return None

    gap = max(2, (cw - total_w) // (n + 1))
    xs = [0] * n
    ys = [0] * n
    cursor = gap
    for idx in order:
        w, h = sizes[idx]
        xs[idx] = cursor
        ys[idx] = int(ch / 2 + jitters[idx][2] * ch - h / 2)
        cursor += w + gap

    # vertical and contact relations override row placement
    for rel in spatial:
        s = first_instance[rel.subject_index]
        o = first_instance[rel.object_index]
        sw, sh = sizes[s]
        ow, oh = sizes[o]
        if rel.kind == "above" and ys[s] + sh / 2 >= ys[o] + oh / 2:
            ys[s] = int(ch * 0.28 - sh / 2)
            ys[o] = int(ch * 0.72 - oh / 2)
        elif rel.kind == "below" and ys[s] + sh / 2 <= ys[o] + oh / 2:
            ys[s] = int(ch * 0.72 - sh / 2)
            ys[o] = int(ch * 0.28 - oh / 2)
        elif rel.kind == "on_top":
            xs[s] = int(xs[o] + ow / 2 - sw / 2)
            ys[s] = ys[o] - sh
            if ys[s] < 0:
                shift = -ys[s]
                ys[s] += shift
                ys[o] += shift
        elif rel.kind == "next_to":
            left_x = xs[o] - sw - 8
            if left_x >= 0:
                xs[s] = left_x
            else:
                xs[s] = xs[o] + ow + 8
            ys[s] = int(ys[o] + oh / 2 - sh / 2)

    on_top_pairs = {
        frozenset((first_instance[r.subject_index], first_instance[r.object_index]))
        for r in spatial
        if r.kind == "on_top"
    }

    def clamp_all() -> None:
        for i in range(n):
            w, h = sizes[i]
            xs[i] = min(max(xs[i], 0), max(0, cw - w))
            ys[i] = min(max(ys[i], 0), max(0, ch - h))

    clamp_all()
    for _ in range(30):
        moved = False
        for i in range(n):
            for j in range(i + 1, n):
                if frozenset((i, j)) in on_top_pairs:
                    continue
                a = BBox(xs[i], ys[i], *sizes[i])
                b = BBox(xs[j], ys[j], *sizes[j])
                if iou(a, b) <= tau_overlap:
                    continue
                overlap_x = min(a.right, b.right) - max(a.x, b.x)
                overlap_y = min(a.bottom, b.bottom) - max(a.y, b.y)
                # push apart along the axis with the smaller intrusion
                if overlap_x <= overlap_y:
                    if b.x >= a.x and b.right + overlap_x + 2 <= cw + overlap_x:
                        xs[j] = min(cw - sizes[j][0], b.x + overlap_x + 2)
                    else:
                        xs[i] = max(0, a.x - overlap_x - 2)
                else:
                    if b.y >= a.y:
                        ys[j] = min(ch - sizes[j][1], b.y + overlap_y + 2)
                    else:
                        ys[i] = max(0, a.y - overlap_y - 2)
                moved = True
        clamp_all()
        if not moved:
            break

    entries = [
        LayoutEntry(object_ref=oi, instance_index=ii, caption=phrase, box=BBox(xs[k], ys[k], *sizes[k]))
        for k, (oi, ii, phrase, _) in enumerate(instances)
    ]
    return SceneLayout(canvas=canvas, entries=entries)


# --- rasterization ---------------------------------------------------------------

# Fixed 20-color palette for condition images; index chosen by caption-noun hash.
CONDITION_PALETTE: list[tuple[int, int, int]] = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (255, 250, 200), (128, 0, 0),
    (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
]

_ARTICLE_RE = re.compile(r"^(a|an|the)\s+", re.IGNORECASE)


def caption_noun(caption: str) -> str:
    """Normalize a caption to its head noun for hashing and label matching."""
    from .analysis import parse_noun_phrase
    from .errors import UnparseablePrompt

    try:
        return parse_noun_phrase(caption).noun
    except UnparseablePrompt:
        return _ARTICLE_RE.sub("", caption.strip().lower())


def palette_color(caption: str, entry_index: int, palette_mode: str = "noun") -> tuple[int, int, int]:
    if palette_mode == "index":
        return CONDITION_PALETTE[entry_index % len(CONDITION_PALETTE)]
    if palette_mode == "noun":
        noun = caption_noun(caption)
        return CONDITION_PALETTE[zlib.crc32(noun.encode("utf-8")) % len(CONDITION_PALETTE)]
    raise ValueError(f"unknown palette mode {palette_mode!r}")


def rasterize(layout: SceneLayout, palette_mode: str = "noun") -> Image.Image:
    """Render the condition image: black background, one filled rectangle
    per entry in a deterministic per-caption color; later entries draw over
    earlier ones."""
    image = Image.new("RGB", layout.canvas, (0, 0, 0))
    draw = ImageDraw.Draw(image)
    for index, entry in enumerate(layout.entries):
        box = entry.box
        if box.w <= 0 or box.h <= 0:
            continue
        color = palette_color(entry.caption, index, palette_mode)
        draw.rectangle([box.x, box.y, box.right - 1, box.bottom - 1], fill=color)
    return image
