#!/usr/bin/env python3
"""Generate the golden fixtures shared by the UI and the server.

validation_fixtures.json: layouts with the server's validation verdicts;
the client-side validator must reproduce them exactly.

roundtrip_fixtures.json: editor gesture scripts with the diff the editor
must emit and the boxes both sides must end up with (server applies the
diff through its own edit machinery).

Run from the repo root with the engine installed:
    python3 frontend/make_fixtures.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from scenesmith.layout import (
    Add,
    BBox,
    LayoutDiff,
    LayoutEntry,
    Move,
    Remove,
    Resize,
    SceneLayout,
    apply_diff,
    validate,
)

FIXTURE_DIR = Path(__file__).parent / "fixtures"
CORNER_HANDLE_PX = 12
CSS_SCALES = [1.0, 0.75, 0.5, 1.25, 1.5]
CAPTIONS = ["a blue horse", "a brown vase", "a wooden table", "a glass cup", "a red book", "a plate"]


def validation_fixtures() -> list[dict]:
    cases = {
        "appendix_clean": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a blue horse", BBox(50, 70, 220, 300)),
                LayoutEntry(1, 0, "a brown vase", BBox(300, 113, 150, 250)),
            ]
        ),
        "out_of_bounds": SceneLayout(
            entries=[LayoutEntry(0, 0, "a cat", BBox(0, 0, 600, 100))]
        ),
        "negative_position": SceneLayout(
            entries=[LayoutEntry(0, 0, "a cat", BBox(-5, 10, 50, 50))]
        ),
        "non_positive_size": SceneLayout(
            entries=[LayoutEntry(0, 0, "a cat", BBox(10, 10, 0, 50))]
        ),
        "identical_overlap": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a cat", BBox(10, 10, 50, 50)),
                LayoutEntry(1, 0, "a dog", BBox(10, 10, 50, 50)),
            ]
        ),
        "partial_overlap_above_tau": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a cat", BBox(0, 0, 100, 100)),
                LayoutEntry(1, 0, "a dog", BBox(50, 0, 100, 100)),
            ]
        ),
        "touching_not_overlap": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a cat", BBox(0, 0, 100, 100)),
                LayoutEntry(1, 0, "a dog", BBox(100, 0, 100, 100)),
            ]
        ),
        "small_overlap_below_tau": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a cat", BBox(0, 0, 100, 100)),
                LayoutEntry(1, 0, "a dog", BBox(95, 0, 100, 100)),
            ]
        ),
        "mixed_violations": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a cat", BBox(490, 490, 100, 100)),
                LayoutEntry(1, 0, "a dog", BBox(10, 10, 80, 80)),
                LayoutEntry(2, 0, "a bird", BBox(20, 20, 80, 80)),
            ]
        ),
        "three_way_overlap": SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a cat", BBox(0, 0, 120, 120)),
                LayoutEntry(1, 0, "a dog", BBox(40, 0, 120, 120)),
                LayoutEntry(2, 0, "a bird", BBox(80, 0, 120, 120)),
            ]
        ),
        "empty": SceneLayout(entries=[]),
        "single_full_canvas": SceneLayout(
            entries=[LayoutEntry(0, 0, "a rug", BBox(0, 0, 512, 512))]
        ),
    }
    return [
        {"name": name, "layout": layout.to_dict(), "report": validate(layout).to_dict()}
        for name, layout in cases.items()
    ]


def _corner_conflict(point: tuple[int, int], entries: list[LayoutEntry]) -> bool:
    px, py = point
    return any(
        abs(px - (e.box.x + e.box.w)) <= CORNER_HANDLE_PX
        and abs(py - (e.box.y + e.box.h)) <= CORNER_HANDLE_PX
        for e in entries
    )


def _topmost_hit(point: tuple[int, int], entries: list[LayoutEntry]) -> int:
    px, py = point
    for i in range(len(entries) - 1, -1, -1):
        box = entries[i].box
        if box.x <= px < box.x + box.w and box.y <= py < box.y + box.h:
            return i
    return -1


def _in_any_box(point: tuple[int, int], entries: list[LayoutEntry], margin: int = 0) -> bool:
    px, py = point
    return any(
        e.box.x - margin <= px < e.box.x + e.box.w + margin
        and e.box.y - margin <= py < e.box.y + e.box.h + margin
        for e in entries
    )


def _disjoint_layout(rng: random.Random, count: int) -> SceneLayout:
    cells = [(col, row) for col in range(3) for row in range(3)]
    rng.shuffle(cells)
    entries = []
    for index in range(count):
        col, row = cells[index]
        w = rng.randint(60, 110)
        h = rng.randint(60, 110)
        x = col * 170 + rng.randint(4, 150 - w // 2)
        y = row * 170 + rng.randint(4, 150 - h // 2)
        entries.append(LayoutEntry(index, 0, CAPTIONS[index % len(CAPTIONS)], BBox(x, y, w, h)))
    return SceneLayout(canvas=(512, 512), entries=entries)


def roundtrip_fixtures(count: int = 20) -> list[dict]:
    rng = random.Random(777)
    fixtures = []
    attempts = 0
    while len(fixtures) < count and attempts < 2000:
        attempts += 1
        initial = _disjoint_layout(rng, rng.randint(2, 4))
        working = initial
        gestures: list[dict] = []
        edits = []
        ok = True
        for _ in range(rng.randint(1, 4)):
            entries = working.entries
            kind = rng.choice(["move", "resize", "add", "delete"]) if entries else "add"
            if kind == "move":
                index = rng.randrange(len(entries))
                box = entries[index].box
                center = (box.x + box.w // 2, box.y + box.h // 2)
                if _corner_conflict(center, entries) or _topmost_hit(center, entries) != index:
                    ok = False
                    break
                dx = rng.randint(-40, 40)
                dy = rng.randint(-40, 40)
                gestures.append({"type": "move", "index": index, "dx": dx, "dy": dy})
                edits.append(Move(index, box.x + dx, box.y + dy))
            elif kind == "resize":
                index = rng.randrange(len(entries))
                box = entries[index].box
                corner = (box.x + box.w, box.y + box.h)
                conflict = any(
                    i != index
                    and abs(corner[0] - (e.box.x + e.box.w)) <= CORNER_HANDLE_PX
                    and abs(corner[1] - (e.box.y + e.box.h)) <= CORNER_HANDLE_PX
                    for i, e in enumerate(entries)
                    # entries scanned top-down: a later entry's handle wins
                    if i > index
                )
                if conflict:
                    ok = False
                    break
                dw = rng.randint(-20, 30)
                dh = rng.randint(-20, 30)
                if dw == 0 and dh == 0:
                    dw = 5
                gestures.append({"type": "resize", "index": index, "dw": dw, "dh": dh})
                edits.append(Resize(index, max(1, box.w + dw), max(1, box.h + dh)))
            elif kind == "add":
                caption = rng.choice(CAPTIONS)
                placed = False
                for _ in range(50):
                    x1 = rng.randint(0, 440)
                    y1 = rng.randint(0, 440)
                    if _in_any_box((x1, y1), entries, margin=CORNER_HANDLE_PX + 2):
                        continue
                    w = rng.randint(20, 60)
                    h = rng.randint(20, 60)
                    x2, y2 = x1 + w, y1 + h
                    placed = True
                    break
                if not placed:
                    ok = False
                    break
                gestures.append(
                    {"type": "add", "caption": caption, "x1": x1, "y1": y1, "x2": x2, "y2": y2}
                )
                edits.append(Add(caption, BBox(x1, y1, w, h)))
            else:
                index = rng.randrange(len(entries))
                gestures.append({"type": "delete", "index": index})
                edits.append(Remove(index))
            working = apply_diff(working, LayoutDiff([edits[-1]]))
        if not ok or not gestures:
            continue
        diff = LayoutDiff(edits)
        final = apply_diff(initial, diff)
        fixtures.append(
            {
                "name": f"case_{len(fixtures):02d}",
                "css_scale": CSS_SCALES[len(fixtures) % len(CSS_SCALES)],
                "initial_layout": initial.to_dict(),
                "gestures": gestures,
                "expected_diff": diff.to_dict(),
                "expected_boxes": [e.box.to_dict() for e in final.entries],
            }
        )
    if len(fixtures) < count:
        raise RuntimeError(f"only generated {len(fixtures)} fixtures")
    return fixtures


def main() -> None:
    FIXTURE_DIR.mkdir(exist_ok=True)
    (FIXTURE_DIR / "validation_fixtures.json").write_text(
        json.dumps(validation_fixtures(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (FIXTURE_DIR / "roundtrip_fixtures.json").write_text(
        json.dumps(roundtrip_fixtures(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"fixtures written to {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
