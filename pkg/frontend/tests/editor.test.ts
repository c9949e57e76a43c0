import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { LayoutEditor } from "../src/editor.js";
import type { Box, Layout, LayoutDiff } from "../src/types.js";

interface Gesture {
  type: "move" | "resize" | "add" | "delete";
  index?: number;
  dx?: number;
  dy?: number;
  dw?: number;
  dh?: number;
  caption?: string;
  x1?: number;
  y1?: number;
  x2?: number;
  y2?: number;
}

interface RoundtripFixture {
  name: string;
  css_scale: number;
  initial_layout: Layout;
  gestures: Gesture[];
  expected_diff: LayoutDiff;
  expected_boxes: Box[];
}

const fixtures: RoundtripFixture[] = JSON.parse(
  readFileSync(new URL("../fixtures/roundtrip_fixtures.json", import.meta.url), "utf-8"),
);

function playGesture(editor: LayoutEditor, gesture: Gesture, scale: number): void {
  if (gesture.type === "delete") {
    editor.deleteEntry(gesture.index!);
    return;
  }
  if (gesture.type === "move") {
    const box = editor.boxes()[gesture.index!];
    const cx = box.x + Math.floor(box.w / 2);
    const cy = box.y + Math.floor(box.h / 2);
    expect(editor.pointerDown(cx * scale, cy * scale)).toBe("move");
    editor.pointerMove((cx + gesture.dx!) * scale, (cy + gesture.dy!) * scale);
    editor.pointerUp();
    return;
  }
  if (gesture.type === "resize") {
    const box = editor.boxes()[gesture.index!];
    const hx = box.x + box.w;
    const hy = box.y + box.h;
    expect(editor.pointerDown(hx * scale, hy * scale)).toBe("resize");
    editor.pointerMove((hx + gesture.dw!) * scale, (hy + gesture.dh!) * scale);
    editor.pointerUp();
    return;
  }
  editor.setDrawCaption(gesture.caption!);
  expect(editor.pointerDown(gesture.x1! * scale, gesture.y1! * scale)).toBe("draw");
  editor.pointerMove(gesture.x2! * scale, gesture.y2! * scale);
  editor.pointerUp();
}

describe("editor gesture scripts reproduce the golden diffs and boxes", () => {
  it("has the full 20-case suite", () => {
    expect(fixtures.length).toBe(20);
  });

  for (const fixture of fixtures) {
    it(`round-trips ${fixture.name} at scale ${fixture.css_scale}`, () => {
      const editor = new LayoutEditor(fixture.initial_layout, fixture.css_scale);
      for (const gesture of fixture.gestures) {
        playGesture(editor, gesture, fixture.css_scale);
      }
      expect(editor.diff()).toEqual(fixture.expected_diff);
      expect(editor.boxes()).toEqual(fixture.expected_boxes);
    });
  }
});

describe("editor mechanics", () => {
  const layout: Layout = {
    canvas: [512, 512],
    entries: [
      { object_ref: 0, instance_index: 0, caption: "a blue horse", box: { x: 50, y: 70, w: 220, h: 300 } },
      { object_ref: 1, instance_index: 0, caption: "a brown vase", box: { x: 300, y: 113, w: 150, h: 250 } },
    ],
  };

  it("drag emits a move with the new position", () => {
    const editor = new LayoutEditor(layout, 1);
    editor.pointerDown(150, 200);
    editor.pointerMove(170, 200); // 20 px right
    const edit = editor.pointerUp();
    expect(edit).toEqual({ op: "move", index: 0, x: 70, y: 70 });
  });

  it("delete then re-add keeps both edits in order", () => {
    const editor = new LayoutEditor(layout, 1);
    editor.deleteEntry(1);
    editor.setDrawCaption("a brown vase");
    editor.pointerDown(480, 10);
    editor.pointerMove(500, 40);
    editor.pointerUp();
    expect(editor.diff().edits.map((e) => e.op)).toEqual(["remove", "add"]);
    expect(editor.boxes().length).toBe(2);
  });

  it("zero-pixel drag is a no-op", () => {
    const editor = new LayoutEditor(layout, 1);
    editor.pointerDown(150, 200);
    editor.pointerMove(150, 200);
    expect(editor.pointerUp()).toBeNull();
    expect(editor.diff().edits).toEqual([]);
  });

  it("corner handle wins over box body", () => {
    const editor = new LayoutEditor(layout, 1);
    expect(editor.pointerDown(270, 370)).toBe("resize"); // exactly on (x+w, y+h) of entry 0
  });

  it("coordinates are integers in canonical space at fractional scales", () => {
    const editor = new LayoutEditor(layout, 0.75);
    editor.pointerDown(150 * 0.75, 200 * 0.75);
    editor.pointerMove(171 * 0.75, 222 * 0.75);
    const edit = editor.pointerUp();
    expect(edit).toEqual({ op: "move", index: 0, x: 71, y: 92 });
  });

  it("resize clamps to a minimum size", () => {
    const editor = new LayoutEditor(layout, 1);
    editor.pointerDown(270, 370);
    editor.pointerMove(0, 0);
    const edit = editor.pointerUp();
    expect(edit).toEqual({ op: "resize", index: 0, w: 1, h: 1 });
  });
});
