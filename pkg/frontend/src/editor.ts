/**
 * Layout editor model: pointer interactions accumulate into an ordered
 * edit list the server applies verbatim.
 *
 * The canvas may be CSS-scaled; every pointer coordinate is converted to
 * canonical canvas space (integer pixels) on ingestion, so the emitted
 * geometry is bit-exact regardless of display size.
 */

import type { Box, Edit, Layout, LayoutDiff, LayoutEntry } from "./types.js";

export const CORNER_HANDLE_PX = 12;
const MIN_DRAW_SIZE = 1;

export type GestureKind = "move" | "resize" | "draw" | "none";

interface ActiveGesture {
  kind: GestureKind;
  entryIndex: number;
  startX: number;
  startY: number;
  lastX: number;
  lastY: number;
  originalBox: Box | null;
}

export function applyEdit(layout: Layout, edit: Edit): Layout {
  const entries = layout.entries.slice();
  switch (edit.op) {
    case "add":
      entries.push({
        object_ref: null,
        instance_index: 0,
        caption: edit.caption,
        box: { ...edit.box },
      });
      break;
    case "remove":
      checkIndex(entries, edit.index);
      entries.splice(edit.index, 1);
      break;
    case "move": {
      checkIndex(entries, edit.index);
      const entry = entries[edit.index];
      entries[edit.index] = { ...entry, box: { ...entry.box, x: edit.x, y: edit.y } };
      break;
    }
    case "resize": {
      checkIndex(entries, edit.index);
      const entry = entries[edit.index];
      entries[edit.index] = { ...entry, box: { ...entry.box, w: edit.w, h: edit.h } };
      break;
    }
  }
  return { canvas: layout.canvas, entries };
}

function checkIndex(entries: LayoutEntry[], index: number): void {
  if (index < 0 || index >= entries.length) {
    throw new Error(`edit index ${index} out of range for ${entries.length} entries`);
  }
}

export class LayoutEditor {
  private working: Layout;
  private edits: Edit[] = [];
  private gesture: ActiveGesture | null = null;
  private drawCaption = "a new object";
  readonly cssScale: number;

  constructor(layout: Layout, cssScale = 1) {
    if (cssScale <= 0) throw new Error("cssScale must be positive");
    this.working = { canvas: layout.canvas, entries: layout.entries.map((e) => ({ ...e, box: { ...e.box } })) };
    this.cssScale = cssScale;
  }

  /** CSS pixel -> canonical canvas pixel (integer). */
  toCanvas(cssCoord: number): number {
    return Math.round(cssCoord / this.cssScale);
  }

  setDrawCaption(caption: string): void {
    this.drawCaption = caption;
  }

  boxes(): Box[] {
    return this.working.entries.map((e) => ({ ...e.box }));
  }

  layout(): Layout {
    return {
      canvas: this.working.canvas,
      entries: this.working.entries.map((e) => ({ ...e, box: { ...e.box } })),
    };
  }

  diff(): LayoutDiff {
    return { edits: this.edits.map((e) => ({ ...e })) };
  }

  /** Topmost entry containing the point, matching render order. */
  hitTest(x: number, y: number): number {
    for (let i = this.working.entries.length - 1; i >= 0; i--) {
      const box = this.working.entries[i].box;
      if (x >= box.x && x < box.x + box.w && y >= box.y && y < box.y + box.h) {
        return i;
      }
    }
    return -1;
  }

  private nearBottomRightCorner(x: number, y: number, box: Box): boolean {
    return (
      Math.abs(x - (box.x + box.w)) <= CORNER_HANDLE_PX &&
      Math.abs(y - (box.y + box.h)) <= CORNER_HANDLE_PX
    );
  }

  pointerDown(cssX: number, cssY: number): GestureKind {
    const x = this.toCanvas(cssX);
    const y = this.toCanvas(cssY);
    let kind: GestureKind = "draw";
    let entryIndex = -1;
    let originalBox: Box | null = null;

    // corner handles win over body hits so small boxes stay resizable
    for (let i = this.working.entries.length - 1; i >= 0; i--) {
      if (this.nearBottomRightCorner(x, y, this.working.entries[i].box)) {
        kind = "resize";
        entryIndex = i;
        originalBox = { ...this.working.entries[i].box };
        break;
      }
    }
    if (entryIndex < 0) {
      const hit = this.hitTest(x, y);
      if (hit >= 0) {
        kind = "move";
        entryIndex = hit;
        originalBox = { ...this.working.entries[hit].box };
      }
    }
    this.gesture = { kind, entryIndex, startX: x, startY: y, lastX: x, lastY: y, originalBox };
    return kind;
  }

  pointerMove(cssX: number, cssY: number): void {
    if (!this.gesture) return;
    this.gesture.lastX = this.toCanvas(cssX);
    this.gesture.lastY = this.toCanvas(cssY);
  }

  /** Commit the gesture as an edit; returns it (or null for a no-op). */
  pointerUp(): Edit | null {
    const gesture = this.gesture;
    this.gesture = null;
    if (!gesture) return null;
    const dx = gesture.lastX - gesture.startX;
    const dy = gesture.lastY - gesture.startY;

    if (gesture.kind === "move" && gesture.originalBox) {
      if (dx === 0 && dy === 0) return null;
      return this.commit({
        op: "move",
        index: gesture.entryIndex,
        x: gesture.originalBox.x + dx,
        y: gesture.originalBox.y + dy,
      });
    }
    if (gesture.kind === "resize" && gesture.originalBox) {
      if (dx === 0 && dy === 0) return null;
      return this.commit({
        op: "resize",
        index: gesture.entryIndex,
        w: Math.max(MIN_DRAW_SIZE, gesture.originalBox.w + dx),
        h: Math.max(MIN_DRAW_SIZE, gesture.originalBox.h + dy),
      });
    }
    if (gesture.kind === "draw") {
      const x = Math.min(gesture.startX, gesture.lastX);
      const y = Math.min(gesture.startY, gesture.lastY);
      const w = Math.abs(gesture.lastX - gesture.startX);
      const h = Math.abs(gesture.lastY - gesture.startY);
      if (w < MIN_DRAW_SIZE || h < MIN_DRAW_SIZE) return null;
      return this.commit({ op: "add", caption: this.drawCaption, box: { x, y, w, h } });
    }
    return null;
  }

  deleteEntry(index: number): Edit {
    return this.commit({ op: "remove", index });
  }

  private commit(edit: Edit): Edit {
    this.working = applyEdit(this.working, edit);
    this.edits.push(edit);
    return edit;
  }
}
