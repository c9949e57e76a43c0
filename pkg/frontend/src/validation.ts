/**
 * Client-side layout validation, kept rule-for-rule identical to the
 * server (same thresholds, same violation ordering) so badges shown while
 * editing match what the server would report on submission.
 */

import type { Box, Layout, ValidationReport, Violation } from "./types.js";

export const TAU_OVERLAP = 0.1;

export function intersectionArea(a: Box, b: Box): number {
  const iw = Math.min(a.x + a.w, b.x + b.w) - Math.max(a.x, b.x);
  const ih = Math.min(a.y + a.h, b.y + b.h) - Math.max(a.y, b.y);
  return Math.max(0, iw) * Math.max(0, ih);
}

export function iou(a: Box, b: Box): number {
  const inter = intersectionArea(a, b);
  if (inter === 0) return 0;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

export function validate(layout: Layout, tauOverlap: number = TAU_OVERLAP): ValidationReport {
  const violations: Violation[] = [];
  const [cw, ch] = layout.canvas;
  layout.entries.forEach((entry, i) => {
    const box = entry.box;
    if (box.w <= 0 || box.h <= 0) {
      violations.push({ kind: "non_positive_size", entry_index: i });
      return;
    }
    if (box.x < 0 || box.y < 0 || box.x + box.w > cw || box.y + box.h > ch) {
      violations.push({ kind: "out_of_bounds", entry_index: i });
    }
  });
  for (let i = 0; i < layout.entries.length; i++) {
    for (let j = i + 1; j < layout.entries.length; j++) {
      const pairIou = iou(layout.entries[i].box, layout.entries[j].box);
      if (pairIou > tauOverlap) {
        violations.push({ kind: "overlap", entry_index: i, other_index: j, iou: pairIou });
      }
    }
  }
  return { clean: violations.length === 0, violations };
}
