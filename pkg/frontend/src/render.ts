/** Canvas drawing for the layout editor and the review panel. */

import type { Box, Layout, ValidationReport } from "./types.js";
import { CORNER_HANDLE_PX } from "./editor.js";

const BOX_COLORS = [
  "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
  "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324",
];

export function colorForIndex(index: number): string {
  return BOX_COLORS[index % BOX_COLORS.length];
}

export function drawLayout(
  ctx: CanvasRenderingContext2D,
  layout: Layout,
  report: ValidationReport,
  cssScale: number,
  selected: number | null = null,
): void {
  const [cw, ch] = layout.canvas;
  ctx.clearRect(0, 0, cw * cssScale, ch * cssScale);
  ctx.save();
  ctx.scale(cssScale, cssScale);

  const flagged = new Set<number>();
  for (const violation of report.violations) {
    flagged.add(violation.entry_index);
    if (violation.other_index !== undefined) flagged.add(violation.other_index);
  }

  layout.entries.forEach((entry, index) => {
    const box = entry.box;
    ctx.lineWidth = index === selected ? 3 : 2;
    ctx.strokeStyle = flagged.has(index) ? "#ff0000" : colorForIndex(index);
    ctx.strokeRect(box.x, box.y, box.w, box.h);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.globalAlpha = 0.12;
    ctx.fillRect(box.x, box.y, box.w, box.h);
    ctx.globalAlpha = 1.0;
    ctx.font = "13px sans-serif";
    ctx.fillText(entry.caption, box.x + 4, box.y + 15);
    // bottom-right resize handle
    ctx.fillRect(
      box.x + box.w - CORNER_HANDLE_PX / 2,
      box.y + box.h - CORNER_HANDLE_PX / 2,
      CORNER_HANDLE_PX,
      CORNER_HANDLE_PX,
    );
  });
  ctx.restore();
}

export function highlightRegion(ctx: CanvasRenderingContext2D, box: Box, cssScale: number): void {
  ctx.save();
  ctx.scale(cssScale, cssScale);
  ctx.lineWidth = 3;
  ctx.strokeStyle = "#ffd700";
  ctx.setLineDash([6, 4]);
  ctx.strokeRect(box.x, box.y, box.w, box.h);
  ctx.restore();
}
