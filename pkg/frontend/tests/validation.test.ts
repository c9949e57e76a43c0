import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import type { Layout, ValidationReport } from "../src/types.js";
import { iou, validate } from "../src/validation.js";

interface ValidationFixture {
  name: string;
  layout: Layout;
  report: ValidationReport;
}

const fixtures: ValidationFixture[] = JSON.parse(
  readFileSync(new URL("../fixtures/validation_fixtures.json", import.meta.url), "utf-8"),
);

describe("client-side validation matches the server verdicts", () => {
  it("covers a meaningful fixture set", () => {
    expect(fixtures.length).toBeGreaterThanOrEqual(10);
    const kinds = new Set(
      fixtures.flatMap((f) => f.report.violations.map((v) => v.kind)),
    );
    expect(kinds).toEqual(new Set(["out_of_bounds", "non_positive_size", "overlap"]));
  });

  for (const fixture of fixtures) {
    it(`agrees on ${fixture.name}`, () => {
      expect(validate(fixture.layout)).toEqual(fixture.report);
    });
  }
});

describe("iou", () => {
  it("is exact on the half-overlap case", () => {
    expect(iou({ x: 0, y: 0, w: 100, h: 100 }, { x: 50, y: 0, w: 100, h: 100 })).toBeCloseTo(
      1 / 3,
      15,
    );
  });

  it("is symmetric and bounded", () => {
    const a = { x: 3, y: 9, w: 40, h: 25 };
    const b = { x: 20, y: 10, w: 30, h: 60 };
    expect(iou(a, b)).toBe(iou(b, a));
    expect(iou(a, a)).toBe(1);
    expect(iou(a, b)).toBeGreaterThanOrEqual(0);
    expect(iou(a, b)).toBeLessThanOrEqual(1);
  });
});
