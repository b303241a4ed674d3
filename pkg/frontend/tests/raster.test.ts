import { describe, expect, it } from "vitest";

import { intersectionOverUnion, rasterizeStrokes } from "../src/raster.js";
import type { StrokeRecord } from "../src/types.js";

function stroke(points: [number, number][], brushWidth = 4): StrokeRecord {
  return { points, brush_width: brushWidth, t_start_ms: 0, t_end_ms: 1 };
}

describe("overlay rasterization", () => {
  it("a single point paints a disk of the brush radius", () => {
    const dims = { width: 32, height: 32 };
    const mask = rasterizeStrokes([stroke([[16, 16]], 8)], dims);
    for (let y = 0; y < 32; y++) {
      for (let x = 0; x < 32; x++) {
        const inside = Math.hypot(x - 16, y - 16) <= 4;
        expect(mask[y * 32 + x]).toBe(inside ? 1 : 0);
      }
    }
  });

  it("a segment paints its swept disk, inclusive of the boundary", () => {
    const dims = { width: 48, height: 24 };
    const mask = rasterizeStrokes([stroke([[10, 12], [30, 12]], 6)], dims);
    expect(mask[12 * 48 + 20]).toBe(1); // centerline
    expect(mask[(12 + 3) * 48 + 20]).toBe(1); // exactly at radius
    expect(mask[(12 + 4) * 48 + 20]).toBe(0); // beyond
  });

  it("empty stroke list paints nothing", () => {
    const mask = rasterizeStrokes([], { width: 8, height: 8 });
    expect(mask.every((v) => v === 0)).toBe(true);
  });

  it("IoU helper agrees with hand counts", () => {
    const a = Uint8Array.from([1, 1, 0, 0]);
    const b = Uint8Array.from([1, 0, 1, 0]);
    expect(intersectionOverUnion(a, b)).toBeCloseTo(1 / 3, 12);
    expect(intersectionOverUnion(a, a)).toBe(1);
    expect(intersectionOverUnion(Uint8Array.of(0), Uint8Array.of(0))).toBe(1);
  });
});
