// Stroke rasterization for the overlay preview: pixels within half the
// brush width of any stroke polyline. This mirrors the ingestion-side
// rasterizer's geometry (disks swept along segments, inclusive boundary)
// so what the annotator sees is what the pipeline stores.

import type { ImageDims, StrokeRecord } from "./types.js";

export function rasterizeStrokes(strokes: readonly StrokeRecord[], dims: ImageDims): Uint8Array {
  const { width, height } = dims;
  const mask = new Uint8Array(width * height);
  for (const stroke of strokes) {
    const radius = stroke.brush_width / 2;
    const pts = stroke.points;
    if (pts.length === 1) {
      paintSegment(mask, dims, pts[0]!, pts[0]!, radius);
    }
    for (let i = 0; i + 1 < pts.length; i++) {
      paintSegment(mask, dims, pts[i]!, pts[i + 1]!, radius);
    }
  }
  return mask;
}

function paintSegment(
  mask: Uint8Array,
  dims: ImageDims,
  p: [number, number],
  q: [number, number],
  radius: number,
): void {
  const reach = Math.ceil(radius);
  const c0 = Math.max(0, Math.floor(Math.min(p[0], q[0])) - reach);
  const c1 = Math.min(dims.width - 1, Math.ceil(Math.max(p[0], q[0])) + reach);
  const r0 = Math.max(0, Math.floor(Math.min(p[1], q[1])) - reach);
  const r1 = Math.min(dims.height - 1, Math.ceil(Math.max(p[1], q[1])) + reach);
  const dx = q[0] - p[0];
  const dy = q[1] - p[1];
  const len2 = dx * dx + dy * dy;
  for (let y = r0; y <= r1; y++) {
    for (let x = c0; x <= c1; x++) {
      let t = 0;
      if (len2 > 0) {
        t = Math.min(1, Math.max(0, ((x - p[0]) * dx + (y - p[1]) * dy) / len2));
      }
      const ex = x - (p[0] + t * dx);
      const ey = y - (p[1] + t * dy);
      if (Math.hypot(ex, ey) <= radius) {
        mask[y * dims.width + x] = 1;
      }
    }
  }
}

export function intersectionOverUnion(a: Uint8Array, b: Uint8Array): number {
  if (a.length !== b.length) {
    throw new Error(`mask length mismatch: ${a.length} vs ${b.length}`);
  }
  let inter = 0;
  let union = 0;
  for (let i = 0; i < a.length; i++) {
    const av = a[i]! !== 0;
    const bv = b[i]! !== 0;
    if (av && bv) inter++;
    if (av || bv) union++;
  }
  return union === 0 ? 1 : inter / union;
}
