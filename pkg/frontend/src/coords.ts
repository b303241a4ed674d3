// Screen-to-image coordinate mapping. The image is drawn at an offset and
// scale inside the canvas; stored stroke coordinates are always image
// pixels, whatever the display zoom.

import type { ImageDims, Point } from "./types.js";

export interface ViewTransform {
  zoom: number; // screen pixels per image pixel
  offsetX: number; // screen x of image pixel (0, 0)
  offsetY: number;
}

export const IDENTITY: ViewTransform = { zoom: 1, offsetX: 0, offsetY: 0 };

export function screenToImage(p: Point, t: ViewTransform): Point {
  if (t.zoom <= 0) {
    throw new Error(`zoom must be positive, got ${t.zoom}`);
  }
  return { x: (p.x - t.offsetX) / t.zoom, y: (p.y - t.offsetY) / t.zoom };
}

export function imageToScreen(p: Point, t: ViewTransform): Point {
  return { x: p.x * t.zoom + t.offsetX, y: p.y * t.zoom + t.offsetY };
}

// Points outside the image are clipped to its bounds (the stored
// coordinate domain is 0 <= x < width, 0 <= y < height).
export function clipToBounds(p: Point, dims: ImageDims): Point {
  return {
    x: Math.min(Math.max(p.x, 0), dims.width - 1),
    y: Math.min(Math.max(p.y, 0), dims.height - 1),
  };
}
