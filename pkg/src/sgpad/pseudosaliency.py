"""Algorithmic (pseudo) saliency generation.

Two of the three pseudosaliency types live here:

* minutiae-based: each minutia point is stamped as a circular region with
  a linear radial falloff (1 at the center, 0 at the stamp radius);
  overlapping stamps combine by per-pixel maximum,
* low-quality: an inverted quality-level grid masked by the inverted
  low-contrast grid, emphasizing poor-fidelity regions that lie on the
  fingerprint pattern.

The third type, autoencoder prediction, is in :mod:`sgpad.autoencoder`.
Minutiae extraction itself is out of scope; points are ingested from a
plain-text interchange file (one ``x,y[,angle[,quality]]`` record per
line). Quality and low-contrast grids are ingested from grayscale images.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .saliency import Granularity, SaliencyMap, SaliencySource


@dataclass(frozen=True)
class MinutiaPoint:
    """One extracted minutia. ``angle`` and ``quality`` are carried along
    for future use but do not modulate the stamp."""

    x: float
    y: float
    angle: float | None = None
    quality: float | None = None


@dataclass(frozen=True)
class QualityInputs:
    """Quality-level grid (0..l_max, higher is better) plus a binary
    low-contrast grid (1 marks background / low-contrast pixels)."""

    quality_levels: np.ndarray
    low_contrast: np.ndarray
    l_max: int

    def __post_init__(self):
        q = np.asarray(self.quality_levels)
        c = np.asarray(self.low_contrast)
        if q.ndim != 2 or q.size == 0:
            raise ValueError("quality_levels must be a non-empty 2-D grid")
        if q.shape != c.shape:
            raise ValueError(f"dimension mismatch: quality {q.shape} vs low-contrast {c.shape}")
        if self.l_max <= 0:
            raise ValueError("degenerate quality scale: l_max must be positive")
        if q.min() < 0 or q.max() > self.l_max:
            raise ValueError(f"quality levels must lie in 0..{self.l_max}")
        if not np.isin(c, (0, 1)).all():
            raise ValueError("low_contrast grid must be binary (0/1)")
        object.__setattr__(self, "quality_levels", q)
        object.__setattr__(self, "low_contrast", c)


def minutiae_saliency(
    points: list[MinutiaPoint], dims: tuple[int, int], radius: float = 10.0
) -> SaliencyMap:
    """Stamp minutiae as radial-falloff disks, combined by per-pixel max.

    ``dims`` is (height, width). Each stamp contributes
    ``max(0, 1 - d / radius)`` at Euclidean distance ``d`` from the
    minutia center. An empty point list yields the all-zero map.
    """
    height, width = dims
    if height <= 0 or width <= 0:
        raise ValueError(f"dims must be positive, got {dims}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    for i, p in enumerate(points):
        if not (0 <= p.x < width and 0 <= p.y < height):
            raise ValueError(
                f"minutia {i} at ({p.x}, {p.y}) is outside image bounds {width}x{height}"
            )
    out = np.zeros((height, width), dtype=np.float64)
    ceil_r = int(np.ceil(radius))
    ys = np.arange(height, dtype=np.float64)
    xs = np.arange(width, dtype=np.float64)
    for p in points:
        # Stamps are local; only the bounding window of the disk is touched.
        r0, r1 = max(0, int(np.floor(p.y)) - ceil_r), min(height, int(np.ceil(p.y)) + ceil_r + 1)
        c0, c1 = max(0, int(np.floor(p.x)) - ceil_r), min(width, int(np.ceil(p.x)) + ceil_r + 1)
        dy = ys[r0:r1, None] - p.y
        dx = xs[None, c0:c1] - p.x
        d = np.hypot(dy, dx)
        stamp = np.maximum(0.0, 1.0 - d / radius)
        np.maximum(out[r0:r1, c0:c1], stamp, out=out[r0:r1, c0:c1])
    return SaliencyMap(out, Granularity.FOI, SaliencySource.MINUTIAE)


def low_quality_saliency(q: QualityInputs) -> SaliencyMap:
    """Invert the quality grid and mask it with the inverted low-contrast grid.

    Output is ``(1 - level / l_max) * (1 - low_contrast)``: high where the
    pattern is poor quality, zero on background regardless of quality.
    """
    inv_quality = 1.0 - q.quality_levels.astype(np.float64) / q.l_max
    inv_contrast = 1.0 - q.low_contrast.astype(np.float64)
    return SaliencyMap(inv_quality * inv_contrast, Granularity.FOI, SaliencySource.LOW_QUALITY)


def parse_minutiae_file(path: str | Path) -> list[MinutiaPoint]:
    """Read the comma-separated minutiae interchange format.

    One record per line: ``x,y[,angle[,quality]]``. A single leading
    header line is tolerated and skipped if its first field is not
    numeric. Blank lines are ignored.
    """
    points: list[MinutiaPoint] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            try:
                x = float(row[0])
            except ValueError:
                if lineno == 1:
                    continue  # header line
                raise ValueError(f"{path}:{lineno}: non-numeric x field {row[0]!r}")
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: record needs at least x,y")
            try:
                y = float(row[1])
                angle = float(row[2]) if len(row) > 2 and row[2].strip() else None
                quality = float(row[3]) if len(row) > 3 and row[3].strip() else None
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}")
            points.append(MinutiaPoint(x, y, angle, quality))
    return points


def load_quality_inputs(
    quality_path: str | Path, low_contrast_path: str | Path, l_max: int
) -> QualityInputs:
    """Load quality levels (integer pixel values 0..l_max) and the 0/255
    binary low-contrast grid from grayscale image files."""
    with Image.open(quality_path) as img:
        levels = np.asarray(img.convert("L"), dtype=np.int64)
    with Image.open(low_contrast_path) as img:
        contrast = np.asarray(img.convert("L"), dtype=np.int64)
    if not np.isin(contrast, (0, 255)).all():
        raise ValueError(f"{low_contrast_path}: low-contrast image must be 0/255 binary")
    return QualityInputs(levels, (contrast // 255).astype(np.int64), l_max)
