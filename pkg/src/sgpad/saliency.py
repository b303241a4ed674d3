"""Saliency map representation and granularity transforms.

A saliency map is a per-pixel importance field in [0, 1] attached to a
fingerprint sample. Maps exist at three granularities:

* FOI: continuous-valued field (the raw form),
* AOI: binarized FOI,
* BOI: filled minimal axis-aligned rectangle enclosing the AOI.

Maps carry a source tag describing how they were produced (human
annotation, minutiae stamps, quality masking, autoencoder prediction, or
synthetic test data). All operations here are pure functions on immutable
inputs and are safe to call concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image


class Granularity(str, Enum):
    FOI = "FOI"
    AOI = "AOI"
    BOI = "BOI"


class SaliencySource(str, Enum):
    HUMAN = "human"
    MINUTIAE = "minutiae"
    LOW_QUALITY = "low_quality"
    AUTOENCODER = "autoencoder"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel importance field in [0, 1] with a granularity tag.

    ``values`` is a read-only (height, width) float array. AOI and BOI
    maps are binary; BOI maps are additionally a single filled rectangle
    (possibly empty).
    """

    values: np.ndarray
    granularity: Granularity
    source: SaliencySource

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"saliency values must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("saliency values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"saliency values must lie in [0, 1], got range [{arr.min()}, {arr.max()}]"
            )
        if self.granularity in (Granularity.AOI, Granularity.BOI):
            if not _is_binary(arr):
                raise ValueError(f"{self.granularity.value} maps must be binary (0/1 values only)")
        if self.granularity is Granularity.BOI:
            _check_filled_rectangle(arr)
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _is_binary(arr: np.ndarray) -> bool:
    return bool(np.isin(arr, (0.0, 1.0)).all())


def _check_filled_rectangle(arr: np.ndarray) -> None:
    rows, cols = np.nonzero(arr)
    if rows.size == 0:
        return
    r0, r1 = rows.min(), rows.max()
    c0, c1 = cols.min(), cols.max()
    if not (arr[r0 : r1 + 1, c0 : c1 + 1] == 1.0).all():
        raise ValueError("BOI 1-pixels must form a filled axis-aligned rectangle")


def fuse_annotations(maps: list[SaliencyMap]) -> SaliencyMap:
    """Fuse independent annotator FOI maps by per-pixel arithmetic mean."""
    if not maps:
        raise ValueError("cannot fuse an empty list of saliency maps")
    for i, m in enumerate(maps):
        if m.granularity is not Granularity.FOI:
            raise ValueError(f"fusion requires FOI maps, map {i} is {m.granularity.value}")
        if m.shape != maps[0].shape:
            raise ValueError(
                f"dimension mismatch: map 0 is {maps[0].shape}, map {i} is {m.shape}"
            )
    fused = np.mean(np.stack([m.values for m in maps]), axis=0)
    # Means of values in [0, 1] can exceed 1 by a rounding ulp; clip defensively.
    fused = np.clip(fused, 0.0, 1.0)
    return SaliencyMap(fused, Granularity.FOI, maps[0].source)


def to_aoi(foi: SaliencyMap, threshold: float) -> SaliencyMap:
    """Binarize an FOI map: 1 where value > threshold, else 0.

    The comparison is strict, so exactly-threshold values map to 0 and the
    all-zero map is a fixed point for any threshold >= 0.
    """
    if foi.granularity is not Granularity.FOI:
        raise ValueError(f"to_aoi requires an FOI map, got {foi.granularity.value}")
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    binary = (foi.values > threshold).astype(np.float64)
    return SaliencyMap(binary, Granularity.AOI, foi.source)


def to_boi(aoi: SaliencyMap) -> SaliencyMap:
    """Fill the minimal axis-aligned rectangle enclosing the AOI 1-pixels.

    An empty AOI yields an empty BOI (the minimal enclosure of nothing is
    nothing, not the full frame).
    """
    if aoi.granularity is not Granularity.AOI:
        raise ValueError(f"to_boi requires an AOI map, got {aoi.granularity.value}")
    out = np.zeros_like(aoi.values)
    rows, cols = np.nonzero(aoi.values)
    if rows.size:
        out[rows.min() : rows.max() + 1, cols.min() : cols.max() + 1] = 1.0
    return SaliencyMap(out, Granularity.BOI, aoi.source)


def minmax_normalize(grid: np.ndarray) -> np.ndarray:
    """Min-max normalize a real grid to [0, 1]; constant grids map to all-zero."""
    arr = np.asarray(grid, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty grid")
    lo, hi = arr.min(), arr.max()
    if hi > lo:
        return (arr - lo) / (hi - lo)
    return np.zeros_like(arr)


def default_aoi_threshold(source: SaliencySource) -> float:
    """AOI binarization threshold per source: 0.5 for autoencoder output
    (suppresses reconstruction artifacts), 0.0 otherwise (any mass counts)."""
    return 0.5 if source is SaliencySource.AUTOENCODER else 0.0


def at_granularity(m: SaliencyMap, granularity: Granularity) -> SaliencyMap:
    """Derive the requested granularity from an FOI map via the AOI/BOI chain."""
    if granularity is Granularity.FOI:
        return m
    aoi = to_aoi(m, default_aoi_threshold(m.source))
    if granularity is Granularity.AOI:
        return aoi
    return to_boi(aoi)


def save_saliency(m: SaliencyMap, path: str | Path) -> None:
    """Persist a map as an 8-bit single-channel grayscale image, v -> round(v*255)."""
    data = np.rint(m.values * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def load_saliency(
    path: str | Path,
    granularity: Granularity = Granularity.FOI,
    source: SaliencySource = SaliencySource.HUMAN,
) -> SaliencyMap:
    """Load a map stored by :func:`save_saliency`; stored byte b becomes b/255."""
    with Image.open(path) as img:
        data = np.asarray(img.convert("L"), dtype=np.float64)
    return SaliencyMap(data / 255.0, granularity, source)
