"""Transformation-based saliency guidance: blur what is not salient.

Each training image is rendered at several blur radii with the salient
region preserved, expanding the corpus eightfold under the default radius
set. A ninefold control (originals plus fully blurred copies at the same
radii) isolates the effect of keeping salient regions sharp from generic
blur augmentation.

Blur with "radius r" means a Gaussian kernel with sigma = r / 2 truncated
at 3 sigma, reflect padding (no dark vignettes at image edges). Images are
float grids in [0, 1]; per-image transforms are pure, so corpus expansion
parallelizes per (sample, radius) pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .saliency import SaliencyMap

DEFAULT_RADII = (2, 4, 6, 8, 10, 12, 14, 16)
DEFAULT_MASK_SMOOTHING_RADIUS = 5


@dataclass(frozen=True)
class BlurConfig:
    radii: tuple[float, ...] = DEFAULT_RADII
    mask_smoothing_radius: float = DEFAULT_MASK_SMOOTHING_RADIUS

    def __post_init__(self):
        if not self.radii:
            raise ValueError("radii must be non-empty")
        if any(r <= 0 for r in self.radii):
            raise ValueError(f"blur radii must be positive, got {self.radii}")
        if self.mask_smoothing_radius < 0:
            raise ValueError("mask smoothing radius must be >= 0")


@dataclass(frozen=True)
class ExpandedImage:
    """One expansion output: ``radius`` is None for pass-through originals."""

    sample_id: str
    radius: float | None
    image: np.ndarray = field(repr=False)


def gaussian_blur(image: np.ndarray, radius: float) -> np.ndarray:
    """Radius-parameterized Gaussian blur: sigma = radius / 2, 3-sigma
    truncation, reflect boundary."""
    if radius <= 0:
        raise ValueError(f"blur radius must be positive, got {radius}")
    return gaussian_filter(np.asarray(image, dtype=np.float64), sigma=radius / 2.0,
                           mode="reflect", truncate=3.0)


def smooth_mask(saliency_values: np.ndarray, smoothing_radius: float) -> np.ndarray:
    """Soften mask edges before blending, clamped back to [0, 1].

    Constant masks pass through untouched (a Gaussian filter of a constant
    is that constant under reflect padding), which keeps all-one and
    all-zero masks exact.
    """
    values = np.asarray(saliency_values, dtype=np.float64)
    if smoothing_radius == 0 or values.min() == values.max():
        return values
    return np.clip(gaussian_filter(values, sigma=smoothing_radius / 2.0,
                                   mode="reflect", truncate=3.0), 0.0, 1.0)


def blur_nonsalient(
    image: np.ndarray,
    saliency: SaliencyMap,
    radius: float,
    config: BlurConfig = BlurConfig(),
) -> np.ndarray:
    """Blend the image with its blurred copy, weighted by the smoothed mask:
    ``m * image + (1 - m) * blurred``."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != saliency.shape:
        raise ValueError(
            f"dimension mismatch: image {image.shape} vs saliency {saliency.shape}"
        )
    m = smooth_mask(saliency.values, config.mask_smoothing_radius)
    blurred = gaussian_blur(image, radius)
    return m * image + (1.0 - m) * blurred


def expand_saliency_guided(
    samples: list[tuple[str, np.ndarray, SaliencyMap | None]],
    config: BlurConfig = BlurConfig(),
) -> list[ExpandedImage]:
    """Render every sample at every radius with salient regions preserved.

    Output count is ``len(samples) * len(config.radii)`` (eightfold under
    the default radius set).
    """
    for sample_id, _, saliency in samples:
        if saliency is None:
            raise ValueError(f"sample {sample_id!r} has no saliency map")
    return [
        ExpandedImage(sample_id, radius, blur_nonsalient(image, saliency, radius, config))
        for sample_id, image, saliency in samples
        for radius in config.radii
    ]


def expand_control(
    samples: list[tuple[str, np.ndarray]],
    config: BlurConfig = BlurConfig(),
) -> list[ExpandedImage]:
    """Control expansion: each original untouched plus a fully blurred copy
    per radius (ninefold under the default radius set)."""
    out: list[ExpandedImage] = []
    for sample_id, image in samples:
        out.append(ExpandedImage(sample_id, None, np.asarray(image, dtype=np.float64)))
        out.extend(
            ExpandedImage(sample_id, radius, gaussian_blur(image, radius))
            for radius in config.radii
        )
    return out
