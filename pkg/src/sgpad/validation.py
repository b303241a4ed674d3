"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numpy as np

from .saliency import SaliencyMap


def check_image_batch(X, dims: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce to a (N, H, W) float array of grayscale images in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] == 0:
        raise ValueError(f"expected an (N, H, W) image batch, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("image batch contains non-finite values")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    if dims is not None and X.shape[1:] != tuple(dims):
        raise ValueError(f"expected images of dims {dims}, got {X.shape[1:]}")
    return X


def check_labels(y, n: int) -> np.ndarray:
    """Coerce to (N,) integer class labels in {0, 1} (0 bonafide, 1 spoof)."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 (bonafide) or 1 (spoof)")
    return y.astype(np.int64)


def check_saliency_batch(saliency, n: int, dims: tuple[int, int]):
    """Normalize per-sample saliency into a list of SaliencyMap-or-None of
    length n; map dims must be at least the image dims."""
    if saliency is None:
        return [None] * n
    if len(saliency) != n:
        raise ValueError(f"expected {n} saliency entries, got {len(saliency)}")
    out = []
    for i, m in enumerate(saliency):
        if m is None:
            out.append(None)
            continue
        if not isinstance(m, SaliencyMap):
            raise TypeError(f"saliency[{i}] must be a SaliencyMap or None, got {type(m)}")
        if m.shape[0] < dims[0] or m.shape[1] < dims[1]:
            raise ValueError(f"saliency[{i}] dims {m.shape} smaller than image dims {dims}")
        out.append(m)
    return out
