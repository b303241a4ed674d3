"""Class activation mapping and the two-component saliency-alignment loss.

The training loss blends a stabilized cross-entropy classification term
with a CAM-alignment term::

    total = alpha * classification + (1 - alpha) * alignment

At ``alpha == 1`` it reduces exactly to cross-entropy; at ``alpha == 0``
it penalizes only the disagreement between the model's class evidence map
and the external saliency. Everything here is a pure function of torch
tensors and differentiable with respect to logits and feature maps.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .saliency import SaliencyMap


@dataclass(frozen=True)
class CamInputs:
    """Final-block feature maps (C, h, w), linear classifier weights (K, C),
    and the class whose evidence map is requested."""

    feature_maps: torch.Tensor
    class_weights: torch.Tensor
    target_class: int

    def __post_init__(self):
        fm = torch.as_tensor(self.feature_maps)
        w = torch.as_tensor(self.class_weights)
        if fm.ndim != 3 or fm.shape[1] < 1 or fm.shape[2] < 1:
            raise ValueError(f"feature_maps must be (C, h, w), got shape {tuple(fm.shape)}")
        if w.ndim != 2:
            raise ValueError(f"class_weights must be (K, C), got shape {tuple(w.shape)}")
        if w.shape[1] != fm.shape[0]:
            raise ValueError(
                f"channel mismatch: {fm.shape[0]} feature maps vs {w.shape[1]} weight columns"
            )
        if not (0 <= self.target_class < w.shape[0]):
            raise ValueError(f"target_class {self.target_class} out of range for K={w.shape[0]}")
        object.__setattr__(self, "feature_maps", fm)
        object.__setattr__(self, "class_weights", w)


@dataclass(frozen=True)
class LossConfig:
    """Blend weight between classification (alpha) and alignment (1 - alpha)."""

    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class LossBreakdown:
    """Decomposed loss value. Terms are 0-dim tensors so batch reductions
    and backward passes can flow through them."""

    total: torch.Tensor
    classification_term: torch.Tensor
    alignment_term: torch.Tensor
    alpha: float

    def __post_init__(self):
        total = _scalar(self.total)
        cls = _scalar(self.classification_term)
        align = _scalar(self.alignment_term)
        recombined = self.alpha * cls + (1.0 - self.alpha) * align
        if abs(total - recombined) > 1e-6 * max(1.0, abs(total)):
            raise ValueError(
                f"inconsistent breakdown: total={total} vs recombined={recombined}"
            )
        if cls < 0 or align < -1e-12:
            raise ValueError("loss terms must be non-negative")


def _scalar(x) -> float:
    return float(x.detach() if torch.is_tensor(x) else x)


def compute_cam(inputs: CamInputs) -> torch.Tensor:
    """Class activation map: the target class's weight vector contracted
    against the feature maps. Raw values, any sign, shape (h, w)."""
    weights = inputs.class_weights[inputs.target_class].to(inputs.feature_maps.dtype)
    return torch.einsum("c,chw->hw", weights, inputs.feature_maps)


def _minmax_01(grid: torch.Tensor) -> torch.Tensor:
    """Min-max normalize to [0, 1]; a constant grid maps to all-zero with a
    zero gradient (avoids the 0/0 at a featureless map)."""
    lo, hi = grid.min(), grid.max()
    if bool(hi > lo):
        return (grid - lo) / (hi - lo)
    # Multiplying by zero (rather than zeros_like) keeps the autograd graph
    # attached while making the gradient exactly zero.
    return grid * 0.0


def _as_grid(saliency) -> torch.Tensor:
    if isinstance(saliency, SaliencyMap):
        return torch.from_numpy(saliency.values.copy())
    return torch.as_tensor(saliency)


def alignment_term(cam: torch.Tensor, saliency) -> torch.Tensor:
    """Mean squared difference between the min-max-normalized CAM and the
    saliency area-average-pooled down to the CAM grid (also normalized).

    Invariant under positive affine transforms of the raw CAM, symmetric
    in the two normalized grids, and bounded in [0, 1].
    """
    if cam.ndim != 2 or cam.numel() == 0:
        raise ValueError(f"cam must be a non-empty 2-D grid, got shape {tuple(cam.shape)}")
    sal = _as_grid(saliency)
    if sal.ndim != 2 or sal.numel() == 0:
        raise ValueError(f"saliency must be a non-empty 2-D grid, got shape {tuple(sal.shape)}")
    if sal.shape[0] < cam.shape[0] or sal.shape[1] < cam.shape[1]:
        raise ValueError(
            f"saliency dims {tuple(sal.shape)} must be >= cam dims {tuple(cam.shape)}"
        )
    sal = sal.to(cam.dtype)
    if sal.shape != cam.shape:
        sal = F.adaptive_avg_pool2d(sal[None, None], cam.shape)[0, 0]
    return F.mse_loss(_minmax_01(cam), _minmax_01(sal))


def cyborg_loss(
    logits: torch.Tensor,
    label: int,
    cam_inputs: CamInputs,
    saliency,
    config: LossConfig,
) -> LossBreakdown:
    """Blend cross-entropy with CAM-saliency alignment for one sample.

    The alignment CAM is computed for the ground-truth label (the class
    whose evidence should match the external saliency), regardless of
    ``cam_inputs.target_class``.
    """
    logits = torch.as_tensor(logits)
    if logits.ndim != 1:
        raise ValueError(f"logits must be a 1-D class-score vector, got {tuple(logits.shape)}")
    k = logits.shape[0]
    if not (0 <= label < k):
        raise ValueError(f"label {label} out of range for K={k}")
    classification = F.cross_entropy(
        logits[None], torch.tensor([label], device=logits.device)
    )
    cam = compute_cam(dataclasses.replace(cam_inputs, target_class=label))
    align = alignment_term(cam, saliency)
    total = config.alpha * classification + (1.0 - config.alpha) * align
    return LossBreakdown(total, classification, align, config.alpha)


def batch_loss(per_sample: list[LossBreakdown]) -> LossBreakdown:
    """Arithmetic mean of per-sample breakdowns (uniform alpha required)."""
    if not per_sample:
        raise ValueError("cannot reduce an empty list of loss breakdowns")
    alpha = per_sample[0].alpha
    if any(b.alpha != alpha for b in per_sample):
        raise ValueError("mixed alpha values in batch")
    total = torch.stack([torch.as_tensor(b.total) for b in per_sample]).mean()
    cls = torch.stack([torch.as_tensor(b.classification_term) for b in per_sample]).mean()
    align = torch.stack([torch.as_tensor(b.alignment_term) for b in per_sample]).mean()
    return LossBreakdown(total, cls, align, alpha)
