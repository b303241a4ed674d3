"""Synthetic two-class corpus for desk-scale experiments.

The bonafide class is smooth band-limited noise; the spoof class carries
a high-frequency checkerboard patch at a fixed, known location. Every
sample gets a saliency map marking that patch rectangle (the region whose
presence or absence decides the class), which makes the corpus suitable
for exercising saliency-guided training end to end without licensed data.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import Label, Manifest, SampleRecord, Split, save_image, split_validation, write_manifest
from .saliency import Granularity, SaliencyMap, SaliencySource, save_saliency


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 256
    n_test: int = 128
    image_size: int = 224
    patch_box: tuple[int, int, int, int] | None = None  # (top, left, height, width)
    cell: int = 8  # checkerboard cell size in px
    seed: int = 0
    val_fraction: float = 0.2

    def resolved_patch_box(self) -> tuple[int, int, int, int]:
        if self.patch_box is not None:
            return self.patch_box
        quarter = self.image_size // 4
        return (quarter, quarter, quarter, quarter)


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    noise = gaussian_filter(rng.normal(size=(size, size)), sigma=size / 28.0, mode="reflect")
    lo, hi = noise.min(), noise.max()
    return 0.2 + 0.6 * (noise - lo) / (hi - lo)


def _checkerboard(rng: np.random.Generator, height: int, width: int, cell: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    phase = int(rng.integers(0, 2))
    board = (((ys // cell) + (xs // cell) + phase) % 2).astype(np.float64)
    return 0.1 + 0.8 * board


def patch_saliency(spec: SyntheticSpec) -> SaliencyMap:
    """Binary FOI map marking the patch rectangle."""
    top, left, height, width = spec.resolved_patch_box()
    values = np.zeros((spec.image_size, spec.image_size))
    values[top : top + height, left : left + width] = 1.0
    return SaliencyMap(values, Granularity.FOI, SaliencySource.SYNTHETIC)


def make_synthetic_corpus(out_dir: str | Path, spec: SyntheticSpec = SyntheticSpec()) -> Path:
    """Generate images, per-sample saliency, and a split manifest.

    Classes are balanced within both the training pool and the test set;
    the training pool is then 80/20 train/val split (stratified). Returns
    the manifest path.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "saliency").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    top, left, height, width = spec.resolved_patch_box()
    saliency = patch_saliency(spec)
    sal_path = out_dir / "saliency" / "patch.png"
    save_saliency(saliency, sal_path)

    records = []
    for kind, count, split in (("tr", spec.n_train, Split.UNASSIGNED),
                               ("te", spec.n_test, Split.TEST)):
        for i in range(count):
            spoof = i % 2 == 1
            image = _background(rng, spec.image_size)
            if spoof:
                image[top : top + height, left : left + width] = _checkerboard(
                    rng, height, width, spec.cell
                )
            sample_id = f"{kind}{i:04d}"
            image_path = out_dir / "images" / f"{sample_id}.png"
            save_image(image, image_path)
            records.append(
                SampleRecord(
                    sample_id=sample_id,
                    image_path=str(image_path),
                    label=Label.SPOOF if spoof else Label.BONAFIDE,
                    attack_type="texture_patch" if spoof else None,
                    sensor=("synthA", "synthB")[i % 2],
                    source_dataset="synthetic",
                    saliency_path=str(sal_path),
                    saliency_source=SaliencySource.SYNTHETIC,
                    split=split,
                )
            )
    manifest = split_validation(Manifest(tuple(records)), spec.val_fraction, spec.seed)
    manifest_path = out_dir / "manifest.csv"
    write_manifest(manifest, manifest_path)
    return manifest_path
