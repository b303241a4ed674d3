"""Manifest-driven corpus management.

A manifest is a CSV describing one sample per row: image path, class
label, attack type, capture sensor, source dataset, optional saliency
reference, and split assignment. Everything downstream (training,
evaluation, annotation serving) consumes manifests rather than raw
directory trees, so any corpus can be described without bundling data.

Also here: balanced limited-dataset construction (class-balanced with
per-attack-type quotas, round-robin over capture sensors), center-crop
preprocessing, and the stratified validation split.
"""
from __future__ import annotations

import csv
import dataclasses
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .saliency import SaliencySource

MANIFEST_HEADER = [
    "sample_id",
    "image_path",
    "label",
    "attack_type",
    "sensor",
    "source_dataset",
    "saliency_path",
    "saliency_source",
    "split",
]

DEFAULT_ATTACK_TYPES = (
    "ecoflex",
    "gelatine",
    "latex",
    "liquid_ecoflex",
    "woodglue",
    "body_double",
    "mix",
    "rpro_fast",
)


class Label(str, Enum):
    BONAFIDE = "bonafide"
    SPOOF = "spoof"


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    image_path: str
    label: Label
    attack_type: str | None = None
    sensor: str = ""
    source_dataset: str = ""
    saliency_path: str | None = None
    saliency_source: SaliencySource | None = None
    split: Split = Split.UNASSIGNED

    def __post_init__(self):
        if not self.sample_id:
            raise ValueError("sample_id must be non-empty")
        if (self.label is Label.SPOOF) != (self.attack_type is not None):
            raise ValueError(
                f"record {self.sample_id}: attack_type must be present exactly for spoof samples"
            )


@dataclass(frozen=True)
class Manifest:
    records: tuple[SampleRecord, ...]
    schema_version: int = 1

    def __post_init__(self):
        records = tuple(self.records)
        ids = [r.sample_id for r in records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate sample_ids in manifest: {dupes[:5]}")
        for r in records:
            if r.saliency_path is not None and r.saliency_source is None:
                raise ValueError(f"record {r.sample_id}: saliency_path without saliency_source")
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self, sample_id: str) -> SampleRecord:
        for r in self.records:
            if r.sample_id == sample_id:
                return r
        raise KeyError(f"unknown sample_id {sample_id!r}")

    def subset(self, split: Split) -> tuple[SampleRecord, ...]:
        return tuple(r for r in self.records if r.split is split)

    def replace_record(self, record: SampleRecord) -> "Manifest":
        records = tuple(record if r.sample_id == record.sample_id else r for r in self.records)
        return Manifest(records, self.schema_version)


@dataclass(frozen=True)
class LimitedDataSpec:
    """Composition of the balanced limited training corpus: a bonafide
    quota plus a fixed per-attack-type spoof quota."""

    bonafide_count: int = 400
    per_attack_count: int = 50
    attack_types: tuple[str, ...] = DEFAULT_ATTACK_TYPES
    seed: int = 0

    def __post_init__(self):
        if self.bonafide_count <= 0 or self.per_attack_count <= 0:
            raise ValueError("counts must be positive")
        if not self.attack_types:
            raise ValueError("attack_types must be non-empty")
        if len(set(self.attack_types)) != len(self.attack_types):
            raise ValueError("attack_types must be unique")
        object.__setattr__(self, "attack_types", tuple(self.attack_types))


def _field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return value.value
    return str(value)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Atomic CSV write (temp file then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in manifest.records:
            writer.writerow(
                [
                    r.sample_id,
                    r.image_path,
                    _field(r.label),
                    _field(r.attack_type),
                    r.sensor,
                    r.source_dataset,
                    _field(r.saliency_path),
                    _field(r.saliency_source),
                    _field(r.split),
                ]
            )
    os.replace(tmp, path)


def read_manifest(path: str | Path, check_files: bool = True) -> Manifest:
    """Load a manifest CSV. Relative image/saliency paths are resolved
    against the manifest's directory; referenced files must exist."""
    path = Path(path)
    base = path.parent
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: unexpected manifest header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} fields")
            (sid, image_path, label, attack, sensor, source_ds, sal_path, sal_source, split) = row
            records.append(
                SampleRecord(
                    sample_id=sid,
                    image_path=str(_resolve(base, image_path)),
                    label=Label(label),
                    attack_type=attack or None,
                    sensor=sensor,
                    source_dataset=source_ds,
                    saliency_path=str(_resolve(base, sal_path)) if sal_path else None,
                    saliency_source=SaliencySource(sal_source) if sal_source else None,
                    split=Split(split) if split else Split.UNASSIGNED,
                )
            )
    manifest = Manifest(tuple(records))
    if check_files:
        for r in manifest.records:
            if not os.path.exists(r.image_path):
                raise FileNotFoundError(f"{path}: missing image file {r.image_path}")
            if r.saliency_path and not os.path.exists(r.saliency_path):
                raise FileNotFoundError(f"{path}: missing saliency file {r.saliency_path}")
    return manifest


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def _balanced_draw(
    records: list[SampleRecord], count: int, subclass: str, rng: np.random.Generator
) -> list[SampleRecord]:
    """Round-robin over capture sensors: cycle the (seed-shuffled) sensor
    order taking one sample at a time, letting small sensor pools run dry
    while larger pools supply the remainder. Per-sensor counts within the
    subclass differ by at most one whenever the pools permit."""
    if len(records) < count:
        raise ValueError(
            f"insufficient pool for subclass {subclass!r}: "
            f"need {count}, have {len(records)} (short {count - len(records)})"
        )
    pools: dict[str, list[SampleRecord]] = {}
    for r in sorted(records, key=lambda r: r.sample_id):
        pools.setdefault(r.sensor, []).append(r)
    sensor_order = sorted(pools)
    rng.shuffle(sensor_order)
    for sensor in sensor_order:
        rng.shuffle(pools[sensor])
    chosen: list[SampleRecord] = []
    while len(chosen) < count:
        for sensor in sensor_order:
            if len(chosen) == count:
                break
            if pools[sensor]:
                chosen.append(pools[sensor].pop())
    return chosen


def build_limited_manifest(pool: Manifest, spec: LimitedDataSpec) -> Manifest:
    """Draw the class- and sensor-balanced limited corpus from a pool:
    exactly ``bonafide_count`` bonafide plus ``per_attack_count`` spoof
    samples per requested attack type, deterministic under ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    bonafide = [r for r in pool.records if r.label is Label.BONAFIDE]
    chosen = _balanced_draw(bonafide, spec.bonafide_count, "bonafide", rng)
    for attack in spec.attack_types:
        subclass = [r for r in pool.records if r.attack_type == attack]
        chosen.extend(_balanced_draw(subclass, spec.per_attack_count, attack, rng))
    return Manifest(tuple(chosen), pool.schema_version)


def split_validation(manifest: Manifest, fraction: float = 0.2, seed: int = 0) -> Manifest:
    """Assign round(fraction * N) records to the validation split,
    stratified by class label; the rest become train. Records already
    marked test are left untouched (and excluded from N)."""
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    assignable = [r for r in manifest.records if r.split is not Split.TEST]
    n_val_total = round(fraction * len(assignable))
    by_label: dict[Label, list[SampleRecord]] = {}
    for r in assignable:
        by_label.setdefault(r.label, []).append(r)
    # Largest-remainder allocation keeps per-class proportions while the
    # overall count stays exactly round(fraction * N).
    labels = sorted(by_label, key=lambda l: l.value)
    quotas = {l: int(fraction * len(by_label[l])) for l in labels}
    remainders = sorted(
        labels, key=lambda l: (fraction * len(by_label[l])) % 1.0, reverse=True
    )
    i = 0
    while sum(quotas.values()) < n_val_total:
        quotas[remainders[i % len(remainders)]] += 1
        i += 1
    val_ids: set[str] = set()
    for label in labels:
        group = sorted(by_label[label], key=lambda r: r.sample_id)
        picked = rng.choice(len(group), size=quotas[label], replace=False)
        val_ids.update(group[j].sample_id for j in picked)
    records = tuple(
        r
        if r.split is Split.TEST
        else dataclasses.replace(
            r, split=Split.VAL if r.sample_id in val_ids else Split.TRAIN
        )
        for r in manifest.records
    )
    return Manifest(records, manifest.schema_version)


def preprocess(image: np.ndarray, target: int = 224) -> np.ndarray:
    """Center-crop the largest square, then bilinear-resize to target size.

    Already target-sized crops pass through unchanged, so the operation is
    idempotent on its own outputs.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise ValueError(f"expected a non-empty 2-D grayscale grid, got shape {image.shape}")
    h, w = image.shape
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    cropped = image[top : top + side, left : left + side]
    if side == target:
        return cropped.copy()
    resized = Image.fromarray(cropped.astype(np.float32), mode="F").resize(
        (target, target), Image.Resampling.BILINEAR
    )
    return np.asarray(resized, dtype=np.float64)


def load_image(path: str | Path) -> np.ndarray:
    """8-bit grayscale file to a float grid in [0, 1]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Float grid in [0, 1] to an 8-bit grayscale file."""
    data = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)
