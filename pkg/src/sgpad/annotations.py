"""Annotation session exports: schema, rasterization, and manifest ingestion.

One export documents one annotator's pass over one sample: their
genuine/fake decision, the salient strokes they painted (with per-stroke
start and end timestamps), and an optional free-text rationale. The JSON
shape defined by ``ANNOTATION_EXPORT_SCHEMA`` is the wire contract between
the browser annotation tool, the collection server, and this pipeline.

Strokes rasterize to binary FOI maps (disks of the brush diameter swept
along each polyline); per-sample maps from independent annotators fuse by
averaging, which is where soft values come from.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft7Validator

from .data import Manifest, SampleRecord
from .saliency import Granularity, SaliencyMap, SaliencySource, fuse_annotations, save_saliency

logger = logging.getLogger(__name__)

ANNOTATION_EXPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["sample_id", "annotator_id", "decision", "strokes", "image_dims"],
    "additionalProperties": False,
    "properties": {
        "sample_id": {"type": "string", "minLength": 1},
        "annotator_id": {"type": "string", "minLength": 1},
        "decision": {"enum": ["genuine", "fake"]},
        "text_description": {"type": ["string", "null"]},
        "strokes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["points", "brush_width", "t_start_ms", "t_end_ms"],
                "additionalProperties": False,
                "properties": {
                    "points": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "array",
                            "items": {"type": "number"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                    "brush_width": {"type": "number", "exclusiveMinimum": 0},
                    "t_start_ms": {"type": "number", "minimum": 0},
                    "t_end_ms": {"type": "number", "minimum": 0},
                },
            },
        },
        "image_dims": {
            "type": "object",
            "required": ["width", "height"],
            "additionalProperties": False,
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
            },
        },
    },
}

_validator = Draft7Validator(ANNOTATION_EXPORT_SCHEMA)


class SchemaViolation(ValueError):
    """Raised when an export document fails schema validation; carries the
    JSON path of the offending field."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


@dataclass(frozen=True)
class Stroke:
    points: tuple[tuple[float, float], ...]
    brush_width: float
    t_start_ms: float
    t_end_ms: float

    def __post_init__(self):
        if not self.points:
            raise ValueError("stroke must have at least one point")
        if self.brush_width <= 0:
            raise ValueError("brush_width must be positive")
        if self.t_start_ms > self.t_end_ms:
            raise ValueError("stroke t_start_ms must be <= t_end_ms")
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))


@dataclass(frozen=True)
class AnnotationExport:
    sample_id: str
    annotator_id: str
    decision: str  # "genuine" or "fake"
    strokes: tuple[Stroke, ...]
    image_dims: tuple[int, int]  # (width, height)
    text_description: str | None = None

    def __post_init__(self):
        if self.decision not in ("genuine", "fake"):
            raise ValueError(f"decision must be 'genuine' or 'fake', got {self.decision!r}")
        width, height = self.image_dims
        if width <= 0 or height <= 0:
            raise ValueError(f"image_dims must be positive, got {self.image_dims}")
        for si, stroke in enumerate(self.strokes):
            for pi, (x, y) in enumerate(stroke.points):
                if not (0 <= x < width and 0 <= y < height):
                    raise ValueError(
                        f"strokes[{si}].points[{pi}] at ({x}, {y}) is outside "
                        f"image dims {width}x{height}"
                    )
        object.__setattr__(self, "strokes", tuple(self.strokes))

    def to_json_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "annotator_id": self.annotator_id,
            "decision": self.decision,
            "text_description": self.text_description,
            "strokes": [
                {
                    "points": [[x, y] for x, y in s.points],
                    "brush_width": s.brush_width,
                    "t_start_ms": s.t_start_ms,
                    "t_end_ms": s.t_end_ms,
                }
                for s in self.strokes
            ],
            "image_dims": {"width": self.image_dims[0], "height": self.image_dims[1]},
        }


def validate_export_document(doc: dict) -> None:
    """Schema-check a raw export document; raises :class:`SchemaViolation`
    naming the first offending field."""
    errors = sorted(_validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        if err.validator == "required":
            # Name the missing property itself, not just its parent object.
            missing = err.message.split("'")[1]
            path = f"{path}.{missing}"
        raise SchemaViolation(path, err.message)


def export_from_json_dict(doc: dict) -> AnnotationExport:
    validate_export_document(doc)
    return AnnotationExport(
        sample_id=doc["sample_id"],
        annotator_id=doc["annotator_id"],
        decision=doc["decision"],
        text_description=doc.get("text_description"),
        strokes=tuple(
            Stroke(
                points=tuple((p[0], p[1]) for p in s["points"]),
                brush_width=s["brush_width"],
                t_start_ms=s["t_start_ms"],
                t_end_ms=s["t_end_ms"],
            )
            for s in doc["strokes"]
        ),
        image_dims=(doc["image_dims"]["width"], doc["image_dims"]["height"]),
    )


def load_export(path: str | Path) -> AnnotationExport:
    with open(path, encoding="utf-8") as fh:
        return export_from_json_dict(json.load(fh))


def save_export(export: AnnotationExport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(export.to_json_dict(), fh, indent=2)


def _paint_segment(mask: np.ndarray, p: tuple[float, float], q: tuple[float, float],
                   radius: float) -> None:
    """Set pixels within ``radius`` of segment pq (a swept disk) to 1."""
    height, width = mask.shape
    reach = int(np.ceil(radius))
    x0, x1 = sorted((p[0], q[0]))
    y0, y1 = sorted((p[1], q[1]))
    c0, c1 = max(0, int(np.floor(x0)) - reach), min(width, int(np.ceil(x1)) + reach + 1)
    r0, r1 = max(0, int(np.floor(y0)) - reach), min(height, int(np.ceil(y1)) + reach + 1)
    if c0 >= c1 or r0 >= r1:
        return
    ys, xs = np.mgrid[r0:r1, c0:c1]
    px, py = p
    dx, dy = q[0] - px, q[1] - py
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0:
        d = np.hypot(xs - px, ys - py)
    else:
        t = np.clip(((xs - px) * dx + (ys - py) * dy) / seg_len2, 0.0, 1.0)
        d = np.hypot(xs - (px + t * dx), ys - (py + t * dy))
    mask[r0:r1, c0:c1][d <= radius] = 1.0


def rasterize_annotation(export: AnnotationExport) -> SaliencyMap:
    """Paint each stroke as a polyline of brush-diameter disks; strokes
    union by maximum, so overlaps stay binary."""
    width, height = export.image_dims
    mask = np.zeros((height, width), dtype=np.float64)
    for stroke in export.strokes:
        radius = stroke.brush_width / 2.0
        pts = stroke.points
        if len(pts) == 1:
            _paint_segment(mask, pts[0], pts[0], radius)
        for a, b in zip(pts[:-1], pts[1:]):
            _paint_segment(mask, a, b, radius)
    return SaliencyMap(mask, Granularity.FOI, SaliencySource.HUMAN)


def ingest_annotations(
    exports: list[AnnotationExport],
    manifest: Manifest,
    saliency_dir: str | Path,
    min_annotators: int = 2,
) -> Manifest:
    """Rasterize and fuse per-sample annotator exports into human FOI maps.

    Samples with fewer than ``min_annotators`` exports are skipped with a
    warning. Fused maps are written under ``saliency_dir`` and the manifest
    records gain saliency references.
    """
    by_sample: dict[str, list[AnnotationExport]] = {}
    for export in exports:
        manifest.by_id(export.sample_id)  # raises KeyError for unknown ids
        by_sample.setdefault(export.sample_id, []).append(export)
    saliency_dir = Path(saliency_dir)
    saliency_dir.mkdir(parents=True, exist_ok=True)
    out = manifest
    for sample_id in sorted(by_sample):
        group = by_sample[sample_id]
        if len(group) < min_annotators:
            logger.warning(
                "sample %s has %d annotation(s), fewer than the minimum %d; skipped",
                sample_id, len(group), min_annotators,
            )
            continue
        fused = fuse_annotations([rasterize_annotation(e) for e in group])
        map_path = saliency_dir / f"{sample_id}__human.png"
        save_saliency(fused, map_path)
        record: SampleRecord = out.by_id(sample_id)
        out = out.replace_record(
            dataclasses.replace(
                record, saliency_path=str(map_path), saliency_source=SaliencySource.HUMAN
            )
        )
    return out
