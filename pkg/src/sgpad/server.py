"""Collection server behind the browser annotation tool.

Three fixed routes serve a whole study: fetch an annotator's assignment,
fetch a sample image, submit an annotation export. Assignment plans are
precomputed (read-only during collection) so concurrent annotators never
contend; submissions are atomic per (sample, annotator) file with an
audit trail for replacements. Class labels are never exposed to
annotators through any route.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import SchemaViolation, export_from_json_dict
from .data import Label, Manifest

logger = logging.getLogger(__name__)

MEDIA_TYPES = {".png": "image/png", ".bmp": "image/bmp", ".jpg": "image/jpeg",
               ".jpeg": "image/jpeg", ".tif": "image/tiff", ".tiff": "image/tiff"}


@dataclass(frozen=True)
class PlanParams:
    annotators_per_sample: int = 2
    bonafide_quota: int = 16
    per_attack_quota: int = 2

    def __post_init__(self):
        if min(self.annotators_per_sample, self.bonafide_quota, self.per_attack_quota) < 1:
            raise ValueError("plan parameters must be positive")


@dataclass(frozen=True)
class AssignmentPlan:
    """Per-annotator ordered sample lists. No sample repeats within one
    annotator; no sample is assigned to more than ``annotators_per_sample``
    annotators."""

    assignments: dict[str, tuple[str, ...]]
    annotators_per_sample: int

    def __post_init__(self):
        counts: dict[str, int] = {}
        for annotator, sample_ids in self.assignments.items():
            if len(set(sample_ids)) != len(sample_ids):
                raise ValueError(f"annotator {annotator!r} has duplicate assignments")
            for sid in sample_ids:
                counts[sid] = counts.get(sid, 0) + 1
        over = [sid for sid, c in counts.items() if c > self.annotators_per_sample]
        if over:
            raise ValueError(f"samples assigned beyond the target count: {over[:5]}")
        object.__setattr__(
            self, "assignments", {a: tuple(s) for a, s in self.assignments.items()}
        )


def build_assignment(
    manifest: Manifest,
    annotators: list[str],
    params: PlanParams = PlanParams(),
    seed: int = 0,
) -> AssignmentPlan:
    """Assign each annotator a quota of bonafide samples plus a fixed count
    per attack type, spreading coverage evenly: least-annotated samples are
    handed out first, and no sample exceeds the per-sample target."""
    if len(set(annotators)) != len(annotators):
        raise ValueError("annotator ids must be unique")
    subclasses: dict[str, list[str]] = {"bonafide": []}
    for r in manifest.records:
        if r.label is Label.BONAFIDE:
            subclasses["bonafide"].append(r.sample_id)
        else:
            subclasses.setdefault(r.attack_type, []).append(r.sample_id)
    quotas = {
        name: (params.bonafide_quota if name == "bonafide" else params.per_attack_quota)
        for name in subclasses
    }
    for name, pool in subclasses.items():
        demand = quotas[name] * len(annotators)
        capacity = len(pool) * params.annotators_per_sample
        if quotas[name] > len(pool) or demand > capacity:
            raise ValueError(
                f"insufficient samples in subclass {name!r}: "
                f"{len(pool)} available for a demand of {demand} "
                f"at {params.annotators_per_sample} annotators per sample"
            )
    rng = np.random.default_rng(seed)
    tiebreak = {}
    for name, pool in sorted(subclasses.items()):
        order = sorted(pool)
        rng.shuffle(order)
        tiebreak.update({sid: i for i, sid in enumerate(order)})
    counts: dict[str, int] = {}
    assignments: dict[str, tuple[str, ...]] = {}
    for annotator in annotators:
        chosen: list[str] = []
        for name in sorted(subclasses):
            pool = [
                sid for sid in subclasses[name]
                if counts.get(sid, 0) < params.annotators_per_sample
            ]
            pool.sort(key=lambda sid: (counts.get(sid, 0), tiebreak[sid]))
            if len(pool) < quotas[name]:
                raise ValueError(
                    f"insufficient samples in subclass {name!r} for annotator {annotator!r}"
                )
            take = pool[: quotas[name]]
            for sid in take:
                counts[sid] = counts.get(sid, 0) + 1
            chosen.extend(take)
        assignments[annotator] = tuple(chosen)
    return AssignmentPlan(assignments, params.annotators_per_sample)


def save_plan(plan: AssignmentPlan, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"annotators_per_sample": plan.annotators_per_sample,
             "assignments": {a: list(s) for a, s in plan.assignments.items()}},
            fh, indent=2,
        )


def load_plan(path: str | Path) -> AssignmentPlan:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return AssignmentPlan(
        {a: tuple(s) for a, s in doc["assignments"].items()},
        doc["annotators_per_sample"],
    )


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_app(manifest: Manifest, plan: AssignmentPlan, storage_dir: str | Path):
    """FastAPI app exposing the three collection routes."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import FileResponse, JSONResponse

    storage = Path(storage_dir)
    annotations_dir = storage / "annotations"
    annotations_dir.mkdir(parents=True, exist_ok=True)
    audit_log = annotations_dir / "audit.log"
    app = FastAPI(title="fingerprint annotation collection")

    def export_path(sample_id: str, annotator_id: str) -> Path:
        return annotations_dir / f"{sample_id}__{annotator_id}.json"

    @app.get("/assignment/{annotator_id}")
    def get_assignment(annotator_id: str):
        if annotator_id not in plan.assignments:
            raise HTTPException(status_code=404, detail=f"unknown annotator {annotator_id!r}")
        return [
            {"sample_id": sid, "annotated": export_path(sid, annotator_id).exists()}
            for sid in plan.assignments[annotator_id]
        ]

    @app.get("/image/{sample_id}")
    def get_image(sample_id: str):
        try:
            record = manifest.by_id(sample_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id!r}")
        suffix = Path(record.image_path).suffix.lower()
        return FileResponse(
            record.image_path, media_type=MEDIA_TYPES.get(suffix, "application/octet-stream")
        )

    @app.post("/annotation")
    def post_annotation(doc: dict):
        try:
            export = export_from_json_dict(doc)
        except SchemaViolation as exc:
            raise HTTPException(
                status_code=422, detail={"field": exc.field_path, "message": str(exc)}
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail={"message": str(exc)})
        assigned = plan.assignments.get(export.annotator_id, ())
        if export.sample_id not in assigned:
            raise HTTPException(
                status_code=403,
                detail=f"sample {export.sample_id!r} is not assigned to "
                       f"annotator {export.annotator_id!r}",
            )
        path = export_path(export.sample_id, export.annotator_id)
        replaced = path.exists()
        _atomic_write(path, json.dumps(export.to_json_dict(), indent=2).encode("utf-8"))
        if replaced:
            with open(audit_log, "a", encoding="utf-8") as fh:
                fh.write(
                    f"{time.strftime('%Y-%m-%dT%H:%M:%S')} replaced "
                    f"{export.sample_id}__{export.annotator_id}\n"
                )
        return JSONResponse({"status": "stored", "replaced": replaced})

    return app


def serve(manifest: Manifest, plan: AssignmentPlan, storage_dir: str | Path,
          host: str = "127.0.0.1", port: int = 8008) -> None:
    import uvicorn

    uvicorn.run(build_app(manifest, plan, storage_dir), host=host, port=port,
                log_level="info")
