import json

import numpy as np
import pytest

from sgpad.annotations import (
    AnnotationExport,
    SchemaViolation,
    Stroke,
    export_from_json_dict,
    ingest_annotations,
    load_export,
    rasterize_annotation,
    save_export,
    validate_export_document,
)
from sgpad.data import Label, Manifest, SampleRecord, save_image
from sgpad.saliency import Granularity, SaliencySource, load_saliency


def export(sample_id="s0", annotator="a0", strokes=(), decision="fake", dims=(64, 64)):
    return AnnotationExport(
        sample_id=sample_id,
        annotator_id=annotator,
        decision=decision,
        strokes=tuple(strokes),
        image_dims=dims,
    )


def stroke(points, brush_width=4.0, t0=0.0, t1=10.0):
    return Stroke(tuple(points), brush_width, t0, t1)


class TestExportValidation:
    def test_timestamps_ordered(self):
        with pytest.raises(ValueError, match="t_start"):
            stroke([(1, 1)], t0=5.0, t1=1.0)

    def test_points_within_dims(self):
        with pytest.raises(ValueError, match=r"strokes\[0\].points\[1\]"):
            export(strokes=[stroke([(1, 1), (64, 1)])])

    def test_decision_values(self):
        with pytest.raises(ValueError, match="decision"):
            export(decision="maybe")

    def test_schema_accepts_valid_document(self):
        doc = export(strokes=[stroke([(1, 2), (3, 4)])]).to_json_dict()
        validate_export_document(doc)
        assert export_from_json_dict(doc) == export(strokes=[stroke([(1, 2), (3, 4)])])

    def test_schema_rejects_missing_decision_naming_field(self):
        doc = export().to_json_dict()
        del doc["decision"]
        with pytest.raises(SchemaViolation, match="decision"):
            validate_export_document(doc)

    def test_schema_rejects_bad_stroke_field_with_path(self):
        doc = export(strokes=[stroke([(1, 1)])]).to_json_dict()
        doc["strokes"][0]["brush_width"] = -1
        with pytest.raises(SchemaViolation, match=r"strokes\[0\].brush_width"):
            validate_export_document(doc)

    def test_schema_rejects_unknown_property(self):
        doc = export().to_json_dict()
        doc["extra"] = 1
        with pytest.raises(SchemaViolation):
            validate_export_document(doc)

    def test_text_only_export_is_valid(self):
        e = AnnotationExport(
            sample_id="s0", annotator_id="a0", decision="fake", strokes=(),
            image_dims=(32, 32), text_description="too dark",
        )
        validate_export_document(e.to_json_dict())

    def test_file_roundtrip(self, tmp_path):
        e = export(strokes=[stroke([(1.5, 2.25), (8, 9)])])
        path = tmp_path / "e.json"
        save_export(e, path)
        assert load_export(path) == e
        raw = json.loads(path.read_text(encoding="utf-8"))
        assert raw["image_dims"] == {"width": 64, "height": 64}


class TestRasterize:
    def test_empty_strokes_give_zero_map(self):
        m = rasterize_annotation(export())
        assert m.values.sum() == 0.0
        assert m.granularity is Granularity.FOI
        assert m.source is SaliencySource.HUMAN

    def test_single_point_disk_matches_membership_oracle(self):
        m = rasterize_annotation(export(strokes=[stroke([(10, 10)], brush_width=4)]))
        ys, xs = np.mgrid[0:64, 0:64]
        inside = np.hypot(xs - 10, ys - 10) <= 2.0
        np.testing.assert_array_equal(m.values, inside.astype(float))

    def test_segment_paints_swept_disk(self):
        m = rasterize_annotation(export(strokes=[stroke([(10, 20), (30, 20)], brush_width=6)]))
        assert m.values[20, 10] == 1.0
        assert m.values[20, 30] == 1.0
        assert m.values[20, 20] == 1.0  # between the endpoints
        assert m.values[20 + 3, 20] == 1.0  # within radius of the centerline
        assert m.values[20 + 4, 20] == 0.0
        # Oracle: distance to the segment decides membership everywhere.
        ys, xs = np.mgrid[0:64, 0:64]
        t = np.clip((xs - 10) / 20.0, 0, 1)
        d = np.hypot(xs - (10 + 20 * t), ys - 20)
        np.testing.assert_array_equal(m.values, (d <= 3.0).astype(float))

    def test_overlapping_strokes_stay_binary(self):
        m = rasterize_annotation(
            export(strokes=[stroke([(10, 10)]), stroke([(11, 10)]), stroke([(10, 11)])])
        )
        assert set(np.unique(m.values)) <= {0.0, 1.0}

    def test_support_stays_near_polyline(self):
        e = export(strokes=[stroke([(5, 5), (20, 40), (50, 12)], brush_width=5)])
        m = rasterize_annotation(e)
        ys, xs = np.nonzero(m.values)
        segs = [((5, 5), (20, 40)), ((20, 40), (50, 12))]
        for x, y in zip(xs, ys):
            d = min(_point_segment_distance(x, y, a, b) for a, b in segs)
            assert d <= 2.5 + 1e-9


def _point_segment_distance(x, y, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return np.hypot(x - ax, y - ay)
    t = np.clip(((x - ax) * dx + (y - ay) * dy) / L2, 0, 1)
    return np.hypot(x - (ax + t * dx), y - (ay + t * dy))


class TestIngest:
    def make_manifest(self, tmp_path, ids=("s0", "s1")):
        records = []
        for sid in ids:
            img = tmp_path / f"{sid}.png"
            save_image(np.zeros((64, 64)), img)
            records.append(
                SampleRecord(sid, str(img), Label.SPOOF, attack_type="latex", sensor="x")
            )
        return Manifest(tuple(records))

    def test_two_annotators_fused_and_attached(self, tmp_path):
        manifest = self.make_manifest(tmp_path)
        exports = [
            export("s0", "a0", strokes=[stroke([(10, 10)], brush_width=8)]),
            export("s0", "a1", strokes=[stroke([(12, 10)], brush_width=8)]),
        ]
        out = ingest_annotations(exports, manifest, tmp_path / "sal")
        record = out.by_id("s0")
        assert record.saliency_source is SaliencySource.HUMAN
        fused = load_saliency(record.saliency_path)
        # Disagreement regions average to one half.
        assert set(np.round(np.unique(fused.values), 3)) <= {0.0, 0.498, 0.502, 1.0}
        assert 0 < fused.values.max() <= 1.0
        assert out.by_id("s1").saliency_path is None

    def test_single_annotator_skipped_with_warning(self, tmp_path, caplog):
        manifest = self.make_manifest(tmp_path)
        exports = [export("s0", "a0", strokes=[stroke([(10, 10)])])]
        with caplog.at_level("WARNING", logger="sgpad.annotations"):
            out = ingest_annotations(exports, manifest, tmp_path / "sal")
        assert "skipped" in caplog.text
        assert out.by_id("s0").saliency_path is None

    def test_no_exports_leaves_manifest_unchanged(self, tmp_path):
        manifest = self.make_manifest(tmp_path)
        assert ingest_annotations([], manifest, tmp_path / "sal") == manifest

    def test_unknown_sample_rejected(self, tmp_path):
        manifest = self.make_manifest(tmp_path)
        with pytest.raises(KeyError, match="zz"):
            ingest_annotations([export("zz", "a0")], manifest, tmp_path / "sal")

    def test_configurable_minimum(self, tmp_path):
        manifest = self.make_manifest(tmp_path)
        exports = [export("s0", "a0", strokes=[stroke([(10, 10)])])]
        out = ingest_annotations(exports, manifest, tmp_path / "sal", min_annotators=1)
        assert out.by_id("s0").saliency_path is not None
