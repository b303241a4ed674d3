"""Ingest a stored annotation export and dump its rasterized mask.

Proves the pipeline side of the UI round trip: the export is parsed and
ingested (rasterize + fuse + manifest attachment) without error, and the
resulting binary mask is emitted as JSON for pixel-level comparison.
"""
import argparse
import json
from pathlib import Path


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dir", required=True, help="fixture dir written by serve_fixture")
    parser.add_argument("--export", required=True, help="stored AnnotationExport JSON")
    parser.add_argument("--out", required=True, help="output mask JSON path")
    args = parser.parse_args()

    from sgpad.annotations import ingest_annotations, load_export, rasterize_annotation
    from sgpad.data import read_manifest
    from sgpad.saliency import load_saliency

    export = load_export(args.export)
    manifest = read_manifest(Path(args.dir) / "manifest.csv")
    ingested = ingest_annotations(
        [export], manifest, Path(args.dir) / "saliency", min_annotators=1
    )
    record = ingested.by_id(export.sample_id)
    assert record.saliency_path is not None, "ingestion did not attach a saliency map"
    stored = load_saliency(record.saliency_path)

    mask = rasterize_annotation(export)
    assert (stored.values == mask.values).all(), "stored map differs from rasterization"
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(
            {"width": mask.width, "height": mask.height,
             "mask": mask.values.astype(int).ravel().tolist()},
            fh,
        )
    print("ok", flush=True)


if __name__ == "__main__":
    main()
