"""Command-line entry points.

Core workflow: ``train`` executes one scenario config, ``sweep`` runs the
alpha grid, ``report`` re-derives metrics from a run directory's score
files (and ``report gain`` compares two report files). Supporting
commands cover corpus preparation, pseudosaliency generation, annotation
ingestion, assignment planning, and the collection server.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

from . import __version__


@click.group()
@click.version_option(__version__)
def main():
    """Saliency-guided fingerprint presentation-attack-detection toolkit."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Scenario config JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Run directory.")
def train(config_path, out_dir):
    """Run one training scenario (all runs, checkpoints, scores, aggregate)."""
    from .training import load_config, run_scenario

    report = run_scenario(load_config(config_path), out_dir)
    click.echo(json.dumps({"aggregate": report.aggregate,
                           "placement_range": report.placement_range}, indent=2))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Cyborg-guidance scenario config JSON.")
@click.option("--alphas", default="0.1,0.3,0.5,0.7,0.9", show_default=True,
              help="Comma-separated blend weights.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Sweep root directory.")
def sweep(config_path, alphas, out_dir):
    """Run the alpha grid with identical seeds for paired comparison."""
    from .training import alpha_sweep, load_config

    grid = tuple(float(a) for a in alphas.split(","))
    reports = alpha_sweep(load_config(config_path), grid, out_dir)
    summary = {
        f"alpha_{r.config.alpha:g}": r.aggregate for r in reports
    }
    click.echo(json.dumps(summary, indent=2))


@main.group(invoke_without_command=True)
@click.option("--run-dir", type=click.Path(exists=True), default=None,
              help="Scenario run directory to evaluate.")
@click.option("--competitors", "competitors_path", type=click.Path(exists=True), default=None,
              help="JSON array of descending competitor accuracies.")
@click.pass_context
def report(ctx, run_dir, competitors_path):
    """Recompute the evaluation report from a run directory's score files."""
    if ctx.invoked_subcommand is not None:
        return
    if run_dir is None:
        raise click.UsageError("provide --run-dir or use a subcommand")
    from .metrics import eer_threshold, evaluate, placement, read_scores
    from .training import _aggregate_metrics

    run_dir = Path(run_dir)
    competitors = None
    if competitors_path:
        with open(competitors_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        # Either a bare descending array or {"accuracies": [...], "provenance": "..."}.
        competitors = doc["accuracies"] if isinstance(doc, dict) else doc
    reports = []
    for sub in sorted(run_dir.glob("run_*")):
        val = read_scores(sub / "val_scores.csv")
        threshold = eer_threshold(val)
        test_path = sub / "test_scores.csv"
        scored = read_scores(test_path) if test_path.exists() else val
        reports.append(evaluate(scored, threshold))
    if not reports:
        raise click.ClickException(f"no run_* subdirectories with scores in {run_dir}")
    aggregate = _aggregate_metrics(reports)
    doc = {"runs": [r.to_json_dict() for r in reports], "aggregate": aggregate}
    if competitors and "accuracy" in aggregate:
        acc = aggregate["accuracy"]
        doc["placement_range"] = list(
            placement(acc["mean"], acc.get("std", 0.0), competitors)
        )
    click.echo(json.dumps(doc, indent=2))


@report.command()
@click.argument("guided_report", type=click.Path(exists=True))
@click.argument("baseline_report", type=click.Path(exists=True))
@click.option("--metric", default="auc", show_default=True,
              help="Metric name present in both report files.")
def gain(guided_report, baseline_report, metric):
    """Normalized gain of GUIDED_REPORT over BASELINE_REPORT."""
    from .metrics import normalized_gain

    def metric_value(path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if metric not in doc:
            raise click.ClickException(f"{path}: no metric {metric!r}")
        value = doc[metric]
        return value["mean"] if isinstance(value, dict) else value

    g = normalized_gain(metric_value(guided_report), metric_value(baseline_report), metric)
    click.echo(json.dumps(dataclasses.asdict(g), indent=2))


@main.group()
def data():
    """Corpus preparation commands."""


@data.command("build-limited")
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--bonafide-count", default=400, show_default=True)
@click.option("--per-attack-count", default=50, show_default=True)
@click.option("--attack-types", default=None,
              help="Comma-separated list; defaults to the standard eight.")
@click.option("--seed", default=0, show_default=True)
def build_limited(pool_path, out_path, bonafide_count, per_attack_count, attack_types, seed):
    """Draw the class/sensor-balanced limited corpus from a pool manifest."""
    from .data import LimitedDataSpec, build_limited_manifest, read_manifest, write_manifest

    kwargs = dict(bonafide_count=bonafide_count, per_attack_count=per_attack_count, seed=seed)
    if attack_types:
        kwargs["attack_types"] = tuple(attack_types.split(","))
    manifest = build_limited_manifest(read_manifest(pool_path), LimitedDataSpec(**kwargs))
    write_manifest(manifest, out_path)
    click.echo(f"wrote {len(manifest)} records to {out_path}")


@data.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--fraction", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def split(manifest_path, out_path, fraction, seed):
    """Assign a stratified validation split."""
    from .data import read_manifest, split_validation, write_manifest

    manifest = split_validation(read_manifest(manifest_path), fraction, seed)
    write_manifest(manifest, out_path)
    click.echo(f"wrote {out_path}")


@data.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n-train", default=256, show_default=True)
@click.option("--n-test", default=128, show_default=True)
@click.option("--image-size", default=224, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synthetic(out_dir, n_train, n_test, image_size, seed):
    """Generate the synthetic patch corpus with saliency and a manifest."""
    from .synthetic import SyntheticSpec, make_synthetic_corpus

    spec = SyntheticSpec(n_train=n_train, n_test=n_test, image_size=image_size, seed=seed)
    path = make_synthetic_corpus(out_dir, spec)
    click.echo(f"wrote {path}")


@data.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--exports-dir", required=True, type=click.Path(exists=True),
              help="Directory of AnnotationExport JSON files.")
@click.option("--saliency-dir", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--min-annotators", default=2, show_default=True)
def ingest(manifest_path, exports_dir, saliency_dir, out_path, min_annotators):
    """Rasterize and fuse annotation exports into human saliency maps."""
    from .annotations import ingest_annotations, load_export
    from .data import read_manifest, write_manifest

    exports = [load_export(p) for p in sorted(Path(exports_dir).glob("*.json"))]
    manifest = ingest_annotations(
        exports, read_manifest(manifest_path), saliency_dir, min_annotators
    )
    write_manifest(manifest, out_path)
    attached = sum(1 for r in manifest.records if r.saliency_path)
    click.echo(f"wrote {out_path} ({attached} records with saliency)")


@main.group()
def saliency():
    """Pseudosaliency map generation."""


@saliency.command()
@click.option("--points", "points_path", required=True, type=click.Path(exists=True),
              help="Minutiae interchange file (x,y[,angle[,quality]] per line).")
@click.option("--width", required=True, type=int)
@click.option("--height", required=True, type=int)
@click.option("--radius", default=10.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def minutiae(points_path, width, height, radius, out_path):
    """Stamp minutiae points into an FOI saliency map."""
    from .pseudosaliency import minutiae_saliency, parse_minutiae_file
    from .saliency import save_saliency

    m = minutiae_saliency(parse_minutiae_file(points_path), (height, width), radius)
    save_saliency(m, out_path)
    click.echo(f"wrote {out_path}")


@saliency.command()
@click.option("--quality", "quality_path", required=True, type=click.Path(exists=True))
@click.option("--low-contrast", "contrast_path", required=True, type=click.Path(exists=True))
@click.option("--l-max", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def quality(quality_path, contrast_path, l_max, out_path):
    """Build low-quality saliency from quality and low-contrast grids."""
    from .pseudosaliency import load_quality_inputs, low_quality_saliency
    from .saliency import save_saliency

    m = low_quality_saliency(load_quality_inputs(quality_path, contrast_path, l_max))
    save_saliency(m, out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--annotators", required=True, help="Comma-separated annotator ids.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--target", default=2, show_default=True, help="Annotators per sample.")
@click.option("--bonafide-quota", default=16, show_default=True)
@click.option("--per-attack-quota", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def assign(manifest_path, annotators, out_path, target, bonafide_quota, per_attack_quota, seed):
    """Precompute the annotator assignment plan."""
    from .data import read_manifest
    from .server import PlanParams, build_assignment, save_plan

    plan = build_assignment(
        read_manifest(manifest_path),
        annotators.split(","),
        PlanParams(target, bonafide_quota, per_attack_quota),
        seed,
    )
    save_plan(plan, out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--storage", "storage_dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8008, show_default=True)
def serve(manifest_path, plan_path, storage_dir, host, port):
    """Serve the annotation collection API."""
    from .data import read_manifest
    from .server import load_plan, serve as run_server

    run_server(read_manifest(manifest_path), load_plan(plan_path), storage_dir, host, port)


if __name__ == "__main__":
    main()
