import json

import numpy as np
import pytest
from click.testing import CliRunner

from sgpad.cli import main
from sgpad.data import read_manifest, save_image
from sgpad.saliency import load_saliency


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    from sgpad.synthetic import SyntheticSpec, make_synthetic_corpus

    out = tmp_path_factory.mktemp("clicorpus")
    return make_synthetic_corpus(
        out, SyntheticSpec(n_train=24, n_test=8, image_size=32, cell=4, seed=0)
    )


def scenario_config(corpus, **overrides):
    doc = {
        "scenario": "S3",
        "manifest_path": str(corpus),
        "guidance": "cyborg",
        "alpha": 0.5,
        "saliency_source": "synthetic",
        "granularity": "FOI",
        "runs": 1,
        "epochs": 1,
        "batch_size": 8,
        "image_size": 32,
    }
    doc.update(overrides)
    return doc


class TestTrainReportGain:
    def test_train_then_report(self, runner, corpus, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(scenario_config(corpus)), encoding="utf-8")
        run_dir = tmp_path / "run"
        result = runner.invoke(main, ["train", "--config", str(config_path),
                                      "--out", str(run_dir)])
        assert result.exit_code == 0, result.output
        assert (run_dir / "aggregate.json").exists()

        result = runner.invoke(main, ["report", "--run-dir", str(run_dir)])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert "aggregate" in doc and "auc" in doc["aggregate"]

    def test_report_with_competitors(self, runner, corpus, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps(scenario_config(corpus, guidance="none", scenario="S2",
                                       alpha=None, saliency_source=None, granularity=None)),
            encoding="utf-8",
        )
        run_dir = tmp_path / "run"
        runner.invoke(main, ["train", "--config", str(config_path), "--out", str(run_dir)])
        comp = tmp_path / "competitors.json"
        comp.write_text("[0.99, 0.01]", encoding="utf-8")
        result = runner.invoke(
            main, ["report", "--run-dir", str(run_dir), "--competitors", str(comp)]
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert 1 <= doc["placement_range"][0] <= doc["placement_range"][1] <= 3

    def test_gain_command(self, runner, tmp_path):
        guided = tmp_path / "guided.json"
        baseline = tmp_path / "baseline.json"
        guided.write_text(json.dumps({"auc": 0.961}), encoding="utf-8")
        baseline.write_text(json.dumps({"auc": 0.946}), encoding="utf-8")
        result = runner.invoke(main, ["report", "gain", str(guided), str(baseline),
                                      "--metric", "auc"])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert doc["normalized_gain"] * 100 == pytest.approx(27.8, abs=0.1)

    def test_gain_accepts_aggregate_style_values(self, runner, tmp_path):
        guided = tmp_path / "guided.json"
        baseline = tmp_path / "baseline.json"
        guided.write_text(json.dumps({"auc": {"mean": 0.991, "std": 0.001}}), encoding="utf-8")
        baseline.write_text(json.dumps({"auc": {"mean": 0.990, "std": 0.001}}), encoding="utf-8")
        result = runner.invoke(main, ["report", "gain", str(guided), str(baseline)])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["normalized_gain"] * 100 == pytest.approx(10.0, abs=0.1)

    def test_sweep(self, runner, corpus, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(scenario_config(corpus)), encoding="utf-8")
        result = runner.invoke(
            main,
            ["sweep", "--config", str(config_path), "--alphas", "0.3,0.7",
             "--out", str(tmp_path / "sweep")],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "sweep" / "alpha_0.3" / "aggregate.json").exists()
        assert (tmp_path / "sweep" / "alpha_0.7" / "aggregate.json").exists()


class TestDataCommands:
    def test_synthetic_and_split(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["data", "synthetic", "--out", str(tmp_path / "c"), "--n-train", "8",
             "--n-test", "4", "--image-size", "32"],
        )
        assert result.exit_code == 0, result.output
        manifest_path = tmp_path / "c" / "manifest.csv"
        assert manifest_path.exists()
        result = runner.invoke(
            main,
            ["data", "split", "--manifest", str(manifest_path), "--out",
             str(tmp_path / "c" / "resplit.csv"), "--fraction", "0.25", "--seed", "1"],
        )
        assert result.exit_code == 0, result.output

    def test_build_limited(self, runner, tmp_path):
        from sgpad.data import Label, Manifest, SampleRecord, write_manifest

        records = []
        img = tmp_path / "img.png"
        save_image(np.zeros((8, 8)), img)
        for i in range(30):
            records.append(SampleRecord(f"bona{i}", str(img), Label.BONAFIDE, sensor="x"))
        for i in range(30):
            records.append(
                SampleRecord(f"latex{i}", str(img), Label.SPOOF, attack_type="latex", sensor="x")
            )
        write_manifest(Manifest(tuple(records)), tmp_path / "pool.csv")
        result = runner.invoke(
            main,
            ["data", "build-limited", "--pool", str(tmp_path / "pool.csv"),
             "--out", str(tmp_path / "limited.csv"), "--bonafide-count", "10",
             "--per-attack-count", "10", "--attack-types", "latex"],
        )
        assert result.exit_code == 0, result.output
        assert len(read_manifest(tmp_path / "limited.csv")) == 20

    def test_ingest(self, runner, tmp_path):
        from sgpad.annotations import AnnotationExport, Stroke, save_export
        from sgpad.data import Label, Manifest, SampleRecord, write_manifest

        img = tmp_path / "img.png"
        save_image(np.zeros((32, 32)), img)
        write_manifest(
            Manifest((SampleRecord("s0", str(img), Label.BONAFIDE, sensor="x"),)),
            tmp_path / "m.csv",
        )
        exports_dir = tmp_path / "exports"
        exports_dir.mkdir()
        for annotator in ("a0", "a1"):
            export = AnnotationExport(
                sample_id="s0", annotator_id=annotator, decision="genuine",
                strokes=(Stroke(((5, 5), (10, 10)), 4, 0, 100),), image_dims=(32, 32),
            )
            save_export(export, exports_dir / f"s0__{annotator}.json")
        result = runner.invoke(
            main,
            ["data", "ingest", "--manifest", str(tmp_path / "m.csv"),
             "--exports-dir", str(exports_dir), "--saliency-dir", str(tmp_path / "sal"),
             "--out", str(tmp_path / "m2.csv")],
        )
        assert result.exit_code == 0, result.output
        out = read_manifest(tmp_path / "m2.csv")
        assert out.by_id("s0").saliency_path is not None


class TestSaliencyCommands:
    def test_minutiae(self, runner, tmp_path):
        points = tmp_path / "points.csv"
        points.write_text("x,y\n16,16\n", encoding="utf-8")
        out = tmp_path / "map.png"
        result = runner.invoke(
            main,
            ["saliency", "minutiae", "--points", str(points), "--width", "32",
             "--height", "32", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        m = load_saliency(out)
        assert m.values[16, 16] == 1.0

    def test_quality(self, runner, tmp_path):
        from PIL import Image

        Image.fromarray(np.full((8, 8), 2, dtype=np.uint8), "L").save(tmp_path / "q.png")
        Image.fromarray(np.zeros((8, 8), dtype=np.uint8), "L").save(tmp_path / "c.png")
        out = tmp_path / "map.png"
        result = runner.invoke(
            main,
            ["saliency", "quality", "--quality", str(tmp_path / "q.png"),
             "--low-contrast", str(tmp_path / "c.png"), "--l-max", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        m = load_saliency(out)
        assert m.values[0, 0] == pytest.approx(0.5, abs=1 / 255)


class TestAssign:
    def test_assign_writes_plan(self, runner, tmp_path):
        from sgpad.data import Label, Manifest, SampleRecord, write_manifest
        from sgpad.server import load_plan

        img = tmp_path / "img.png"
        save_image(np.zeros((8, 8)), img)
        records = [SampleRecord(f"bona{i}", str(img), Label.BONAFIDE, sensor="x")
                   for i in range(16)]
        records += [
            SampleRecord(f"latex{i}", str(img), Label.SPOOF, attack_type="latex", sensor="x")
            for i in range(2)
        ]
        write_manifest(Manifest(tuple(records)), tmp_path / "m.csv")
        result = runner.invoke(
            main,
            ["assign", "--manifest", str(tmp_path / "m.csv"), "--annotators", "a0",
             "--out", str(tmp_path / "plan.json")],
        )
        assert result.exit_code == 0, result.output
        plan = load_plan(tmp_path / "plan.json")
        assert len(plan.assignments["a0"]) == 18  # 16 bonafide + 2 latex
