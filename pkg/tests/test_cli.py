import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner
from scipy import ndimage

from spinecobb.cli import main
from spinecobb.raster import BinaryMask, write_mask
from spinecobb.synthspine import SynthSpec, generate, spec_for_cobb

DATA = Path(__file__).parent / "data"


def schema(name):
    return json.loads(resources.files("spinecobb").joinpath("schemas", f"{name}.schema.json").read_text())


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


@pytest.fixture(scope="module")
def spine_pgm(tmp_path_factory):
    d = tmp_path_factory.mktemp("spine")
    mask, _ = generate(spec_for_cobb(22.0, SynthSpec(jitter=1.0, seed=4)))
    path = d / "spine.pgm"
    write_mask(path, mask)
    return path


@pytest.fixture(scope="module")
def batch_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("batch")
    for i, target in enumerate([8.0, 18.0, 33.0]):
        mask, _ = generate(spec_for_cobb(target, SynthSpec(seed=i)))
        write_mask(d / f"{i + 1}_ref.pgm", mask)
        pred = mask if i == 0 else BinaryMask(ndimage.binary_dilation(mask.pixels))
        write_mask(d / f"{i + 1}_pred.pgm", pred)
    return d


class TestMeasure:
    def test_report(self, spine_pgm, tmp_path):
        svg = tmp_path / "o.svg"
        r = run("measure", spine_pgm, "--overlay", svg)
        assert r.exit_code == 0
        report = json.loads(r.stdout)
        jsonschema.validate(report, schema("measure_report"))
        assert report["cobb"]["theta"] == pytest.approx(22.0, abs=2.0)
        assert report["cobb"]["severity"] == "mild"
        assert len(report["vertebrae"]) == 18 and report["complete"]
        assert svg.read_text().startswith("<svg")

    def test_deterministic(self, spine_pgm, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        sa, sb = tmp_path / "a.svg", tmp_path / "b.svg"
        assert run("measure", spine_pgm, "--json", a, "--overlay", sa).exit_code == 0
        assert run("measure", spine_pgm, "--json", b, "--overlay", sb).exit_code == 0
        assert a.read_bytes() == b.read_bytes()
        assert sa.read_bytes() == sb.read_bytes()

    def test_timestamp_opt_in(self, spine_pgm):
        assert "generated_at" not in json.loads(run("measure", spine_pgm).stdout)
        assert "generated_at" in json.loads(run("measure", spine_pgm, "--timestamp").stdout)

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n4 x\n255\n")
        r = run("measure", bad)
        assert r.exit_code == 2
        err = json.loads(r.stdout)
        jsonschema.validate(err, schema("error"))
        assert err["error"]["kind"] == "format"
        assert "byte offset" in err["error"]["message"]

    def test_missing_file(self, tmp_path):
        r = run("measure", tmp_path / "nope.pgm")
        assert r.exit_code == 2
        assert json.loads(r.stdout)["error"]["kind"] == "io"

    def test_empty_mask(self, tmp_path):
        p = tmp_path / "empty.pgm"
        write_mask(p, BinaryMask.blank(64, 64))
        r = run("measure", p)
        assert r.exit_code == 2
        assert json.loads(r.stdout)["error"]["kind"] == "empty-spine"

    def test_config(self, spine_pgm, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"min_contour_pixels": 100, "gap": 4}))
        report = json.loads(run("measure", spine_pgm, "--config", cfg).stdout)
        assert report["config"]["gap"] == 4
        assert report["effective_min_contour_pixels"] == 100
        cfg.write_text(json.dumps({"gap": 0}))
        r = run("measure", spine_pgm, "--config", cfg)
        assert r.exit_code == 2 and json.loads(r.stdout)["error"]["kind"] == "config"


class TestEval:
    def test_identical(self, spine_pgm):
        r = run("eval", spine_pgm, spine_pgm)
        assert r.exit_code == 0
        out = json.loads(r.stdout)
        jsonschema.validate(out, schema("seg_metrics"))
        assert out["dice"] == 1.0 and out["f1"] == 1.0 and out["avg_hausdorff"] == 0.0

    def test_deterministic(self, batch_dir):
        args = ("eval", batch_dir / "2_pred.pgm", batch_dir / "2_ref.pgm")
        assert run(*args).stdout_bytes == run(*args).stdout_bytes

    def test_shape_mismatch(self, spine_pgm, tmp_path):
        small = tmp_path / "s.pgm"
        write_mask(small, BinaryMask.blank(32, 32))
        r = run("eval", spine_pgm, small)
        assert r.exit_code == 2 and json.loads(r.stdout)["error"]["kind"] == "shape"


class TestSynth:
    def test_outputs(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"jitter": 1.0, "cobb_range": [5, 40]}))
        out = tmp_path / "out"
        r = run("synth", spec, out, "--count", 3, "--seed", 9)
        assert r.exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert [im["id"] for im in manifest["images"]] == ["synth_000", "synth_001", "synth_002"]
        for im in manifest["images"]:
            truth = json.loads((out / im["truth"]).read_text())
            jsonschema.validate(truth, schema("truth"))
            assert 3 <= truth["cobb"]["theta"] <= 42
            assert (out / im["mask"]).exists()

    def test_deterministic(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"amplitude": 30.0, "jitter": 0.5}))
        a, b = tmp_path / "a", tmp_path / "b"
        run("synth", spec, a, "--count", 2, "--seed", 1)
        run("synth", spec, b, "--count", 2, "--seed", 1)
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes()

    def test_infeasible(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"height": 500}))
        r = run("synth", spec, tmp_path / "o")
        assert r.exit_code == 2
        err = json.loads(r.stdout)["error"]
        assert err["kind"] == "spec-infeasible" and "vertebra" in err["message"]

    def test_bad_json(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text("{nope")
        r = run("synth", spec, tmp_path / "o")
        assert r.exit_code == 2 and json.loads(r.stdout)["error"]["kind"] == "format"


class TestNetcheck:
    def test_full_size_audit(self):
        r = run("netcheck", 1024, 512)
        assert r.exit_code == 0
        out = json.loads(r.stdout)
        assert out["side_outputs"] == [[1, 128, 64], [1, 256, 128], [1, 512, 256]]
        assert out["output"] == [1, 1024, 512]
        assert out["parameter_count"] == out["closed_form_parameter_count"]
        assert out["smoke"]["ran"] is False

    def test_smoke_small(self):
        r = run("netcheck", 64, 32, "--base-channels", 4)
        out = json.loads(r.stdout)
        assert out["smoke"]["ran"] and out["smoke"]["outputs_in_open_unit_interval"]
        assert out["smoke"]["shapes_match"]
        assert run("netcheck", 64, 32, "--base-channels", 4).stdout_bytes == r.stdout_bytes

    def test_indivisible(self):
        r = run("netcheck", 1000, 512)
        assert r.exit_code == 2
        err = json.loads(r.stdout)["error"]
        assert err["kind"] == "shape" and "divisible by 16" in err["message"]


class TestBatch:
    def test_masks(self, batch_dir, tmp_path):
        out_csv = tmp_path / "r.csv"
        r = run("batch", batch_dir, "--csv", out_csv, "--workers", 2)
        assert r.exit_code == 0
        summary = json.loads(r.stdout)
        jsonschema.validate(summary, schema("batch_summary"))
        assert summary["cases"] == 3 and summary["failed"] == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert [row["id"] for row in rows] == ["1", "2", "3"]
        assert rows[0]["abs_diff"] == "0.00"
        assert all(float(row["abs_diff"]) < 2.0 for row in rows)

    def test_deterministic_across_workers(self, batch_dir, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        ra = run("batch", batch_dir, "--csv", a, "--workers", 1)
        rb = run("batch", batch_dir, "--csv", b, "--workers", 3)
        assert a.read_bytes() == b.read_bytes()
        strip = lambda s: {k: v for k, v in json.loads(s).items() if k != "csv"}
        assert strip(ra.stdout) == strip(rb.stdout)

    def test_partial_failure(self, batch_dir, tmp_path):
        d = tmp_path / "cases"
        d.mkdir()
        for f in batch_dir.glob("1_*.pgm"):
            (d / f.name).write_bytes(f.read_bytes())
        (d / "2_pred.pgm").write_bytes(b"garbage")
        write_mask(d / "2_ref.pgm", BinaryMask.blank(16, 16))
        r = run("batch", d)
        assert r.exit_code == 1
        summary = json.loads(r.stdout)
        assert summary["failed"] == 1 and "2" in summary["errors"]
        assert (d / "batch_results.csv").exists()

    def test_angles_csv(self, tmp_path):
        src = tmp_path / "angles.csv"
        src.write_bytes((DATA / "reference_angles.csv").read_bytes())
        r = run("batch", "--angles-csv", src)
        assert r.exit_code == 0
        summary = json.loads(r.stdout)
        assert summary["mode"] == "angles"
        assert summary["severity_agreement_count"] == 15
        assert summary["median_abs_diff"] == pytest.approx(2.41, abs=1e-9)
        rows = list(csv.DictReader((tmp_path / "angles_results.csv").open()))
        assert [row["id"] for row in rows] == [str(i) for i in range(1, 16)]
        assert rows[1]["ref_severity"] == "normal" and rows[6]["pred_severity"] == "moderate"

    def test_requires_directory(self):
        r = CliRunner().invoke(main, ["batch"])
        assert r.exit_code == 2


def test_version():
    r = run("--version")
    assert r.exit_code == 0 and "spinecobb" in r.stdout


def test_mask_png_roundtrip(tmp_path, spine_pgm):
    from spinecobb.raster import read_mask
    png = tmp_path / "s.png"
    write_mask(png, read_mask(spine_pgm))
    a = json.loads(run("measure", spine_pgm).stdout)
    b = json.loads(run("measure", png).stdout)
    assert a["cobb"] == b["cobb"]
    assert np.isclose(a["vertebrae"][3]["upper_angle"], b["vertebrae"][3]["upper_angle"])
