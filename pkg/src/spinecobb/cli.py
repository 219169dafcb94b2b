"""Command-line interface.

Exit codes: 0 success, 1 partial batch failure, 2 input or spec error.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import os
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cobb import classify_severity, measure
from .config import MeasureConfig
from .errors import SpineCobbError
from .metrics import evaluate
from .punet import TensorShape, build_spec, closed_form_parameter_count, forward, init_weights, shape_audit
from .raster import read_mask, write_mask
from .report import measure_report, overlay_svg
from .synthspine import SynthSpec, generate, spec_for_cobb

EXIT_OK, EXIT_PARTIAL, EXIT_INPUT = 0, 1, 2
AUTO_SMOKE_PIXELS = 256 * 128


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(obj, path=None) -> None:
    text = _dumps(obj)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _fail(kind: str, message: str) -> None:
    click.echo(_dumps({"error": {"kind": kind, "message": message}}), nl=False)
    click.echo(f"error ({kind}): {message}", err=True)
    sys.exit(EXIT_INPUT)


def _guard(fn):
    """Turn library and I/O errors into a JSON error object and exit code 2."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SpineCobbError as exc:
            _fail(exc.kind, str(exc))
        except OSError as exc:
            _fail("io", str(exc))
        except json.JSONDecodeError as exc:
            _fail("format", f"invalid JSON: {exc}")

    return wrapper


def _config(path) -> MeasureConfig:
    return MeasureConfig.from_file(path) if path else MeasureConfig()


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="spinecobb")
def main():
    """Cobb angle measurement from binary vertebra masks."""


@main.command("measure")
@click.argument("mask", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="MeasureConfig JSON file.")
@click.option("--overlay", type=click.Path(dir_okay=False), help="Write an SVG overlay here.")
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Write the report here instead of stdout.")
@click.option("--threshold", default=128, show_default=True, type=click.IntRange(0, 255))
@click.option("--timestamp", is_flag=True, help="Embed the generation time in the report.")
@_guard
def cmd_measure(mask, config_path, overlay, json_path, threshold, timestamp):
    """Measure the Cobb angle of MASK (PGM or PNG)."""
    config = _config(config_path)
    m = read_mask(mask, threshold)
    result = measure(m, config)
    report = measure_report(mask, result, config, m.width, m.height)
    if timestamp:
        report["generated_at"] = datetime.now(timezone.utc).isoformat()
    if overlay:
        Path(overlay).write_text(overlay_svg(result, m.width, m.height), encoding="utf-8")
    _emit(report, json_path)


@main.command("eval")
@click.argument("pred", type=click.Path(dir_okay=False))
@click.argument("ref", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--json", "json_path", type=click.Path(dir_okay=False))
@_guard
def cmd_eval(pred, ref, config_path, json_path):
    """Dice, SSIM, average Hausdorff distance and object F1 of PRED against REF."""
    config = _config(config_path)
    p, r = read_mask(pred), read_mask(ref)
    metrics = evaluate(p, r, config.iou_threshold, config.min_contour_pixels)
    _emit({"pred": pred, "ref": ref, **metrics.to_dict(), "iou_threshold": config.iou_threshold}, json_path)


def _image_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


@main.command("synth")
@click.argument("spec_path", type=click.Path(dir_okay=False))
@click.argument("outdir", type=click.Path(file_okay=False))
@click.option("--count", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@_guard
def cmd_synth(spec_path, outdir, count, seed):
    """Generate COUNT synthetic spine masks with ground-truth sidecars.

    SPEC_PATH holds SynthSpec fields; an optional "cobb_range": [lo, hi] draws a
    target Cobb angle per image and sets the sinusoid amplitude to match it.
    """
    data = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    cobb_range = data.pop("cobb_range", None)
    base = SynthSpec.from_dict(data)
    base.validate()
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    for i in range(count):
        image_seed = _image_seed(seed, i)
        spec = replace(base, seed=image_seed)
        if cobb_range is not None:
            lo, hi = float(cobb_range[0]), float(cobb_range[1])
            target = float(np.random.default_rng(image_seed).uniform(lo, hi))
            spec = spec_for_cobb(target, spec)
        mask, gt = generate(spec)
        name = f"synth_{i:03d}"
        write_mask(out / f"{name}.pgm", mask)
        sidecar = {"id": name, "seed": image_seed, "width": spec.width, "height": spec.height,
                   "spec": spec.to_dict(), **gt.to_dict()}
        (out / f"{name}.json").write_text(_dumps(sidecar), encoding="utf-8")
        images.append({"id": name, "mask": f"{name}.pgm", "truth": f"{name}.json", "seed": image_seed,
                       "theta": sidecar["cobb"]["theta"]})
    manifest = {"tool": "spinecobb", "version": __version__, "seed": seed, "count": count,
                "spec_sha256": base.digest(), "spec": base.to_dict(), "cobb_range": cobb_range,
                "images": images}
    (out / "manifest.json").write_text(_dumps(manifest), encoding="utf-8")
    _emit(manifest)


@main.command("netcheck")
@click.argument("height", type=int)
@click.argument("width", type=int)
@click.option("--depth", default=4, show_default=True, type=int)
@click.option("--base-channels", default=16, show_default=True, type=int)
@click.option("--smoke", type=click.Choice(["auto", "on", "off"]), default="auto", show_default=True,
              help=f"Random-weights forward run; auto runs it up to {AUTO_SMOKE_PIXELS} pixels.")
@click.option("--seed", default=0, show_default=True, type=int)
@_guard
def cmd_netcheck(height, width, depth, base_channels, smoke, seed):
    """Shape audit of the Progressive U-Net for a 1 x HEIGHT x WIDTH input."""
    spec = build_spec(TensorShape(1, height, width), depth, base_channels)
    report = {
        "input": [1, height, width],
        "depth": depth,
        "base_channels": base_channels,
        "dropout_rate": spec.dropout_rate,
        "layers": shape_audit(spec),
        "parameter_count": spec.parameter_count,
        "closed_form_parameter_count": closed_form_parameter_count(depth, base_channels),
        "side_outputs": [list(s.as_tuple()) for s in spec.side_output_shapes],
        "output": list(spec.output_shape.as_tuple()),
    }
    run = smoke == "on" or (smoke == "auto" and height * width <= AUTO_SMOKE_PIXELS)
    if run:
        image = np.random.default_rng(seed).random((height, width))
        res = forward(spec, init_weights(spec, seed), image)
        maps = (res.output,) + res.side_outputs
        report["smoke"] = {
            "ran": True,
            "seed": seed,
            "output_min": float(res.output.min()),
            "output_max": float(res.output.max()),
            "outputs_in_open_unit_interval": all(bool((m > 0).all() and (m < 1).all()) for m in maps),
            "shapes_match": all(tuple(res.shapes[l.name]) == l.output.as_tuple() for l in spec.layers),
        }
    else:
        report["smoke"] = {"ran": False, "reason": f"skipped (--smoke {smoke}, {height * width} pixels)"}
    _emit(report)


CSV_FIELDS = ["id", "ref_upper", "ref_lower", "ref_theta", "ref_severity", "pred_upper", "pred_lower",
              "pred_theta", "pred_severity", "abs_diff", "severity_agree", "error"]


def _fmt(v):
    return f"{v:.2f}" if isinstance(v, float) else ("" if v is None else str(v))


def _mask_case(case_id: str, pred: Path | None, ref: Path | None, config: MeasureConfig) -> dict:
    row = {"id": case_id}
    try:
        if ref is None or pred is None:
            missing = "ref" if ref is None else "pred"
            raise FileNotFoundError(f"missing {missing} mask for case {case_id}")
        r = measure(read_mask(ref), config).result
        p = measure(read_mask(pred), config).result
    except (SpineCobbError, OSError) as exc:
        row["error"] = f"{getattr(exc, 'kind', 'io')}: {exc}"
        return row
    row.update(ref_upper=r.upper_label, ref_lower=r.lower_label, ref_theta=r.theta, ref_severity=r.severity.value,
               pred_upper=p.upper_label, pred_lower=p.lower_label, pred_theta=p.theta,
               pred_severity=p.severity.value)
    return row


def _angles_rows(path, config: MeasureConfig) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row = {"id": rec["id"]}
            try:
                ref_theta, pred_theta = float(rec["ref_theta"]), float(rec["pred_theta"])
                row.update(
                    ref_upper=rec.get("ref_upper"), ref_lower=rec.get("ref_lower"), ref_theta=ref_theta,
                    ref_severity=classify_severity(ref_theta, config.severity_boundaries).value,
                    pred_upper=rec.get("pred_upper"), pred_lower=rec.get("pred_lower"), pred_theta=pred_theta,
                    pred_severity=classify_severity(pred_theta, config.severity_boundaries).value,
                )
            except (KeyError, ValueError, SpineCobbError) as exc:
                row = {"id": rec.get("id", "?"), "error": f"bad row: {exc}"}
            rows.append(row)
    return rows


def _finish_row(row: dict) -> dict:
    if "error" not in row:
        row["abs_diff"] = abs(row["ref_theta"] - row["pred_theta"])
        row["severity_agree"] = row["ref_severity"] == row["pred_severity"]
    return row


def _case_files(directory: Path) -> dict[str, dict[str, Path]]:
    cases: dict[str, dict[str, Path]] = {}
    for f in sorted(directory.iterdir()):
        for role in ("pred", "ref"):
            for ext in (".pgm", ".png"):
                suffix = f"_{role}{ext}"
                if f.name.endswith(suffix):
                    cases.setdefault(f.name[: -len(suffix)], {})[role] = f
    return cases


def _id_key(case_id: str):
    """Numeric ids sort numerically, everything else after them by name."""
    return (0, int(case_id), "") if case_id.isdigit() else (1, 0, case_id)


def summarize(rows: list[dict]) -> dict:
    ok = [r for r in rows if "error" not in r]
    diffs = [r["abs_diff"] for r in ok]
    agree = sum(1 for r in ok if r["severity_agree"])
    return {
        "cases": len(rows),
        "succeeded": len(ok),
        "failed": len(rows) - len(ok),
        "mean_abs_diff": statistics.fmean(diffs) if diffs else None,
        "median_abs_diff": statistics.median(diffs) if diffs else None,
        "severity_agreement_count": agree,
        "severity_agreement_rate": agree / len(ok) if ok else None,
        "errors": {r["id"]: r["error"] for r in rows if "error" in r},
    }


@main.command("batch")
@click.argument("directory", required=False, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              help="Per-case table (default: batch_results.csv in DIRECTORY, or next to --angles-csv).")
@click.option("--angles-csv", type=click.Path(dir_okay=False),
              help="Skip masks: read id, ref_theta, pred_theta columns from this CSV.")
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Also write the summary here.")
@click.option("--workers", default=4, show_default=True, type=click.IntRange(min=1))
@_guard
def cmd_batch(directory, config_path, csv_path, angles_csv, json_path, workers):
    """Measure <id>_pred.pgm / <id>_ref.pgm pairs in DIRECTORY and compare them."""
    config = _config(config_path)
    if angles_csv:
        rows = _angles_rows(angles_csv, config)
        default_csv = Path(angles_csv).with_name(Path(angles_csv).stem + "_results.csv")
    else:
        if directory is None:
            raise click.UsageError("DIRECTORY is required unless --angles-csv is given")
        cases = _case_files(Path(directory))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda kv: _mask_case(kv[0], kv[1].get("pred"), kv[1].get("ref"), config),
                                 sorted(cases.items())))
        default_csv = Path(directory) / "batch_results.csv"
    rows = sorted((_finish_row(r) for r in rows), key=lambda r: _id_key(r["id"]))

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _fmt(r.get(k)) for k in CSV_FIELDS})
    out_csv = Path(csv_path) if csv_path else default_csv
    out_csv.write_text(buf.getvalue(), encoding="utf-8")

    summary = {"tool": "spinecobb", "version": __version__, "csv": os.fspath(out_csv),
               "mode": "angles" if angles_csv else "masks", **summarize(rows), "config": config.to_dict()}
    if json_path:
        Path(json_path).write_text(_dumps(summary), encoding="utf-8")
    _emit(summary)
    sys.exit(EXIT_PARTIAL if summary["failed"] else EXIT_OK)


if __name__ == "__main__":
    main()
