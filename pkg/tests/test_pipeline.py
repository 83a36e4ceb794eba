import dataclasses
import json
import shutil
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

from svipipe import pipeline
from svipipe.aggregate import format_observations
from svipipe.cli import main
from svipipe.config import ConfigError, config_from_dict, load_config
from svipipe.detect import format_detections, stub_detect
from svipipe.geotrack import read_frames_csv
from svipipe.orthorect import RectilinearView, Side
from conftest import FIXTURE
from synth import synthetic_observations, write_attributes

ARTIFACTS = ["frames.csv", "detections.csv", "observations.csv", "view_regions.csv"]


def fixture_config(out: Path, **changes):
    cfg = load_config(FIXTURE / "config.toml")
    return dataclasses.replace(cfg, output_dir=out, **changes)


def without_timings(path: Path) -> dict:
    m = json.loads(path.read_text())
    m.pop("timings_s")
    return m


@pytest.fixture(scope="module")
def serial_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("serial")
    manifest = pipeline.run_survey(fixture_config(out, jobs=1))
    return out, manifest


def test_golden_outputs(serial_run):
    out, manifest = serial_run
    for name in ARTIFACTS:
        assert (out / name).read_bytes() == (FIXTURE / "golden" / name).read_bytes(), name
    assert without_timings(out / "manifest.json") == json.loads((FIXTURE / "golden" / "manifest.json").read_text())
    assert sorted(p.name for p in (out / "views").iterdir())[:2] == ["f000_L.png", "f000_R.png"]
    assert not list(out.glob(".staging-*"))


def test_manifest_count_algebra(serial_run):
    _, m = serial_run
    c = m.counts
    assert c["detections_kept"] + c["detections_filtered"] == c["detections_raw"]
    assert c["frames_kept"] <= c["frames_in"] - c["frames_out_of_span"]
    assert c["views_produced"] == 2 * c["frames_kept"]
    assert set(m.timings_s) == {"subsample", "orthorectify", "detect", "filter", "geocode", "aggregate"}


def test_parallel_run_is_byte_identical(serial_run, tmp_path):
    out1, _ = serial_run
    pipeline.run_survey(fixture_config(tmp_path, jobs=8))
    for name in ARTIFACTS + ["detections_raw.jsonl", "detections_kept.jsonl"]:
        assert (tmp_path / name).read_bytes() == (out1 / name).read_bytes(), name
    for p in (out1 / "views").iterdir():
        assert (tmp_path / "views" / p.name).read_bytes() == p.read_bytes()
    assert without_timings(tmp_path / "manifest.json") == without_timings(out1 / "manifest.json")


def test_invalid_threshold_rejected_before_any_work(tmp_path):
    with pytest.raises(ConfigError, match="confidence_threshold"):
        pipeline.run_survey(fixture_config(tmp_path / "o", confidence_threshold=1.01))
    assert not (tmp_path / "o").exists()


def test_missing_path_named(tmp_path):
    with pytest.raises(ConfigError, match="gps_file"):
        pipeline.run_survey(fixture_config(tmp_path, gps_file=tmp_path / "nope.csv"))


def test_crash_leaves_no_partial_artifacts(tmp_path, monkeypatch, serial_run):
    out = tmp_path / "o"
    out.mkdir()
    (out / "observations.csv").write_text("previous\n")

    def boom(*a, **k):
        raise RuntimeError("disk on fire")
    monkeypatch.setattr(pipeline, "load_regions", boom)
    with pytest.raises(pipeline.PipelineError) as err:
        pipeline.run_survey(fixture_config(out))
    assert err.value.stage == "geocode"
    assert sorted(p.name for p in out.iterdir()) == ["observations.csv"]
    assert (out / "observations.csv").read_text() == "previous\n"


def test_stage_by_stage_cli_equals_run(serial_run, tmp_path):
    out1, _ = serial_run
    cfg = str(FIXTURE / "config.toml")
    for cmd in ["subsample", "orthorectify", "detect", "filter", "geocode", "aggregate"]:
        assert main([cmd, "--config", cfg, "--out", str(tmp_path)]) == 0, cmd
    for name in ARTIFACTS + ["detections_raw.jsonl", "detections_kept.jsonl"]:
        assert (tmp_path / name).read_bytes() == (out1 / name).read_bytes(), name


def test_stage_needs_earlier_output(tmp_path, capsys):
    assert main(["detect", "--config", str(FIXTURE / "config.toml"), "--out", str(tmp_path)]) == 1
    assert "frames.csv" in capsys.readouterr().err


def test_file_detector(serial_run, tmp_path):
    out1, _ = serial_run
    frames = read_frames_csv(out1 / "frames.csv")
    views = [RectilinearView(f.frame_id, side, np.zeros((112, 160, 3), np.uint8))
             for f in frames for side in (Side.LEFT, Side.RIGHT)]
    dets = [d for v in views for d in stub_detect(v, 7, "poisson:2.5")]
    src = tmp_path / "ext.jsonl"
    # shuffled order must not matter
    src.write_text(format_detections(dets[::-1]))
    out = tmp_path / "o"
    pipeline.run_survey(fixture_config(out, detector="file", detections_file=src))
    for name in ["detections.csv", "observations.csv"]:
        assert (out / name).read_bytes() == (out1 / name).read_bytes()


def test_file_detector_unknown_view(tmp_path):
    src = tmp_path / "ext.jsonl"
    src.write_text('{"frame_id": "zzz", "side": "L", "bbox": [1, 1, 2, 2], "scores": [0.1, 0.9]}\n')
    with pytest.raises(pipeline.PipelineError, match="unknown view zzz_L"):
        pipeline.run_survey(fixture_config(tmp_path / "o", detector="file", detections_file=src))


def test_command_detector(serial_run, tmp_path):
    script = tmp_path / "det.py"
    script.write_text(
        "import json, pathlib, sys\n"
        "views, out = pathlib.Path(sys.argv[1]), sys.argv[2]\n"
        "with open(out, 'w') as fh:\n"
        "    for p in sorted(views.glob('*.png')):\n"
        "        fid, side = p.stem.rsplit('_', 1)\n"
        "        fh.write(json.dumps({'frame_id': fid, 'side': side, 'bbox': [1, 2, 3, 4], 'scores': [0.05, 0.95]}) + '\\n')\n"
    )
    out = tmp_path / "o"
    m = pipeline.run_survey(fixture_config(out, detector="command",
                                           detector_command=f"python3 {script} {{input_dir}} {{output}}"))
    assert m.counts["detections_raw"] == m.counts["views_produced"] == m.counts["detections_kept"]


# -- analysis ---------------------------------------------------------------

@pytest.fixture(scope="module")
def analysis_inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("analysis")
    obs, attrs = synthetic_observations(np.random.default_rng(11))
    by_day = {}
    for o in obs:
        by_day.setdefault(o.survey_date, []).append(o)
    files = []
    for day, rows in by_day.items():
        p = d / f"obs_{day.isoformat()}.csv"
        p.write_text(format_observations(rows))
        files.append(p)
    write_attributes(d / "attributes.csv", attrs)
    return d, files, obs


def test_run_analysis_recovers_summer_effect(analysis_inputs, tmp_path):
    d, files, obs = analysis_inputs
    res = pipeline.run_analysis(files, d / "attributes.csv", load_config(FIXTURE / "config.toml").encoding, tmp_path)
    m = res.models["det_per_image"]
    assert m.dep_variable == "Detections_per_Image"
    assert m.coef("Summer") == pytest.approx(0.3, abs=0.05)
    assert "Summer" in m.significant()
    assert m.n_observations == len(obs)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert len([n for n in names if n.startswith("regression_")]) == 10
    assert res.correlation["status"] == "skipped"
    assert json.loads((tmp_path / "correlation.json").read_text())["status"] == "skipped"


def test_analysis_correlation_with_reference(analysis_inputs, tmp_path):
    d, files, _ = analysis_inputs
    ref = tmp_path / "ref.csv"
    days = sorted({date.fromisoformat(p.stem[4:]) for p in files})
    vals = np.random.default_rng(2).normal(size=len(days))
    ref.write_text("date,value\n" + "".join(f"{day.isoformat()},{float(v)!r}\n" for day, v in zip(days, vals)))
    res = pipeline.run_analysis(files, d / "attributes.csv", load_config(FIXTURE / "config.toml").encoding,
                                tmp_path / "o", ref)
    assert res.correlation["status"] == "computed" and res.correlation["n_pairs"] == len(days)
    from svipipe.stats import pearson_corr
    assert res.correlation["pearson_r"] == pytest.approx(
        pearson_corr([p.detections_per_image for p in res.series], vals), abs=1e-12)


def test_empty_reference_is_skipped(analysis_inputs, tmp_path):
    d, files, _ = analysis_inputs
    ref = tmp_path / "ref.csv"
    ref.write_text("date,value\n")
    res = pipeline.run_analysis(files, d / "attributes.csv", load_config(FIXTURE / "config.toml").encoding,
                                tmp_path / "o", ref)
    assert res.correlation["status"] == "skipped"


def test_export_figures_round_trip(analysis_inputs, tmp_path):
    _, files, obs = analysis_inputs
    series = pipeline.run_export_figures(files, tmp_path)
    lines = (tmp_path / "series.csv").read_text().splitlines()
    assert lines[0] == "date,metric,value"
    assert len(lines) - 1 == 5 * len(series) == 5 * len({o.survey_date for o in obs})
    first = series[0]
    pooled = sum(o.n_detections for o in obs if o.survey_date == first.survey_date) / \
        sum(o.n_images for o in obs if o.survey_date == first.survey_date)
    assert float(lines[1].split(",")[2]) == pytest.approx(pooled, abs=5e-7)


def test_analysis_too_few_rows(tmp_path):
    obs, attrs = synthetic_observations(np.random.default_rng(1), n_tracts=2, n_surveys=3)
    p = tmp_path / "o.csv"
    p.write_text(format_observations(obs))
    write_attributes(tmp_path / "a.csv", attrs)
    with pytest.raises(pipeline.PipelineError, match="at least 12"):
        pipeline.run_analysis([p], tmp_path / "a.csv", load_config(FIXTURE / "config.toml").encoding, tmp_path / "x")
    assert not (tmp_path / "x" / "series.csv").exists()


def test_config_digest_ignores_jobs_and_output(tmp_path):
    a = fixture_config(tmp_path / "a", jobs=1)
    b = fixture_config(tmp_path / "b", jobs=8)
    assert a.digest() == b.digest()
    assert a.digest() != dataclasses.replace(a, spacing_m=5.0).digest()
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"spacing": 4})
