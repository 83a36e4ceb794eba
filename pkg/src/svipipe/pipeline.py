"""Stage wiring, parallel frame processing, artifact export and the survey manifest.

Every artifact is first written into a private staging directory inside the
output directory and moved into place with an atomic rename only after the
whole command succeeds, so a failed run leaves no partial outputs behind.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import aggregate as agg
from .config import PipelineConfig
from .detect import (
    BoundingBox, Detection, filter_by_confidence, format_detections, ingest_detections,
    run_external_detector, stub_detect,
)
from .geotrack import (
    FRAME_FIELDS, FrameRecord, count_out_of_span, frame_rows, read_frame_times, read_frames_csv,
    read_gps_track, subsample_frames,
)
from .georef import UNMATCHED, GeoCodedDetection, RegionIndex, geocode_detections, load_regions, match_geoid
from .orthorect import Side, ViewSpec, load_equirect, orthorectify, save_view, view_filename
from .stats import (
    EncodingConfig, InsufficientRowsError, RegressionResult, UndefinedCorrelationError,
    encode_observations, format_coefficients, format_summary, ols_fit, pearson_corr, read_attributes,
)

log = logging.getLogger(__name__)

FRAMES_CSV = "frames.csv"
VIEWS_DIR = "views"
RAW_DETECTIONS = "detections_raw.jsonl"
KEPT_DETECTIONS = "detections_kept.jsonl"
DETECTIONS_CSV = "detections.csv"
VIEW_REGIONS_CSV = "view_regions.csv"
OBSERVATIONS_CSV = "observations.csv"
MANIFEST = "manifest.json"
SERIES_CSV = "series.csv"
CORRELATION_JSON = "correlation.json"

DETECTION_FIELDS = ["survey_date", "frame_id", "side", "lat", "lon", "geoid", "confidence", "x", "y", "w", "h"]

RESPONSES = {
    "det_per_image": "Detections_per_Image",
    "sub1_per_image": "Two_Or_More_Peds_per_Image",
    "sub2_per_image": "Three_Or_More_Peds_per_Image",
    "sub3_per_image": "Four_Or_More_Peds_per_Image",
    "sub4_per_image": "Five_Or_More_Peds_per_Image",
}


class PipelineError(RuntimeError):
    def __init__(self, stage: str, artifact: str | None, cause: BaseException):
        where = f" ({artifact})" if artifact else ""
        super().__init__(f"stage {stage!r} failed{where}: {cause}")
        self.stage = stage
        self.artifact = artifact


class _Stager:
    """Collects a command's outputs in a staging directory and commits them together."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        self.dir = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
        self.files: list[str] = []
        self.stage = "setup"
        self.artifact: str | None = None

    def path(self, name: str) -> Path:
        self.artifact = name
        if name not in self.files:
            self.files.append(name)
        return self.dir / name

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return p

    def commit(self) -> None:
        staged_views = self.dir / VIEWS_DIR
        if staged_views.is_dir():
            target = self.out_dir / VIEWS_DIR
            target.mkdir(exist_ok=True)
            for p in sorted(staged_views.iterdir()):
                os.replace(p, target / p.name)
        for name in self.files:
            if name.startswith(VIEWS_DIR + "/") or name == VIEWS_DIR:
                continue
            os.replace(self.dir / name, self.out_dir / name)
        shutil.rmtree(self.dir, ignore_errors=True)

    def abort(self) -> None:
        shutil.rmtree(self.dir, ignore_errors=True)


@contextmanager
def _staged(out_dir: Path) -> Iterator[_Stager]:
    st = _Stager(out_dir)
    try:
        yield st
    except PipelineError:
        st.abort()
        raise
    except Exception as exc:
        st.abort()
        raise PipelineError(st.stage, st.artifact, exc) from exc
    st.commit()


@contextmanager
def _timed(timings: dict, st: _Stager, stage: str):
    st.stage = stage
    st.artifact = None
    t0 = time.perf_counter()
    yield
    timings[stage] = round(time.perf_counter() - t0, 3)
    log.info("stage %s done in %.2fs", stage, timings[stage])


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- stages

def select_frames(cfg: PipelineConfig) -> tuple[list[FrameRecord], dict]:
    track = read_gps_track(cfg.gps_file)
    times = read_frame_times(cfg.frame_times_file)
    frames = subsample_frames(
        track, times, cfg.spacing_m, max_gap_s=cfg.max_gap_s,
        time_offset_s=cfg.time_offset_s, survey_date=cfg.survey_date,
    )
    out_of_span = count_out_of_span(track, (t for _, t in times), cfg.time_offset_s)
    days = {f.survey_date for f in frames}
    if len(days) > 1:
        raise ValueError(f"kept frames span several survey dates {sorted(d.isoformat() for d in days)}; "
                         "set survey_date")
    counts = {"frames_in": len(times), "frames_out_of_span": out_of_span, "frames_kept": len(frames)}
    return frames, counts


def _frame_path(cfg: PipelineConfig, frame_id: str) -> Path:
    for ext in (cfg.image_ext, "png", "jpg", "jpeg"):
        p = cfg.frames_dir / f"{frame_id}.{ext}"
        if p.exists():
            return p
    raise FileNotFoundError(f"no image for frame {frame_id!r} in {cfg.frames_dir}")


@dataclass(frozen=True)
class _FrameTask:
    frame_id: str
    source: Path
    views: tuple[ViewSpec, ...]
    views_dir: Path | None
    ext: str
    stub: tuple[int, str, int] | None  # (salt, count distribution, class index)


def _process_frame(task: _FrameTask) -> tuple[str, list[tuple[Side, int, int]], list[Detection]]:
    img = load_equirect(task.source)
    produced = []
    dets: list[Detection] = []
    for spec in task.views:
        view = orthorectify(img, spec, task.frame_id)
        if task.views_dir is not None:
            name = view_filename(task.frame_id, spec.side, task.ext)
            tmp = task.views_dir / f".{name}.tmp"
            if task.ext == "png":
                save_view(view, tmp)
            else:
                _save_jpeg(view, tmp)
            os.replace(tmp, task.views_dir / name)
        produced.append((spec.side, view.width, view.height))
        if task.stub is not None:
            dets.extend(stub_detect(view, *task.stub))
    return task.frame_id, produced, dets


def _save_jpeg(view, path: Path) -> None:
    from PIL import Image
    Image.fromarray(view.pixels).save(path, format="JPEG", quality=95)


def _parallel_map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    # chunksize 1: idle workers pull the next frame, results come back in task order
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def orthorectify_frames(cfg: PipelineConfig, frames: Sequence[FrameRecord], views_dir: Path | None,
                        with_stub: bool) -> tuple[list[tuple[str, Side]], list[Detection]]:
    """Orthorectify every frame (and optionally stub-detect); merged in frame_id order."""
    stub = (cfg.stub_seed_salt, cfg.stub_count, cfg.pedestrian_class_index) if with_stub else None
    tasks = [
        _FrameTask(f.frame_id, _frame_path(cfg, f.frame_id), cfg.views, views_dir, cfg.image_ext, stub)
        for f in sorted(frames, key=lambda f: f.frame_id)
    ]
    views: list[tuple[str, Side]] = []
    dets: list[Detection] = []
    for i, (fid, produced, fdets) in enumerate(_parallel_map(_process_frame, tasks, cfg.jobs), start=1):
        views.extend((fid, side) for side, _, _ in produced)
        dets.extend(fdets)
        if i % 100 == 0 or i == len(tasks):
            log.info("orthorectified %d/%d frames", i, len(tasks))
    return views, dets


def _sorted_detections(dets: Iterable[Detection]) -> list[Detection]:
    # full key so the order never depends on how a detector emitted its lines
    return sorted(dets, key=lambda d: (d.frame_id, d.side.value, d.box.y, d.box.x, d.box.w, d.box.h, d.scores))


def external_detections(cfg: PipelineConfig, views_dir: Path, scratch: Path) -> list[Detection]:
    if cfg.detector == "file":
        return ingest_detections(cfg.detections_file, cfg.pedestrian_class_index)
    return run_external_detector(cfg.detector_command, views_dir, scratch, cfg.pedestrian_class_index)


def _check_views(dets: Sequence[Detection], views: Iterable[tuple[str, Side]]) -> None:
    known = set(views)
    for d in dets:
        if (d.frame_id, d.side) not in known:
            raise ValueError(f"detection for unknown view {d.frame_id}_{d.side.value}")


def geocode(cfg: PipelineConfig, frames: Sequence[FrameRecord], views: Sequence[tuple[str, Side]],
            kept: Sequence[Detection]) -> tuple[list[GeoCodedDetection], list[tuple[str, Side, str]]]:
    idx = RegionIndex(load_regions(cfg.geometry_file), cfg.grid_cells)
    by_id = {f.frame_id: f for f in frames}
    coded = geocode_detections(kept, by_id, idx)
    frame_geoid = {f.frame_id: match_geoid(f.position, idx) for f in frames}
    view_regions = [(fid, side, frame_geoid[fid]) for fid, side in sorted(views, key=lambda v: (v[0], v[1].value))]
    return coded, view_regions


def format_geocoded(coded: Iterable[GeoCodedDetection]) -> str:
    rows = []
    for g in coded:
        d, b = g.detection, g.detection.box
        rows.append([
            g.survey_date.isoformat(), d.frame_id, d.side.value, f"{g.position.lat:.8f}",
            f"{g.position.lon:.8f}", g.geoid, repr(d.confidence), repr(b.x), repr(b.y), repr(b.w), repr(b.h),
        ])
    return _csv_text(DETECTION_FIELDS, rows)


def read_geocoded(path: Path) -> list[GeoCodedDetection]:
    """Read the geocoded-detections CSV.

    Only the confidence survives in the CSV, so the score vector is rebuilt
    as ``(1 - confidence, confidence)``.
    """
    from .geotrack import GeoPoint
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            c = float(row["confidence"])
            box = BoundingBox(float(row["x"]), float(row["y"]), float(row["w"]), float(row["h"]))
            d = Detection(row["frame_id"], Side(row["side"]), box, (1.0 - c, c), c)
            out.append(GeoCodedDetection(d, GeoPoint(float(row["lat"]), float(row["lon"])), row["geoid"],
                                         date.fromisoformat(row["survey_date"])))
    return out


def format_view_regions(view_regions: Iterable[tuple[str, Side, str]]) -> str:
    return _csv_text(["frame_id", "side", "geoid"], ((f, s.value, g) for f, s, g in view_regions))


def read_view_regions(path: Path) -> list[tuple[str, Side, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["frame_id"], Side(r["side"]), r["geoid"]) for r in csv.DictReader(fh)]


def aggregate(coded: Sequence[GeoCodedDetection], view_regions: Sequence[tuple[str, Side, str]],
              survey_date: date, image_unit: str) -> list[agg.SurveyObservation]:
    return agg.aggregate_survey(coded, (((f, s), g) for f, s, g in view_regions), survey_date, image_unit)


def _survey_date(frames: Sequence[FrameRecord], cfg: PipelineConfig) -> date:
    if cfg.survey_date is not None:
        return cfg.survey_date
    if not frames:
        raise ValueError("no frames kept and no survey_date configured")
    return frames[0].survey_date


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    survey_date: str
    counts: dict
    config_digest: str
    timings_s: dict = field(default_factory=dict)

    def check(self) -> None:
        c = self.counts
        problems = []
        if c["frames_kept"] > c["frames_in"] - c["frames_out_of_span"]:
            problems.append("frames_kept exceeds in-span frames")
        if c["detections_kept"] + c["detections_filtered"] != c["detections_raw"]:
            problems.append("kept + filtered != raw detections")
        if c["detections_unmatched"] > c["detections_kept"]:
            problems.append("unmatched exceeds kept detections")
        if c["views_produced"] > c["frames_kept"] * c.get("views_per_frame", 1):
            problems.append("more views than frames allow")
        if problems:
            raise AssertionError("manifest count algebra violated: " + "; ".join(problems))

    def to_json(self) -> str:
        return json.dumps(
            {"survey_date": self.survey_date, "counts": self.counts,
             "config_digest": self.config_digest, "timings_s": self.timings_s},
            indent=2, sort_keys=True,
        ) + "\n"


def run_survey(cfg: PipelineConfig) -> RunManifest:
    """Full survey chain: subsample, orthorectify, detect, filter, geocode, aggregate."""
    cfg.validate(("frames_dir", "gps_file", "frame_times_file", "geometry_file"))
    out = Path(cfg.output_dir)
    timings: dict = {}
    with _staged(out) as st:
        with _timed(timings, st, "subsample"):
            frames, counts = select_frames(cfg)
            st.write_text(FRAMES_CSV, _csv_text(FRAME_FIELDS, frame_rows(frames)))
            day = _survey_date(frames, cfg)

        with _timed(timings, st, "orthorectify"):
            views_dir = st.path(VIEWS_DIR)
            views_dir.mkdir()
            views, raw = orthorectify_frames(cfg, frames, views_dir, cfg.detector == "stub")
            counts["views_produced"] = len(views)
            counts["views_per_frame"] = len(cfg.views)

        with _timed(timings, st, "detect"):
            if cfg.detector != "stub":
                raw = external_detections(cfg, views_dir, st.path(RAW_DETECTIONS))
                _check_views(raw, views)
            raw = _sorted_detections(raw)
            st.write_text(RAW_DETECTIONS, format_detections(raw))
            counts["detections_raw"] = len(raw)

        with _timed(timings, st, "filter"):
            kept = filter_by_confidence(raw, cfg.confidence_threshold)
            st.write_text(KEPT_DETECTIONS, format_detections(kept))
            counts["detections_kept"] = len(kept)
            counts["detections_filtered"] = len(raw) - len(kept)

        with _timed(timings, st, "geocode"):
            coded, view_regions = geocode(cfg, frames, views, kept)
            st.write_text(DETECTIONS_CSV, format_geocoded(coded))
            st.write_text(VIEW_REGIONS_CSV, format_view_regions(view_regions))
            counts["detections_unmatched"] = sum(g.geoid == UNMATCHED for g in coded)

        with _timed(timings, st, "aggregate"):
            obs = aggregate(coded, view_regions, day, cfg.image_unit)
            st.write_text(OBSERVATIONS_CSV, agg.format_observations(obs))
            counts["observations"] = len(obs)

        manifest = RunManifest(day.isoformat(), counts, cfg.digest(), timings)
        manifest.check()
        st.stage = "manifest"
        st.write_text(MANIFEST, manifest.to_json())
    log.info("survey %s: %s", manifest.survey_date, counts)
    return manifest


# ------------------------------------------------ single-stage commands

def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise PipelineError(stage, path.name, FileNotFoundError(f"missing input {path}; run the earlier stage first"))
    return path


def run_subsample(cfg: PipelineConfig) -> list[FrameRecord]:
    cfg.validate(("gps_file", "frame_times_file"))
    with _staged(Path(cfg.output_dir)) as st:
        st.stage = "subsample"
        frames, _ = select_frames(cfg)
        st.write_text(FRAMES_CSV, _csv_text(FRAME_FIELDS, frame_rows(frames)))
    return frames


def run_orthorectify(cfg: PipelineConfig) -> int:
    cfg.validate(("frames_dir",))
    out = Path(cfg.output_dir)
    frames = read_frames_csv(_need(out / FRAMES_CSV, "orthorectify"))
    with _staged(out) as st:
        st.stage = "orthorectify"
        views_dir = st.path(VIEWS_DIR)
        views_dir.mkdir()
        views, _ = orthorectify_frames(cfg, frames, views_dir, with_stub=False)
    return len(views)


def _produced_views(cfg: PipelineConfig, frames: Sequence[FrameRecord]) -> list[tuple[str, Side]]:
    views_dir = Path(cfg.output_dir) / VIEWS_DIR
    views = []
    for f in sorted(frames, key=lambda f: f.frame_id):
        for spec in cfg.views:
            p = views_dir / view_filename(f.frame_id, spec.side, cfg.image_ext)
            if not p.exists():
                raise PipelineError("detect", p.name, FileNotFoundError("view not produced; run orthorectify"))
            views.append((f.frame_id, spec.side))
    return views


def _stub_on_disk_views(cfg: PipelineConfig, views: Sequence[tuple[str, Side]]) -> list[Detection]:
    from .orthorect import RectilinearView
    import numpy as np
    dims = {spec.side: (spec.out_height, spec.out_width) for spec in cfg.views}
    out = []
    for fid, side in views:
        # the stub ignores pixel content; a blank buffer of the right size suffices
        blank = np.broadcast_to(np.zeros(1, dtype=np.uint8), dims[side] + (3,))
        out.extend(stub_detect(RectilinearView(fid, side, blank), cfg.stub_seed_salt, cfg.stub_count,
                               cfg.pedestrian_class_index))
    return out


def run_detect(cfg: PipelineConfig) -> int:
    cfg.validate()
    out = Path(cfg.output_dir)
    frames = read_frames_csv(_need(out / FRAMES_CSV, "detect"))
    views = _produced_views(cfg, frames)
    with _staged(out) as st:
        st.stage = "detect"
        if cfg.detector == "stub":
            raw = _stub_on_disk_views(cfg, views)
        else:
            raw = external_detections(cfg, out / VIEWS_DIR, st.path(RAW_DETECTIONS))
            _check_views(raw, views)
        raw = _sorted_detections(raw)
        st.write_text(RAW_DETECTIONS, format_detections(raw))
    return len(raw)


def run_filter(cfg: PipelineConfig) -> int:
    cfg.validate()
    out = Path(cfg.output_dir)
    raw = ingest_detections(_need(out / RAW_DETECTIONS, "filter"), cfg.pedestrian_class_index)
    with _staged(out) as st:
        st.stage = "filter"
        kept = filter_by_confidence(raw, cfg.confidence_threshold)
        st.write_text(KEPT_DETECTIONS, format_detections(kept))
    return len(kept)


def run_geocode(cfg: PipelineConfig) -> int:
    cfg.validate(("geometry_file",))
    out = Path(cfg.output_dir)
    frames = read_frames_csv(_need(out / FRAMES_CSV, "geocode"))
    kept = ingest_detections(_need(out / KEPT_DETECTIONS, "geocode"), cfg.pedestrian_class_index)
    views = _produced_views(cfg, frames)
    with _staged(out) as st:
        st.stage = "geocode"
        coded, view_regions = geocode(cfg, frames, views, kept)
        st.write_text(DETECTIONS_CSV, format_geocoded(coded))
        st.write_text(VIEW_REGIONS_CSV, format_view_regions(view_regions))
    return len(coded)


def run_aggregate(cfg: PipelineConfig) -> list[agg.SurveyObservation]:
    cfg.validate()
    out = Path(cfg.output_dir)
    frames = read_frames_csv(_need(out / FRAMES_CSV, "aggregate"))
    coded = read_geocoded(_need(out / DETECTIONS_CSV, "aggregate"))
    view_regions = read_view_regions(_need(out / VIEW_REGIONS_CSV, "aggregate"))
    with _staged(out) as st:
        st.stage = "aggregate"
        obs = aggregate(coded, view_regions, _survey_date(frames, cfg), cfg.image_unit)
        st.write_text(OBSERVATIONS_CSV, agg.format_observations(obs))
    return obs


# ---------------------------------------------------------------- analysis

SERIES_METRICS = ("det_per_image", "sub1_per_image", "sub2_per_image", "sub3_per_image", "sub4_per_image")


def read_reference(path: str | Path) -> list[tuple[date, float]]:
    """Read a ``date,value`` reference mobility CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [(date.fromisoformat(r["date"]), float(r["value"])) for r in csv.DictReader(fh)
                if r.get("value") not in (None, "")]


def export_figure_data(series: Sequence[agg.SeriesPoint],
                       reference: Sequence[tuple[date, float]] | None = None) -> str:
    """Long-format ``date,metric,value`` CSV of the survey series and optional reference."""
    if not series:
        raise ValueError("series is empty")
    rows = []
    for p in series:
        values = [p.detections_per_image] + [p.subset_per_image[k] for k in agg.SUBSET_KS]
        rows.extend((p.survey_date.isoformat(), m, f"{v:.6f}") for m, v in zip(SERIES_METRICS, values))
    for day, v in sorted(reference or ()):
        rows.append((day.isoformat(), "reference", repr(float(v))))
    return _csv_text(["date", "metric", "value"], rows)


def correlation_report(series: Sequence[agg.SeriesPoint],
                       reference: Sequence[tuple[date, float]] | None) -> dict:
    """Pearson correlation of citywide detections per image against a reference series on shared dates."""
    if not reference:
        return {"status": "skipped", "reason": "no reference series supplied"}
    ref = dict(reference)
    pairs = [(p.detections_per_image, ref[p.survey_date]) for p in series if p.survey_date in ref]
    if len(pairs) < 2:
        return {"status": "skipped", "reason": f"only {len(pairs)} survey date(s) align with the reference"}
    try:
        r = pearson_corr([a for a, _ in pairs], [b for _, b in pairs])
    except UndefinedCorrelationError as exc:
        return {"status": "skipped", "reason": str(exc)}
    return {"status": "computed", "pearson_r": r, "n_pairs": len(pairs)}


@dataclass
class AnalysisResult:
    models: dict[str, RegressionResult]
    series: list[agg.SeriesPoint]
    correlation: dict
    dropped: int


def run_analysis(observation_files: Sequence[str | Path], attributes_file: str | Path, encoding: EncodingConfig,
                 out_dir: str | Path, reference_file: str | Path | None = None) -> AnalysisResult:
    """Fit the regression for every response variable and export series and correlation reports."""
    if not observation_files:
        raise ValueError("at least one observation file is required")
    observations: list[agg.SurveyObservation] = []
    for p in sorted(Path(f) for f in observation_files):
        observations.extend(agg.read_observations(p))
    excluded = set(encoding.excluded_dates)
    observations = [o for o in observations if o.survey_date not in excluded]
    attributes = read_attributes(attributes_file)
    reference = read_reference(reference_file) if reference_file else None

    with _staged(Path(out_dir)) as st:
        st.stage = "analyze"
        models = {}
        dropped = 0
        for column, dep_name in RESPONSES.items():
            rows, dropped = encode_observations(observations, attributes, encoding, column)
            if len(rows) <= 11:
                raise InsufficientRowsError(f"{len(rows)} encoded rows; at least 12 are needed to fit the model")
            res = ols_fit(rows, dep_name, encoding.white_threshold)
            models[column] = res
            st.write_text(f"regression_{column}_coefficients.csv", format_coefficients(res))
            st.write_text(f"regression_{column}_summary.csv", format_summary(res))
        if dropped:
            log.warning("dropped %d observation(s) without tract attributes", dropped)
        series = agg.build_series(observations)
        st.write_text(SERIES_CSV, export_figure_data(series, reference))
        corr = correlation_report(series, reference)
        corr["dropped_observations"] = dropped
        st.write_text(CORRELATION_JSON, json.dumps(corr, indent=2, sort_keys=True) + "\n")
    return AnalysisResult(models, series, corr, dropped)


def run_export_figures(observation_files: Sequence[str | Path], out_dir: str | Path,
                       reference_file: str | Path | None = None,
                       excluded_dates: Iterable[date] = ()) -> list[agg.SeriesPoint]:
    observations = []
    for p in sorted(Path(f) for f in observation_files):
        observations.extend(agg.read_observations(p))
    excluded = set(excluded_dates)
    series = agg.build_series(o for o in observations if o.survey_date not in excluded)
    reference = read_reference(reference_file) if reference_file else None
    with _staged(Path(out_dir)) as st:
        st.stage = "export-figures"
        st.write_text(SERIES_CSV, export_figure_data(series, reference))
    return series
