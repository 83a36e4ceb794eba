"""Pipeline configuration: a TOML key/value file with an optional [encoding] table and [[views]] list."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .orthorect import DEFAULT_VIEWS, ViewSpec
from .stats.encoding import EncodingConfig


class ConfigError(ValueError):
    pass


PATH_KEYS = (
    "frames_dir", "gps_file", "frame_times_file", "geometry_file", "attributes_file",
    "detections_file", "reference_file",
)
DETECTORS = ("stub", "file", "command")


@dataclass
class PipelineConfig:
    frames_dir: Path | None = None
    gps_file: Path | None = None
    frame_times_file: Path | None = None
    geometry_file: Path | None = None
    attributes_file: Path | None = None
    detections_file: Path | None = None
    reference_file: Path | None = None
    observation_files: list[Path] = field(default_factory=list)
    output_dir: Path = Path("out")
    survey_date: date | None = None
    detector: str = "stub"
    detector_command: str | None = None
    stub_seed_salt: int = 0
    stub_count: str = "poisson:1.5"
    pedestrian_class_index: int = -1
    spacing_m: float = 4.0
    max_gap_s: float = 30.0
    time_offset_s: float = 0.0
    confidence_threshold: float = 0.80
    image_unit: str = "view"
    image_ext: str = "png"
    grid_cells: int = 64
    jobs: int = 1
    views: tuple[ViewSpec, ...] = DEFAULT_VIEWS
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    base_dir: Path = Path(".")

    def validate(self, required: tuple[str, ...] = ()) -> "PipelineConfig":
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError(f"confidence_threshold must lie in [0, 1], got {self.confidence_threshold}")
        if self.spacing_m <= 0:
            raise ConfigError("spacing_m must be positive")
        if self.max_gap_s <= 0:
            raise ConfigError("max_gap_s must be positive")
        if self.image_unit not in ("view", "frame"):
            raise ConfigError(f"image_unit must be 'view' or 'frame', got {self.image_unit!r}")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.detector == "command" and not self.detector_command:
            raise ConfigError("detector = 'command' needs detector_command")
        if self.detector == "file" and self.detections_file is None:
            raise ConfigError("detector = 'file' needs detections_file")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.grid_cells < 1:
            raise ConfigError("grid_cells must be >= 1")
        if self.image_ext not in ("png", "jpg", "jpeg"):
            raise ConfigError(f"image_ext must be png or jpg, got {self.image_ext!r}")
        if not self.views:
            raise ConfigError("at least one view is required")
        sides = [v.side for v in self.views]
        if len(set(sides)) != len(sides):
            raise ConfigError("view sides must be unique")
        if not 0.0 <= self.encoding.white_threshold <= 1.0:
            raise ConfigError("white_threshold must lie in [0, 1]")
        for key in required:
            if getattr(self, key) is None:
                raise ConfigError(f"{key} is required for this command")
        for key in PATH_KEYS:
            p = getattr(self, key)
            if p is not None and not p.exists():
                raise ConfigError(f"{key}: path does not exist: {p}")
        for p in self.observation_files:
            if not p.exists():
                raise ConfigError(f"observation_files: path does not exist: {p}")
        return self

    def digest(self) -> str:
        """SHA-256 over settings that affect outputs; excludes jobs and output location."""
        payload = {}
        for f in dataclasses.fields(self):
            if f.name in ("jobs", "output_dir", "base_dir"):
                continue
            payload[f.name] = _jsonable(getattr(self, f.name), self.base_dir)
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(v: Any, base: Path):
    if isinstance(v, Path):
        try:
            return Path(os.path.relpath(v, base)).as_posix()
        except ValueError:
            return v.as_posix()
    if isinstance(v, date):
        return v.isoformat()
    if dataclasses.is_dataclass(v):
        return {f.name: _jsonable(getattr(v, f.name), base) for f in dataclasses.fields(v)}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x, base) for x in v]
    if hasattr(v, "value"):  # enums
        return v.value
    return v


def _date(v) -> date:
    return v if isinstance(v, date) else date.fromisoformat(str(v))


def config_from_dict(data: dict, base_dir: str | Path = ".") -> PipelineConfig:
    base = Path(base_dir)
    data = dict(data)
    known = {f.name for f in dataclasses.fields(PipelineConfig)} - {"base_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    kw: dict[str, Any] = {"base_dir": base}
    try:
        for key, val in data.items():
            if key in PATH_KEYS or key == "output_dir":
                kw[key] = base / val
            elif key == "observation_files":
                kw[key] = [base / p for p in val]
            elif key == "survey_date":
                kw[key] = _date(val)
            elif key == "views":
                kw[key] = tuple(ViewSpec(**v) for v in val)
            elif key == "encoding":
                enc = dict(val)
                if "vaccine_date" in enc:
                    enc["vaccine_date"] = _date(enc["vaccine_date"])
                if "excluded_dates" in enc:
                    enc["excluded_dates"] = tuple(_date(d) for d in enc["excluded_dates"])
                if isinstance(enc.get("income_thresholds"), list):
                    enc["income_thresholds"] = tuple(float(t) for t in enc["income_thresholds"])
                kw[key] = EncodingConfig(**enc)
            else:
                kw[key] = val
        return PipelineConfig(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, path.parent)


DEFAULT_CONFIG_TEXT = """\
# svipipe configuration; relative paths resolve against this file's directory
frames_dir = "frames"              # <frame_id>.png|jpg equirectangular frames
gps_file = "gps.csv"               # timestamp,lat,lon (RFC 3339)
frame_times_file = "frame_times.csv"  # frame_id,timestamp
geometry_file = "regions.geojson"  # FeatureCollection with GEOID properties
# attributes_file = "attributes.csv"  # geoid,median_income,pct_white
# detections_file = "detections.jsonl"
# reference_file = "mobility.csv"     # date,value
# observation_files = ["out/observations.csv"]
output_dir = "out"
# survey_date = "2021-07-10"       # default: UTC date of the first kept frame

detector = "stub"                  # stub | file | command
# detector_command = "my-detector --in {input_dir} --out {output}"
stub_seed_salt = 0
stub_count = "poisson:1.5"         # poisson:<mean> | fixed:<n> | uniform:<lo>-<hi> | always0
pedestrian_class_index = -1

spacing_m = 4.0
max_gap_s = 30.0
time_offset_s = 0.0
confidence_threshold = 0.8
image_unit = "view"                # view | frame
image_ext = "png"
grid_cells = 64
jobs = 1

[encoding]
vaccine_date = "2021-04-15"
income_thresholds = "quintiles"    # or four ascending values
white_threshold = 0.555
excluded_dates = []

[[views]]
side = "L"
yaw_offset = -90.0
pitch = 0.0
hfov = 100.0
vfov = 67.0
out_width = 1920
out_height = 1280

[[views]]
side = "R"
yaw_offset = 90.0
pitch = 0.0
hfov = 100.0
vfov = 67.0
out_width = 1920
out_height = 1280
"""
