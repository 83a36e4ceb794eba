"""GPS track parsing, position interpolation and distance-paced frame selection."""
from __future__ import annotations

import bisect
import csv
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
# slack on the spacing test so exactly-spaced frames survive rounding
SPACING_TOL_M = 1e-6


class TrackError(ValueError):
    pass


class TrackRangeError(TrackError):
    """Requested instant lies outside the span covered by the track."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon < 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class GpsFix:
    timestamp: datetime
    position: GeoPoint


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    timestamp: datetime
    position: GeoPoint
    survey_date: date


class GpsTrack:
    """Time-ordered sequence of GPS fixes (at least two, strictly increasing)."""

    def __init__(self, fixes: Iterable[GpsFix]):
        self.fixes: tuple[GpsFix, ...] = tuple(fixes)
        if len(self.fixes) < 2:
            raise TrackError("a track needs at least two fixes")
        for i in range(1, len(self.fixes)):
            if self.fixes[i].timestamp <= self.fixes[i - 1].timestamp:
                raise TrackError(
                    f"fix {i} timestamp {self.fixes[i].timestamp.isoformat()} "
                    "is not after the previous fix"
                )
        self._times = [f.timestamp for f in self.fixes]

    def __len__(self):
        return len(self.fixes)

    @property
    def start(self) -> datetime:
        return self._times[0]

    @property
    def end(self) -> datetime:
        return self._times[-1]

    def gap_ends(self, max_gap_s: float) -> list[datetime]:
        """Timestamps of fixes that follow a gap longer than ``max_gap_s`` seconds."""
        limit = timedelta(seconds=max_gap_s)
        return [
            self._times[i]
            for i in range(1, len(self._times))
            if self._times[i] - self._times[i - 1] > limit
        ]


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of mean Earth radius."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def interpolate_position(track: GpsTrack, t: datetime) -> GeoPoint:
    """Linearly interpolate latitude and longitude at instant ``t``.

    Exact fix positions are returned when ``t`` coincides with a fix.
    """
    times = track._times
    if t < times[0] or t > times[-1]:
        raise TrackRangeError(
            f"{t.isoformat()} outside track span "
            f"[{times[0].isoformat()}, {times[-1].isoformat()}]"
        )
    i = bisect.bisect_left(times, t)
    if times[i] == t:
        return track.fixes[i].position
    f0, f1 = track.fixes[i - 1], track.fixes[i]
    frac = (t - f0.timestamp) / (f1.timestamp - f0.timestamp)
    p0, p1 = f0.position, f1.position
    return GeoPoint(p0.lat + frac * (p1.lat - p0.lat), p0.lon + frac * (p1.lon - p0.lon))


def subsample_frames(
    track: GpsTrack,
    frame_times: Sequence[tuple[str, datetime]] | Sequence[datetime],
    spacing: float = 4.0,
    *,
    max_gap_s: float = 30.0,
    time_offset_s: float = 0.0,
    survey_date: date | None = None,
) -> list[FrameRecord]:
    """Greedy distance-paced frame selection.

    The first in-range frame is always kept; later frames are kept when they
    are at least ``spacing`` meters (haversine) from the last kept frame, or
    when they are the first frame after a GPS gap longer than ``max_gap_s``.
    Frames may be given as ``(frame_id, timestamp)`` pairs or bare instants,
    in which case ids are the zero-padded input index. ``time_offset_s`` is
    added to frame timestamps to bring them onto the GPS clock.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    items = [
        (ft if isinstance(ft, tuple) else (f"{i:06d}", ft)) for i, ft in enumerate(frame_times)
    ]
    offset = timedelta(seconds=time_offset_s)
    gaps = track.gap_ends(max_gap_s)

    kept: list[FrameRecord] = []
    last_pos: GeoPoint | None = None
    prev_t: datetime | None = None
    skipped = 0
    for frame_id, t in items:
        t = t + offset
        if prev_t is not None and t < prev_t:
            raise TrackError(f"frame times not sorted at frame {frame_id}")
        if t < track.start or t > track.end:
            skipped += 1
            continue
        pos = interpolate_position(track, t)
        crossed_gap = prev_t is not None and any(prev_t < g <= t for g in gaps)
        prev_t = t
        if last_pos is None or crossed_gap or haversine_distance(last_pos, pos) >= spacing - SPACING_TOL_M:
            day = survey_date or t.astimezone(timezone.utc).date()
            kept.append(FrameRecord(frame_id, t, pos, day))
            last_pos = pos
    if skipped:
        log.warning("skipped %d frame(s) outside the GPS track span", skipped)
    return kept


def count_out_of_span(track: GpsTrack, times: Iterable[datetime], time_offset_s: float = 0.0) -> int:
    offset = timedelta(seconds=time_offset_s)
    return sum(1 for t in times if not track.start <= t + offset <= track.end)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        raise ValueError(f"timestamp without UTC offset: {text!r}")
    return t.astimezone(timezone.utc)


def format_timestamp(t: datetime) -> str:
    return t.astimezone(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


def read_gps_track(path: str | Path) -> GpsTrack:
    """Read a ``timestamp,lat,lon`` CSV file."""
    fixes = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"timestamp", "lat", "lon"} <= set(reader.fieldnames):
            raise TrackError(f"{path}: expected header timestamp,lat,lon")
        for lineno, row in enumerate(reader, start=2):
            try:
                fixes.append(
                    GpsFix(parse_timestamp(row["timestamp"]), GeoPoint(float(row["lat"]), float(row["lon"])))
                )
            except ValueError as exc:
                raise TrackError(f"{path}:{lineno}: {exc}") from exc
    return GpsTrack(fixes)


def read_frame_times(path: str | Path) -> list[tuple[str, datetime]]:
    """Read a ``frame_id,timestamp`` CSV file, sorted by timestamp then id."""
    out = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"frame_id", "timestamp"} <= set(reader.fieldnames):
            raise TrackError(f"{path}: expected header frame_id,timestamp")
        for lineno, row in enumerate(reader, start=2):
            fid = row["frame_id"].strip()
            if fid in seen:
                raise TrackError(f"{path}:{lineno}: duplicate frame_id {fid!r}")
            seen.add(fid)
            try:
                out.append((fid, parse_timestamp(row["timestamp"])))
            except ValueError as exc:
                raise TrackError(f"{path}:{lineno}: {exc}") from exc
    out.sort(key=lambda item: (item[1], item[0]))
    return out


FRAME_FIELDS = ["frame_id", "timestamp", "lat", "lon", "survey_date"]


def frame_rows(frames: Iterable[FrameRecord]) -> list[list[str]]:
    return [
        [f.frame_id, format_timestamp(f.timestamp), f"{f.position.lat:.8f}", f"{f.position.lon:.8f}",
         f.survey_date.isoformat()]
        for f in frames
    ]


def read_frames_csv(path: str | Path) -> list[FrameRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            FrameRecord(
                row["frame_id"],
                parse_timestamp(row["timestamp"]),
                GeoPoint(float(row["lat"]), float(row["lon"])),
                date.fromisoformat(row["survey_date"]),
            )
            for row in csv.DictReader(fh)
        ]
