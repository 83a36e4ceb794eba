"""Per-survey, per-region reduction of geocoded detections."""
from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

from .georef import UNMATCHED, GeoCodedDetection

SUBSET_KS = (1, 2, 3, 4)

OBSERVATION_FIELDS = [
    "survey_date", "geoid", "n_images", "n_detections", "det_per_image",
    "sub1", "sub2", "sub3", "sub4",
    "sub1_per_image", "sub2_per_image", "sub3_per_image", "sub4_per_image",
]


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class SurveyObservation:
    survey_date: date
    geoid: str
    n_images: int
    n_detections: int
    subset_counts: Mapping[int, int]

    @property
    def detections_per_image(self) -> float:
        return self.n_detections / self.n_images if self.n_images else 0.0

    @property
    def subset_per_image(self) -> dict[int, float]:
        return {k: (c / self.n_images if self.n_images else 0.0) for k, c in self.subset_counts.items()}

    def response(self, name: str) -> float:
        """Response variable by observation-CSV column name."""
        if name == "det_per_image":
            return self.detections_per_image
        if name.startswith("sub") and name.endswith("_per_image"):
            return self.subset_per_image[int(name[3:-len("_per_image")])]
        raise KeyError(name)


def count_subset_k(view_detection_counts: Mapping[Hashable, int] | Iterable[int], k: int) -> int:
    """Detections that share their view with at least ``k`` other detections."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = view_detection_counts.values() if isinstance(view_detection_counts, Mapping) else view_detection_counts
    return sum(c for c in counts if c >= k + 1)


def aggregate_survey(
    dets: Sequence[GeoCodedDetection],
    views: Iterable[tuple[Hashable, str]],
    survey_date: date,
    image_unit: str = "view",
) -> list[SurveyObservation]:
    """One observation per region that received at least one image.

    ``views`` pairs each image key with its region. With ``image_unit="view"``
    keys are ``(frame_id, side)``; with ``"frame"`` the side is dropped and a
    frame counts once. Detections in the ``"unmatched"`` region are excluded.
    """
    if image_unit not in ("view", "frame"):
        raise ValueError(f"image_unit must be 'view' or 'frame', got {image_unit!r}")

    def key(k):
        return k[0] if image_unit == "frame" and isinstance(k, tuple) else k

    image_region: dict[Hashable, str] = {}
    for k, geoid in views:
        image_region[key(k)] = geoid
    per_image: Counter = Counter()
    for g in dets:
        if g.survey_date != survey_date:
            raise AggregationError(f"detection dated {g.survey_date} in survey {survey_date}")
        if g.geoid == UNMATCHED:
            continue
        per_image[(g.geoid, key((g.detection.frame_id, g.detection.side)))] += 1

    n_images: Counter = Counter(g for g in image_region.values() if g != UNMATCHED)
    by_region: dict[str, list[int]] = defaultdict(list)
    for (geoid, _), c in per_image.items():
        by_region[geoid].append(c)

    missing = sorted(set(by_region) - set(n_images))
    if missing:
        raise AggregationError(f"regions with detections but no images: {missing}")

    obs = []
    for geoid in sorted(n_images):
        counts = by_region.get(geoid, [])
        obs.append(SurveyObservation(
            survey_date, geoid, n_images[geoid], sum(counts),
            {k: count_subset_k(counts, k) for k in SUBSET_KS},
        ))
    return obs


@dataclass(frozen=True)
class SeriesPoint:
    survey_date: date
    n_images: int
    n_detections: int
    detections_per_image: float
    subset_per_image: Mapping[int, float] = field(default_factory=dict)


def build_series(observations: Iterable[SurveyObservation]) -> list[SeriesPoint]:
    """Citywide pooled ratios per survey (total detections over total images)."""
    images: Counter = Counter()
    detections: Counter = Counter()
    subsets: dict[date, Counter] = defaultdict(Counter)
    for o in observations:
        images[o.survey_date] += o.n_images
        detections[o.survey_date] += o.n_detections
        subsets[o.survey_date].update(o.subset_counts)
    if not images:
        raise AggregationError("no observations to build a series from")
    series = []
    for day in sorted(images):
        n = images[day]
        series.append(SeriesPoint(
            day, n, detections[day], detections[day] / n if n else 0.0,
            {k: (subsets[day][k] / n if n else 0.0) for k in SUBSET_KS},
        ))
    return series


def _observation_row(o: SurveyObservation) -> list[str]:
    spi = o.subset_per_image
    return (
        [o.survey_date.isoformat(), o.geoid, str(o.n_images), str(o.n_detections),
         f"{o.detections_per_image:.6f}"]
        + [str(o.subset_counts[k]) for k in SUBSET_KS]
        + [f"{spi[k]:.6f}" for k in SUBSET_KS]
    )


def format_observations(observations: Iterable[SurveyObservation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OBSERVATION_FIELDS)
    for o in sorted(observations, key=lambda o: (o.survey_date, o.geoid)):
        w.writerow(_observation_row(o))
    return buf.getvalue()


def read_observations(path: str | Path) -> list[SurveyObservation]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(OBSERVATION_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise AggregationError(f"{path}: missing columns {sorted(missing)}")
        return [
            SurveyObservation(
                date.fromisoformat(row["survey_date"]), row["geoid"], int(row["n_images"]),
                int(row["n_detections"]), {k: int(row[f"sub{k}"]) for k in SUBSET_KS},
            )
            for row in reader
        ]
