"""Categorical coding of survey observations for the mobility regression."""
from __future__ import annotations

import bisect
import csv
import enum
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..aggregate import SurveyObservation


class Season(enum.IntEnum):
    FALL = 0  # baseline
    SPRING = 1
    SUMMER = 2
    WINTER = 3


def season_of(day: date) -> Season:
    """Meteorological season by calendar month."""
    m = day.month
    if m in (12, 1, 2):
        return Season.WINTER
    if m in (3, 4, 5):
        return Season.SPRING
    if m in (6, 7, 8):
        return Season.SUMMER
    return Season.FALL


@dataclass(frozen=True)
class TractAttributes:
    geoid: str
    median_income: float
    pct_white: float

    def __post_init__(self):
        if not 0.0 <= self.pct_white <= 1.0:
            raise ValueError(f"{self.geoid}: pct_white must lie in [0, 1], got {self.pct_white}")
        if self.median_income < 0:
            raise ValueError(f"{self.geoid}: median_income must be >= 0")


def read_attributes(path: str | Path) -> dict[str, TractAttributes]:
    """Read a ``geoid,median_income,pct_white`` CSV keyed by GEOID."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"geoid", "median_income", "pct_white"} <= set(reader.fieldnames or ()):
            raise ValueError(f"{path}: expected header geoid,median_income,pct_white")
        for lineno, row in enumerate(reader, start=2):
            try:
                a = TractAttributes(row["geoid"], float(row["median_income"]), float(row["pct_white"]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if a.geoid in out:
                raise ValueError(f"{path}:{lineno}: duplicate geoid {a.geoid!r}")
            out[a.geoid] = a
    return out


@dataclass(frozen=True)
class EncodingConfig:
    vaccine_date: date = date(2021, 4, 15)
    income_thresholds: str | tuple[float, ...] = "quintiles"
    white_threshold: float = 0.555
    excluded_dates: tuple[date, ...] = field(default_factory=tuple)


def resolve_income_thresholds(cfg: EncodingConfig, attributes: Iterable[TractAttributes]) -> tuple[float, ...]:
    """Four ascending income cut points separating brackets 1..5."""
    if cfg.income_thresholds == "quintiles":
        incomes = np.array([a.median_income for a in attributes], dtype=np.float64)
        if incomes.size == 0:
            raise ValueError("no tract incomes supplied for quintile thresholds")
        return tuple(float(q) for q in np.quantile(incomes, [0.2, 0.4, 0.6, 0.8]))
    th = tuple(float(t) for t in cfg.income_thresholds)
    if len(th) != 4 or any(b <= a for a, b in zip(th, th[1:])):
        raise ValueError(f"income_thresholds must be 4 ascending values, got {th}")
    return th


def income_bracket(income: float, thresholds: Sequence[float]) -> int:
    return 1 + bisect.bisect_right(thresholds, income)


@dataclass(frozen=True)
class EncodedObservation:
    y: float
    vaccine: int
    season: Season
    weekend: int
    income_bracket: int
    white_majority: int
    survey_date: date | None = None
    geoid: str | None = None


def encode(
    obs: SurveyObservation,
    attrs: TractAttributes,
    cfg: EncodingConfig,
    thresholds: Sequence[float] | None = None,
    response: str = "det_per_image",
) -> EncodedObservation:
    if attrs.geoid != obs.geoid:
        raise ValueError(f"attributes for {attrs.geoid} given for observation in {obs.geoid}")
    if thresholds is None:
        if cfg.income_thresholds == "quintiles":
            raise ValueError("quintile thresholds need the full attribute table; pass thresholds")
        thresholds = resolve_income_thresholds(cfg, ())
    day = obs.survey_date
    return EncodedObservation(
        y=obs.response(response),
        vaccine=int(day >= cfg.vaccine_date),
        season=season_of(day),
        weekend=int(day.weekday() >= 5),
        income_bracket=income_bracket(attrs.median_income, thresholds),
        white_majority=int(attrs.pct_white >= cfg.white_threshold),
        survey_date=day,
        geoid=obs.geoid,
    )


def encode_observations(
    observations: Iterable[SurveyObservation],
    attributes: Mapping[str, TractAttributes],
    cfg: EncodingConfig,
    response: str = "det_per_image",
) -> tuple[list[EncodedObservation], int]:
    """Encode every observation; returns the rows and the number dropped for missing attributes.

    Observations on ``cfg.excluded_dates`` are skipped silently (not counted as dropped).
    """
    thresholds = resolve_income_thresholds(cfg, attributes.values())
    excluded = set(cfg.excluded_dates)
    rows = []
    dropped = 0
    for o in observations:
        if o.survey_date in excluded:
            continue
        a = attributes.get(o.geoid)
        if a is None:
            dropped += 1
            continue
        rows.append(encode(o, a, cfg, thresholds, response))
    return rows, dropped


ENCODED_FIELDS = ["survey_date", "geoid", "y", "vaccine", "season", "weekend", "income_bracket", "white_majority"]


def read_encoded(path: str | Path, response: str = "y") -> list[EncodedObservation]:
    """Read pre-coded observations.

    Columns: ``vaccine,season,weekend,income_bracket,white_majority`` plus the
    response column named by ``response``; ``season`` is a name
    (Fall/Spring/Summer/Winter). ``survey_date`` and ``geoid`` are optional.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(EncodedObservation(
                y=float(row[response]),
                vaccine=int(float(row["vaccine"])),
                season=Season[row["season"].strip().upper()],
                weekend=int(float(row["weekend"])),
                income_bracket=int(float(row["income_bracket"])),
                white_majority=int(float(row["white_majority"])),
                survey_date=date.fromisoformat(row["survey_date"]) if row.get("survey_date") else None,
                geoid=row.get("geoid"),
            ))
    return rows
