"""Pedestrian detector boundary: stub detector, interchange I/O, confidence filter."""
from __future__ import annotations

import hashlib
import json
import math
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .orthorect import RectilinearView, Side

SCORE_SUM_TOL = 1e-6


class DetectionError(ValueError):
    pass


class DetectionParseError(DetectionError):
    def __init__(self, lineno: int, field: str, message: str):
        super().__init__(f"line {lineno}: field {field!r}: {message}")
        self.lineno = lineno
        self.field = field


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width and height must be positive: {self}")

    def clamped(self, width: int, height: int) -> "BoundingBox":
        x0 = min(max(self.x, 0.0), width)
        y0 = min(max(self.y, 0.0), height)
        x1 = min(max(self.x + self.w, 0.0), width)
        y1 = min(max(self.y + self.h, 0.0), height)
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def check_scores(scores: Sequence[float]) -> tuple[float, ...]:
    scores = tuple(float(p) for p in scores)
    if len(scores) < 2:
        raise DetectionError("softmax vector needs at least two classes")
    if any(not (0.0 <= p <= 1.0) for p in scores):
        raise DetectionError(f"probabilities must lie in [0, 1]: {scores}")
    if abs(math.fsum(scores) - 1.0) > SCORE_SUM_TOL:
        raise DetectionError(f"probabilities sum to {math.fsum(scores)!r}, not 1")
    return scores


@dataclass(frozen=True)
class Detection:
    frame_id: str
    side: Side
    box: BoundingBox
    scores: tuple[float, ...]
    confidence: float

    @classmethod
    def from_scores(cls, frame_id: str, side, box: BoundingBox, scores, class_index: int = -1):
        scores = check_scores(scores)
        return cls(frame_id, Side(side), box, scores, scores[class_index])

    def to_json(self) -> str:
        b = self.box
        return json.dumps(
            {"frame_id": self.frame_id, "side": self.side.value,
             "bbox": [b.x, b.y, b.w, b.h], "scores": list(self.scores)},
            separators=(", ", ": "),
        )


class DetectorPlugin(Protocol):
    def detect(self, view: RectilinearView) -> list[Detection]:
        ...


def parse_count_distribution(text: str):
    """Parse ``"poisson:<mean>"``, ``"fixed:<n>"``, ``"uniform:<lo>-<hi>"`` or ``"always0"``."""
    kind, _, arg = text.strip().partition(":")
    try:
        if kind == "always0":
            return lambda rng: 0
        if kind == "fixed":
            n = int(arg)
            return lambda rng: n
        if kind == "poisson":
            lam = float(arg)
            return lambda rng: int(rng.poisson(lam))
        if kind == "uniform":
            lo, hi = (int(s) for s in arg.split("-"))
            return lambda rng: int(rng.integers(lo, hi + 1))
    except ValueError:
        pass
    raise ValueError(f"unrecognised count distribution {text!r}")


def _stub_seed(frame_id: str, side: Side, seed_salt: int) -> int:
    digest = hashlib.blake2b(f"{frame_id}\x1f{side.value}\x1f{seed_salt}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stub_detect(
    view: RectilinearView,
    seed_salt: int = 0,
    count_distribution: str = "poisson:1.5",
    class_index: int = -1,
) -> list[Detection]:
    """Deterministic pseudo-detections seeded only by (frame_id, side, seed_salt).

    Pixel content is ignored; the view only bounds the boxes.
    """
    rng = np.random.Generator(np.random.PCG64(_stub_seed(view.frame_id, view.side, seed_salt)))
    count = parse_count_distribution(count_distribution)(rng)
    W, H = view.width, view.height
    out = []
    for _ in range(count):
        w = int(rng.integers(max(1, W // 40), max(2, W // 8) + 1))
        h = min(H, int(w * rng.uniform(1.8, 3.0)))
        x = int(rng.integers(0, W - w + 1))
        y = int(rng.integers(0, H - h + 1))
        conf = round(float(rng.uniform(0.5, 1.0)), 4)
        scores = [round(1.0 - conf, 4), conf]
        if class_index not in (-1, 1):
            scores.reverse()
        out.append(Detection.from_scores(view.frame_id, view.side, BoundingBox(x, y, w, h), scores, class_index))
    return out


@dataclass(frozen=True)
class StubDetector:
    seed_salt: int = 0
    count_distribution: str = "poisson:1.5"
    class_index: int = -1

    def detect(self, view: RectilinearView) -> list[Detection]:
        return stub_detect(view, self.seed_salt, self.count_distribution, self.class_index)


def _parse_line(line: str, lineno: int, class_index: int) -> Detection:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DetectionParseError(lineno, "<json>", str(exc)) from None
    if not isinstance(obj, dict):
        raise DetectionParseError(lineno, "<json>", "expected an object")
    for key in ("frame_id", "side", "bbox", "scores"):
        if key not in obj:
            raise DetectionParseError(lineno, key, "missing")
    if not isinstance(obj["frame_id"], str) or not obj["frame_id"]:
        raise DetectionParseError(lineno, "frame_id", "expected a non-empty string")
    if obj["side"] not in ("L", "R"):
        raise DetectionParseError(lineno, "side", f"expected 'L' or 'R', got {obj['side']!r}")
    bbox = obj["bbox"]
    if (not isinstance(bbox, list) or len(bbox) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox)):
        raise DetectionParseError(lineno, "bbox", "expected [x, y, w, h] numbers")
    scores = obj["scores"]
    if not isinstance(scores, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in scores):
        raise DetectionParseError(lineno, "scores", "expected a list of numbers")
    try:
        box = BoundingBox(*(float(v) for v in bbox))
    except ValueError as exc:
        raise DetectionParseError(lineno, "bbox", str(exc)) from None
    try:
        return Detection.from_scores(obj["frame_id"], obj["side"], box, scores, class_index)
    except (DetectionError, IndexError) as exc:
        raise DetectionParseError(lineno, "scores", str(exc)) from None


def ingest_detections(path: str | Path, class_index: int = -1) -> list[Detection]:
    """Read the JSON-lines detection interchange format. Blank lines are ignored."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append(_parse_line(line, lineno, class_index))
    return out


def format_detections(dets: Iterable[Detection]) -> str:
    return "".join(d.to_json() + "\n" for d in dets)


def write_detections(path: str | Path, dets: Iterable[Detection]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_detections(dets))


def filter_by_confidence(dets: Sequence[Detection], threshold: float = 0.80) -> list[Detection]:
    """Keep detections whose confidence is at least ``threshold``, in input order."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return [d for d in dets if d.confidence >= threshold]


def run_external_detector(command: str, views_dir: str | Path, output: str | Path,
                          class_index: int = -1) -> list[Detection]:
    """Run a user-supplied detector command and ingest what it wrote.

    ``command`` is a template with ``{input_dir}`` and ``{output}`` placeholders.
    """
    argv = [a.format(input_dir=str(views_dir), output=str(output)) for a in shlex.split(command)]
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise DetectionError(
            f"detector command exited with {proc.returncode}: {proc.stderr.strip()[-500:]}"
        )
    return ingest_detections(output, class_index)
