"""Region geometry loading, grid-indexed point-in-polygon matching and geocoding.

Containment uses the even-odd rule with half-open edges: a point lying on a
boundary belongs to the region on its right (larger lon) side, or above it
(larger lat) for horizontal edges. Adjacent regions therefore never both
claim a shared-edge point.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .detect import Detection
from .geotrack import FrameRecord, GeoPoint

UNMATCHED = "unmatched"


class RegionLoadError(ValueError):
    pass


class GeocodeError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class Region:
    geoid: str
    rings: tuple[np.ndarray, ...]  # each (m, 2) closed lon/lat ring; outer rings and holes alike
    bbox: tuple[float, float, float, float]

    @classmethod
    def from_rings(cls, geoid: str, rings) -> "Region":
        arrs = []
        for ring in rings:
            a = np.asarray(ring, dtype=np.float64)
            if a.ndim != 2 or a.shape[1] < 2:
                raise ValueError("ring vertices must be [lon, lat] pairs")
            a = np.ascontiguousarray(a[:, :2])
            if len(a) < 4:
                raise ValueError("ring needs at least 3 distinct vertices")
            if not np.array_equal(a[0], a[-1]):
                raise ValueError("ring is not closed")
            a.flags.writeable = False
            arrs.append(a)
        if not arrs:
            raise ValueError("region has no rings")
        allv = np.concatenate(arrs)
        bbox = (float(allv[:, 0].min()), float(allv[:, 1].min()),
                float(allv[:, 0].max()), float(allv[:, 1].max()))
        return cls(geoid, tuple(arrs), bbox)

    @property
    def n_vertices(self) -> int:
        return sum(len(r) for r in self.rings)


def _feature_rings(geom: dict) -> list:
    kind = geom.get("type")
    if kind == "Polygon":
        return list(geom["coordinates"])
    if kind == "MultiPolygon":
        return [ring for poly in geom["coordinates"] for ring in poly]
    raise ValueError(f"unsupported geometry type {kind!r}")


def parse_regions(collection: dict) -> list[Region]:
    if collection.get("type") != "FeatureCollection":
        raise RegionLoadError("expected a GeoJSON FeatureCollection")
    regions = []
    seen: dict[str, int] = {}
    for i, feat in enumerate(collection.get("features", [])):
        props = feat.get("properties") or {}
        if "GEOID" not in props or props["GEOID"] in (None, ""):
            raise RegionLoadError(f"feature {i}: missing GEOID property")
        geoid = str(props["GEOID"])
        if geoid in seen:
            raise RegionLoadError(f"feature {i}: duplicate GEOID {geoid!r} (first seen at feature {seen[geoid]})")
        seen[geoid] = i
        try:
            regions.append(Region.from_rings(geoid, _feature_rings(feat.get("geometry") or {})))
        except (ValueError, KeyError, TypeError) as exc:
            raise RegionLoadError(f"feature {i} (GEOID {geoid}): {exc}") from None
    return regions


def load_regions(path: str | Path) -> list[Region]:
    """Load a GeoJSON FeatureCollection whose features carry a ``GEOID`` property."""
    with open(path, encoding="utf-8") as fh:
        return parse_regions(json.load(fh))


def _ring_crossings(ring: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Parity of half-open ray crossings of ``ring`` for points (x, y), ray toward +lon."""
    inside = np.zeros(x.shape, dtype=bool)
    xs, ys = ring[:, 0], ring[:, 1]
    for j in range(len(ring) - 1):
        xi, yi, xj, yj = xs[j], ys[j], xs[j + 1], ys[j + 1]
        if yi == yj:
            continue
        straddle = (yi > y) != (yj > y)
        if not straddle.any():
            continue
        xint = xi + (y - yi) * (xj - xi) / (yj - yi)
        inside ^= straddle & (x < xint)
    return inside


def points_in_region(lons, lats, region: Region) -> np.ndarray:
    """Vectorised :func:`point_in_region`."""
    x = np.asarray(lons, dtype=np.float64)
    y = np.asarray(lats, dtype=np.float64)
    inside = np.zeros(x.shape, dtype=bool)
    for ring in region.rings:
        inside ^= _ring_crossings(ring, x, y)
    return inside


def point_in_region(p: GeoPoint, region: Region) -> bool:
    """Even-odd containment over all rings, so holes subtract."""
    x0, y0, x1, y1 = region.bbox
    if not (x0 <= p.lon <= x1 and y0 <= p.lat <= y1):
        return False
    return bool(points_in_region(np.array([p.lon]), np.array([p.lat]), region)[0])


class RegionIndex:
    """Uniform grid over region bounding boxes.

    Each cell lists every region whose bbox touches it, so a lookup returns a
    superset of the containing regions.
    """

    def __init__(self, regions: Sequence[Region], cells: int = 64):
        if cells < 1:
            raise ValueError("cells must be >= 1")
        self.regions = tuple(regions)
        self.cells = cells
        if not self.regions:
            self.extent = (0.0, 0.0, 0.0, 0.0)
            self._grid: list[list[int]] = []
            return
        bb = np.array([r.bbox for r in self.regions])
        self.extent = (bb[:, 0].min(), bb[:, 1].min(), bb[:, 2].max(), bb[:, 3].max())
        x0, y0, x1, y1 = self.extent
        self._dx = (x1 - x0) / cells or 1.0
        self._dy = (y1 - y0) / cells or 1.0
        self._grid = [[] for _ in range(cells * cells)]
        for k, (a, b, c, d) in enumerate(bb):
            i0, j0 = self._cell(a, b)
            i1, j1 = self._cell(c, d)
            for j in range(j0, j1 + 1):
                for i in range(i0, i1 + 1):
                    self._grid[j * cells + i].append(k)

    def _cell(self, lon: float, lat: float) -> tuple[int, int]:
        x0, y0 = self.extent[0], self.extent[1]
        i = min(max(int((lon - x0) / self._dx), 0), self.cells - 1)
        j = min(max(int((lat - y0) / self._dy), 0), self.cells - 1)
        return i, j

    def _contains_extent(self, lon, lat):
        x0, y0, x1, y1 = self.extent
        return (lon >= x0) & (lon <= x1) & (lat >= y0) & (lat <= y1)

    def candidates(self, lon: float, lat: float) -> list[int]:
        if not self.regions or not self._contains_extent(lon, lat):
            return []
        i, j = self._cell(lon, lat)
        return self._grid[j * self.cells + i]

    def match_many(self, lons, lats) -> np.ndarray:
        """Vectorised :func:`match_geoid`; returns an object array of GEOID strings."""
        lon = np.asarray(lons, dtype=np.float64)
        lat = np.asarray(lats, dtype=np.float64)
        out = np.full(lon.shape, UNMATCHED, dtype=object)
        if not self.regions or lon.size == 0:
            return out
        ok = np.flatnonzero(self._contains_extent(lon, lat))
        if ok.size == 0:
            return out
        x0, y0 = self.extent[0], self.extent[1]
        ci = np.clip(((lon[ok] - x0) / self._dx).astype(np.int64), 0, self.cells - 1)
        cj = np.clip(((lat[ok] - y0) / self._dy).astype(np.int64), 0, self.cells - 1)
        cell = cj * self.cells + ci
        order = np.argsort(cell, kind="stable")
        cell_sorted = cell[order]
        bounds = np.flatnonzero(np.diff(cell_sorted)) + 1
        for grp in np.split(order, bounds):
            pts = ok[grp]
            remaining = np.ones(len(pts), dtype=bool)
            for k in self._grid[int(cell[grp[0]])]:
                r = self.regions[k]
                a, b, c, d = r.bbox
                sel = pts[remaining]
                px, py = lon[sel], lat[sel]
                cand = (px >= a) & (px <= c) & (py >= b) & (py <= d)
                if not cand.any():
                    continue
                hit = np.zeros(len(sel), dtype=bool)
                hit[cand] = points_in_region(px[cand], py[cand], r)
                out[sel[hit]] = r.geoid
                idx = np.flatnonzero(remaining)
                remaining[idx[hit]] = False
                if not remaining.any():
                    break
        return out


def match_geoid(p: GeoPoint, idx: RegionIndex) -> str:
    """GEOID of the first indexed region containing ``p``, else ``"unmatched"``."""
    for k in idx.candidates(p.lon, p.lat):
        if point_in_region(p, idx.regions[k]):
            return idx.regions[k].geoid
    return UNMATCHED


def match_geoid_exhaustive(p: GeoPoint, regions: Sequence[Region]) -> str:
    for r in regions:
        if point_in_region(p, r):
            return r.geoid
    return UNMATCHED


@dataclass(frozen=True)
class GeoCodedDetection:
    detection: Detection
    position: GeoPoint
    geoid: str
    survey_date: date


def geocode_detections(
    dets: Sequence[Detection], frames: Mapping[str, FrameRecord], idx: RegionIndex
) -> list[GeoCodedDetection]:
    """Stamp each detection with its frame's position and containing GEOID."""
    cache: dict[str, str] = {}
    out = []
    for d in dets:
        try:
            frame = frames[d.frame_id]
        except KeyError:
            raise GeocodeError(f"detection references unknown frame_id {d.frame_id!r}") from None
        if d.frame_id not in cache:
            cache[d.frame_id] = match_geoid(frame.position, idx)
        out.append(GeoCodedDetection(d, frame.position, cache[d.frame_id], frame.survey_date))
    return out
