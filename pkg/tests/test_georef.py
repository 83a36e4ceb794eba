import json
from datetime import date

import numpy as np
import pytest

from svipipe.detect import BoundingBox, Detection
from svipipe.geotrack import FrameRecord, GeoPoint
from svipipe.georef import (
    UNMATCHED, GeocodeError, Region, RegionIndex, RegionLoadError, geocode_detections, load_regions,
    match_geoid, match_geoid_exhaustive, parse_regions, point_in_region, points_in_region,
)
from synth import jittered_map, random_points, regions_to_geojson

UNIT = [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]


def fc(*features):
    return {"type": "FeatureCollection", "features": list(features)}


def feat(geoid, coords, kind="Polygon"):
    props = {} if geoid is None else {"GEOID": geoid}
    return {"type": "Feature", "properties": props, "geometry": {"type": kind, "coordinates": coords}}


def winding_number(x, y, ring):
    """Independent containment oracle: non-zero winding number."""
    wn = 0
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y < y1 and cross > 0:
            wn += 1
        elif y1 <= y < y0 and cross < 0:
            wn -= 1
    return wn != 0


def test_load_unit_square(tmp_path):
    p = tmp_path / "r.geojson"
    p.write_text(json.dumps(fc(feat("A", [UNIT]))))
    (r,) = load_regions(p)
    assert r.geoid == "A" and r.bbox == (0, 0, 1, 1)


@pytest.mark.parametrize("collection,msg", [
    (fc(feat("A", [UNIT]), feat("A", [UNIT])), "duplicate GEOID"),
    (fc(feat(None, [UNIT])), "feature 0: missing GEOID"),
    (fc(feat("A", [UNIT]), feat("B", [[[0, 0], [1, 0], [1, 1], [0, 1]]])), "feature 1.*not closed"),
    (fc(feat("A", [[0, 0], [1, 1]], "LineString")), "unsupported geometry"),
    ({"type": "Feature"}, "FeatureCollection"),
])
def test_load_errors(collection, msg):
    with pytest.raises(RegionLoadError, match=msg):
        parse_regions(collection)


def test_generated_collection_round_trip(tmp_path):
    regions = jittered_map(np.random.default_rng(0), nx=10, ny=10)
    p = tmp_path / "map.geojson"
    p.write_text(json.dumps(regions_to_geojson(regions)))
    loaded = load_regions(p)
    assert len(loaded) == 100
    assert [r.geoid for r in loaded] == [r.geoid for r in regions]
    assert [r.n_vertices for r in loaded] == [r.n_vertices for r in regions]


def test_multipolygon_and_holes():
    outer = [[0, 0], [4, 0], [4, 4], [0, 4], [0, 0]]
    hole = [[1, 1], [3, 1], [3, 3], [1, 3], [1, 1]]
    island = [[10, 10], [11, 10], [11, 11], [10, 11], [10, 10]]
    (r,) = parse_regions(fc(feat("M", [[outer, hole], [island]], "MultiPolygon")))
    assert point_in_region(GeoPoint(0.5, 0.5), r)
    assert not point_in_region(GeoPoint(2, 2), r)
    assert point_in_region(GeoPoint(10.5, 10.5), r)
    assert not point_in_region(GeoPoint(7, 7), r)


def test_unit_square_centre():
    r = Region.from_rings("A", [UNIT])
    assert point_in_region(GeoPoint(0.5, 0.5), r)
    assert not point_in_region(GeoPoint(1.5, 0.5), r)


def test_concave_polygon_vs_winding_oracle():
    # 12-vertex star-ish concave polygon
    ang = np.linspace(0, 2 * np.pi, 13)[:-1]
    rad = np.where(np.arange(12) % 2 == 0, 1.0, 0.45)
    ring = np.c_[rad * np.cos(ang), rad * np.sin(ang)]
    ring = np.vstack([ring, ring[:1]])
    r = Region.from_rings("S", [ring])
    rng = np.random.default_rng(12)
    xs = rng.uniform(-1.1, 1.1, 1000)
    ys = rng.uniform(-1.1, 1.1, 1000)
    got = points_in_region(xs, ys, r)
    for x, y, g in zip(xs, ys, got):
        assert g == winding_number(x, y, ring.tolist())
        assert point_in_region(GeoPoint(y, x), r) == g


def test_shared_edges_assigned_exactly_once():
    a = Region.from_rings("A", [UNIT])
    b = Region.from_rings("B", [[[1, 0], [2, 0], [2, 1], [1, 1], [1, 0]]])
    c = Region.from_rings("C", [[[0, 1], [2, 1], [2, 2], [0, 2], [0, 1]]])
    for p in [GeoPoint(0.5, 1.0), GeoPoint(1.0, 0.5), GeoPoint(0.5, 1.5), GeoPoint(1.0, 1.0), GeoPoint(0.3, 0.0)]:
        hits = [r.geoid for r in (a, b, c) if point_in_region(p, r)]
        assert len(hits) <= 1
    assert [r.geoid for r in (a, b, c) if point_in_region(GeoPoint(0.5, 1.0), r)] == ["B"]
    assert [r.geoid for r in (a, b, c) if point_in_region(GeoPoint(1.0, 0.5), r)] == ["C"]


def test_partition_interior_points_match_exactly_one():
    regions = jittered_map(np.random.default_rng(2), nx=6, ny=4)
    rng = np.random.default_rng(3)
    lon, lat = random_points(rng, regions, 5000, margin=0.0)
    counts = np.zeros(lon.size, int)
    for r in regions:
        counts += points_in_region(lon, lat, r)
    inside = (lon < regions[-1].bbox[2]) & (lat < regions[-1].bbox[3])
    assert (counts[inside] == 1).all()


def test_match_outside_every_bbox():
    idx = RegionIndex([Region.from_rings("A", [UNIT])])
    assert match_geoid(GeoPoint(5, 5), idx) == UNMATCHED
    assert match_geoid(GeoPoint(0.5, 0.5), idx) == "A"
    assert match_geoid(GeoPoint(0.5, 0.5), RegionIndex([])) == UNMATCHED


def brute_scan(lon, lat, regions):
    out = []
    for x, y in zip(lon, lat):
        hit = UNMATCHED
        for r in regions:
            if winding_number(x, y, r.rings[0].tolist()):
                hit = r.geoid
                break
        out.append(hit)
    return out


@pytest.mark.parametrize("cells", [1, 7, 64])
def test_indexed_equals_exhaustive(cells):
    rng = np.random.default_rng(cells)
    regions = jittered_map(rng)
    idx = RegionIndex(regions, cells)
    lon, lat = random_points(rng, regions, 3000)
    many = idx.match_many(lon, lat)
    scalar = [match_geoid(GeoPoint(y, x), idx) for x, y in zip(lon, lat)]
    exhaustive = [match_geoid_exhaustive(GeoPoint(y, x), regions) for x, y in zip(lon, lat)]
    assert list(many) == scalar == exhaustive


def test_exhaustive_agrees_with_winding_oracle():
    rng = np.random.default_rng(8)
    regions = jittered_map(rng, nx=5, ny=5)
    lon, lat = random_points(rng, regions, 2000)
    assert list(RegionIndex(regions).match_many(lon, lat)) == brute_scan(lon, lat, regions)


def test_index_candidates_superset():
    rng = np.random.default_rng(5)
    regions = jittered_map(rng)
    idx = RegionIndex(regions, 16)
    lon, lat = random_points(rng, regions, 2000)
    for x, y in zip(lon, lat):
        true = {k for k, r in enumerate(regions) if point_in_region(GeoPoint(y, x), r)}
        assert true <= set(idx.candidates(x, y))


def frames_and_index():
    a = Region.from_rings("A", [[[-122.4, 47.6], [-122.3, 47.6], [-122.3, 47.7], [-122.4, 47.7], [-122.4, 47.6]]])
    frames = {
        "f1": FrameRecord("f1", None, GeoPoint(47.65, -122.35), date(2021, 7, 10)),
        "f2": FrameRecord("f2", None, GeoPoint(47.65, -122.25), date(2021, 7, 10)),
    }
    return frames, RegionIndex([a])


def mkdet(fid, x=0):
    return Detection.from_scores(fid, "L", BoundingBox(x, 0, 5, 5), [0.1, 0.9])


def test_geocode_inherits_frame_position():
    frames, idx = frames_and_index()
    assert geocode_detections([], frames, idx) == []
    out = geocode_detections([mkdet("f1", 0), mkdet("f1", 10), mkdet("f2")], frames, idx)
    assert len(out) == 3
    assert out[0].position == out[1].position and out[0].geoid == out[1].geoid == "A"
    assert out[0].detection.box != out[1].detection.box
    assert out[2].geoid == UNMATCHED


def test_geocode_unknown_frame():
    frames, idx = frames_and_index()
    with pytest.raises(GeocodeError, match="nope"):
        geocode_detections([mkdet("nope")], frames, idx)


def test_geocode_counts_match_bruteforce():
    rng = np.random.default_rng(21)
    regions = jittered_map(rng)
    idx = RegionIndex(regions)
    lon, lat = random_points(rng, regions, 300)
    frames = {f"f{i}": FrameRecord(f"f{i}", None, GeoPoint(y, x), date(2021, 1, 1)) for i, (x, y) in enumerate(zip(lon, lat))}
    dets = [mkdet(f"f{int(rng.integers(0, 300))}", i) for i in range(2000)]
    coded = geocode_detections(dets, frames, idx)
    counts, oracle = {}, {}
    for g in coded:
        counts[g.geoid] = counts.get(g.geoid, 0) + 1
    truth = brute_scan(lon, lat, regions)
    for d in dets:
        gid = truth[int(d.frame_id[1:])]
        oracle[gid] = oracle.get(gid, 0) + 1
    assert counts == oracle
