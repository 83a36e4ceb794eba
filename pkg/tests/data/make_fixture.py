"""Regenerate the bundled 20-frame survey fixture.

Run from the repository root:  python tests/data/make_fixture.py
Golden outputs are regenerated separately with ``--golden`` after inspection.
"""
import json
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from PIL import Image

HERE = Path(__file__).parent / "survey20"
LAT = 47.6100
LON0 = -122.3400
M_PER_DEG_LON = 111_194.9 * np.cos(np.radians(LAT))
T0 = datetime(2021, 7, 10, 17, 0, 0, tzinfo=timezone.utc)

CONFIG = """\
frames_dir = "frames"
gps_file = "gps.csv"
frame_times_file = "frame_times.csv"
geometry_file = "regions.geojson"
attributes_file = "attributes.csv"
output_dir = "out"
detector = "stub"
stub_seed_salt = 7
stub_count = "poisson:2.5"
spacing_m = 4.0
confidence_threshold = 0.8
image_unit = "view"

[[views]]
side = "L"
yaw_offset = -90.0
hfov = 100.0
vfov = 67.0
out_width = 160
out_height = 112

[[views]]
side = "R"
yaw_offset = 90.0
hfov = 100.0
vfov = 67.0
out_width = 160
out_height = 112
"""


def ts(t):
    return t.isoformat(timespec="milliseconds").replace("+00:00", "Z")


def lon_at(meters):
    return LON0 + meters / M_PER_DEG_LON


def rect(x0, x1, y0, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]


def main():
    (HERE / "frames").mkdir(parents=True, exist_ok=True)
    # GPS: 1 Hz fixes, 6 m/s along a parallel, stopped between seconds 5 and 8
    dist = []
    d = 0.0
    for s in range(16):
        dist.append(d)
        d += 0.0 if 5 <= s < 8 else 6.0
    with open(HERE / "gps.csv", "w", newline="\n") as fh:
        fh.write("timestamp,lat,lon\n")
        for s, m in enumerate(dist):
            fh.write(f"{ts(T0 + timedelta(seconds=s))},{LAT:.7f},{lon_at(m):.8f}\n")
    # frames every 0.75 s; the last one falls after the final fix
    with open(HERE / "frame_times.csv", "w", newline="\n") as fh:
        fh.write("frame_id,timestamp\n")
        for i in range(20):
            fh.write(f"f{i:03d},{ts(T0 + timedelta(milliseconds=750 * i + 200 * (i == 19) + 1000 * (i == 19)))}\n")
    rng = np.random.default_rng(20)
    for i in range(20):
        yy, xx = np.mgrid[0:64, 0:128]
        img = np.stack([(xx * 2 + i * 9) % 256, (yy * 4 + i * 5) % 256, ((xx ^ yy) * 3 + i) % 256], -1)
        img = (img + rng.integers(0, 8, img.shape)).clip(0, 255).astype(np.uint8)
        Image.fromarray(img).save(HERE / "frames" / f"f{i:03d}.png", format="PNG")
    # regions along the route: A [0,20) m, B [20,45) m with a hole, C [45,60) m; beyond 60 m unmatched
    dy = 0.0005
    features = [
        {"type": "Feature", "properties": {"GEOID": "53033000100"},
         "geometry": {"type": "Polygon", "coordinates": [rect(lon_at(-10), lon_at(20), LAT - dy, LAT + dy)]}},
        {"type": "Feature", "properties": {"GEOID": "53033000200"},
         "geometry": {"type": "Polygon", "coordinates": [
             rect(lon_at(20), lon_at(45), LAT - dy, LAT + dy),
             rect(lon_at(40), lon_at(44), LAT - dy / 2, LAT + dy / 2)]}},
        {"type": "Feature", "properties": {"GEOID": "53033000300"},
         "geometry": {"type": "MultiPolygon", "coordinates": [
             [rect(lon_at(45), lon_at(60), LAT - dy, LAT + dy)],
             [rect(lon_at(40), lon_at(44), LAT - dy / 2, LAT + dy / 2)]]}},
    ]
    with open(HERE / "regions.geojson", "w", newline="\n") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, indent=1)
        fh.write("\n")
    with open(HERE / "attributes.csv", "w", newline="\n") as fh:
        fh.write("geoid,median_income,pct_white\n53033000100,48000,0.41\n"
                 "53033000200,91000,0.62\n53033000300,132000,0.555\n")
    (HERE / "config.toml").write_text(CONFIG)


def golden():
    import dataclasses
    import shutil
    from svipipe.config import load_config
    from svipipe.pipeline import run_survey
    cfg = load_config(HERE / "config.toml")
    out = HERE / "golden"
    tmp = HERE / "_golden_run"
    shutil.rmtree(tmp, ignore_errors=True)
    run_survey(dataclasses.replace(cfg, output_dir=tmp, jobs=1))
    out.mkdir(exist_ok=True)
    for name in ("detections.csv", "observations.csv", "frames.csv", "view_regions.csv"):
        shutil.copy(tmp / name, out / name)
    m = json.loads((tmp / "manifest.json").read_text())
    m.pop("timings_s")
    (out / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    shutil.rmtree(tmp)


if __name__ == "__main__":
    if "--golden" in sys.argv:
        golden()
    else:
        main()
