"""
A whole survey, start to finish
===============================

Builds a tiny survey on disk (GPS log, frame times, panoramas, tract
polygons) and runs the same chain as ``svipipe run``.
"""
import dataclasses
import json
import tempfile
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
from PIL import Image

from svipipe.config import config_from_dict
from svipipe.pipeline import run_survey

root = Path(tempfile.mkdtemp(prefix="svipipe-demo-"))
(root / "frames").mkdir()
t0 = datetime(2021, 7, 10, 17, tzinfo=timezone.utc)
rng = np.random.default_rng(1)

with open(root / "gps.csv", "w") as fh:
    fh.write("timestamp,lat,lon\n")
    for i in range(21):
        fh.write(f"{(t0 + timedelta(seconds=i)).isoformat()},47.61,{-122.34 + i * 6 / 75_000:.8f}\n")

with open(root / "frame_times.csv", "w") as fh:
    fh.write("frame_id,timestamp\n")
    for i in range(40):
        fid = f"f{i:03d}"
        fh.write(f"{fid},{(t0 + timedelta(seconds=0.5 * i)).isoformat()}\n")
        Image.fromarray(rng.integers(0, 256, (128, 256, 3), dtype=np.uint8)).save(root / "frames" / f"{fid}.png")

# two tracts split at lon -122.339
west = [[-122.35, 47.60], [-122.339, 47.60], [-122.339, 47.62], [-122.35, 47.62], [-122.35, 47.60]]
east = [[-122.339, 47.60], [-122.32, 47.60], [-122.32, 47.62], [-122.339, 47.62], [-122.339, 47.60]]
(root / "tracts.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": [
    {"type": "Feature", "properties": {"GEOID": g}, "geometry": {"type": "Polygon", "coordinates": [r]}}
    for g, r in (("53033000100", west), ("53033000200", east))
]}))

cfg = config_from_dict({
    "frames_dir": "frames", "gps_file": "gps.csv", "frame_times_file": "frame_times.csv",
    "geometry_file": "tracts.geojson", "output_dir": "out", "stub_count": "poisson:2",
    "views": [{"side": "L", "yaw_offset": -90, "out_width": 192, "out_height": 128},
              {"side": "R", "yaw_offset": 90, "out_width": 192, "out_height": 128}],
}, base_dir=root)

manifest = run_survey(dataclasses.replace(cfg, jobs=2))
print(json.dumps(manifest.counts, indent=2))
print((root / "out" / "observations.csv").read_text())
print("outputs in", root / "out")
