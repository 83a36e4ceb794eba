"""
Picking frames every four meters from a GPS track
=================================================

A camera shoots far more frames than we need. Here we fake a short drive,
then keep only the frames that are at least 4 m apart along the road.
"""
from datetime import datetime, timedelta, timezone

from svipipe.geotrack import GeoPoint, GpsFix, GpsTrack, haversine_distance, subsample_frames

t0 = datetime(2021, 7, 10, 17, 0, tzinfo=timezone.utc)

# one fix per second, driving east at roughly 8 m/s, with a red light at 5-9 s
positions = [0, 8, 16, 24, 32, 36, 36, 36, 36, 36, 44, 52, 60]
deg_per_m = 1 / 75_000.0
fixes = [GpsFix(t0 + timedelta(seconds=i), GeoPoint(47.61, -122.34 + x * deg_per_m))
         for i, x in enumerate(positions)]
track = GpsTrack(fixes)

print("first to last fix:", round(haversine_distance(fixes[0].position, fixes[-1].position), 1), "m")

# frames every 0.25 s
frames = [(f"f{i:03d}", t0 + timedelta(seconds=0.25 * i)) for i in range(48)]
kept = subsample_frames(track, frames, spacing=4.0)

print(len(frames), "frames in,", len(kept), "kept")
prev = None
for f in kept:
    step = "" if prev is None else f"  +{haversine_distance(prev, f.position):.2f} m"
    print(f.frame_id, f.timestamp.strftime("%H:%M:%S.%f")[:-3], step)
    prev = f.position

# while the car waits at the light nothing new is kept, which is the point
