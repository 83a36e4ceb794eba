"""
Which census tract is this frame in?
====================================
"""
import numpy as np

from svipipe.geotrack import GeoPoint
from svipipe.georef import Region, RegionIndex, match_geoid, match_geoid_exhaustive


def square(x0, y0, size):
    return [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]]


# a 3x3 block of tracts, the middle one has a lake (hole) in it
regions = []
for j in range(3):
    for i in range(3):
        rings = [square(-122.36 + 0.01 * i, 47.60 + 0.01 * j, 0.01)]
        if (i, j) == (1, 1):
            rings.append(square(-122.347, 47.613, 0.004))
        regions.append(Region.from_rings(f"53033{j}{i}0000", rings))
index = RegionIndex(regions, cells=16)

# outer tract, middle tract, the lake in the middle tract, far away
for lat, lon in [(47.605, -122.355), (47.611, -122.349), (47.615, -122.345), (47.70, -122.30)]:
    print(f"({lat}, {lon}) ->", match_geoid(GeoPoint(lat, lon), index))

# the grid index is only a shortcut; it must agree with checking every tract
rng = np.random.default_rng(0)
lon = rng.uniform(-122.365, -122.325, 5000)
lat = rng.uniform(47.595, 47.635, 5000)
fast = index.match_many(lon, lat)
slow = [match_geoid_exhaustive(GeoPoint(b, a), regions) for a, b in zip(lon, lat)]
print("index agrees with exhaustive scan:", list(fast) == slow)
