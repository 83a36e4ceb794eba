"""
From detections to per-tract ratios
===================================

Pedestrians per image, and the "crowd" subsets: detections sharing their
image with at least k other detections.
"""
from datetime import date

from svipipe.aggregate import aggregate_survey, build_series, count_subset_k, format_observations
from svipipe.detect import BoundingBox, Detection
from svipipe.geotrack import GeoPoint
from svipipe.georef import GeoCodedDetection

# per-view detection counts in one tract
counts = [0, 0, 1, 2, 5]
for k in (1, 2, 3, 4):
    print(f"k={k}: {count_subset_k(counts, k)} detections in a group of at least {k + 1}")

day = date(2021, 7, 10)
views = [((f"a{i}", "L"), "53033000100") for i in range(5)] + [((f"b{i}", "L"), "53033000200") for i in range(3)]
dets = []
for view_no, n in enumerate(counts):
    for j in range(n):
        d = Detection.from_scores(f"a{view_no}", "L", BoundingBox(10 * j, 0, 8, 20), [0.1, 0.9])
        dets.append(GeoCodedDetection(d, GeoPoint(47.61, -122.34), "53033000100", day))

obs = aggregate_survey(dets, views, day)
print(format_observations(obs))

(point,) = build_series(obs)
print("citywide detections per image:", round(point.detections_per_image, 4))
