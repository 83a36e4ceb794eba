"""
Detections: the stub detector, the interchange file and the 0.80 filter
=======================================================================

Real detection needs a trained network. The stub stands in for it, giving
the same boxes for the same frame, side and salt every time.
"""
import tempfile
from pathlib import Path

import numpy as np

from svipipe.detect import filter_by_confidence, ingest_detections, stub_detect, write_detections
from svipipe.orthorect import RectilinearView, Side

view = RectilinearView("f042", Side.LEFT, np.zeros((1280, 1920, 3), np.uint8))
dets = stub_detect(view, seed_salt=3, count_distribution="fixed:6")
for d in dets:
    print(d.to_json())

assert dets == stub_detect(view, seed_salt=3, count_distribution="fixed:6")
print("same inputs, same detections")

# the JSON-lines file is how an external detector would hand results back
tmp = Path(tempfile.mkdtemp()) / "detections.jsonl"
write_detections(tmp, dets)
back = ingest_detections(tmp)
print(len(back), "read back from", tmp.name)

kept = filter_by_confidence(back, 0.80)
print(f"{len(kept)} of {len(back)} are at least 0.80 confident:", [d.confidence for d in kept])
