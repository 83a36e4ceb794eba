"""Jenks natural breaks via Fisher's exact dynamic program."""
from __future__ import annotations

from typing import Sequence

import numpy as np


def class_ssd(values: Sequence[float], breaks: Sequence[float]) -> float:
    """Total within-class sum of squared deviations for the given upper-inclusive breaks."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    edges = np.searchsorted(x, np.asarray(breaks, dtype=np.float64), side="right")
    total = 0.0
    for part in np.split(x, edges):
        if part.size:
            total += float(((part - part.mean()) ** 2).sum())
    return total


def jenks_breaks(values: Sequence[float], classes: int = 2) -> list[float]:
    """Optimal contiguous partition of ``values`` into ``classes`` groups.

    Returns ``classes - 1`` break values, each the maximum of a lower class.
    Classes never split a run of equal values; ties in total squared
    deviation resolve to the earliest split.
    """
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if x.size == 0:
        raise ValueError("values must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    if classes < 2:
        raise ValueError("classes must be >= 2")
    n = x.size
    # admissible class starts: positions where the sorted value changes
    starts = np.concatenate([[0], np.flatnonzero(np.diff(x) > 0) + 1])
    if classes > starts.size:
        raise ValueError(f"{classes} classes requested but only {starts.size} distinct values")

    xc = x - x.mean()
    s1 = np.concatenate([[0.0], np.cumsum(xc)])
    s2 = np.concatenate([[0.0], np.cumsum(xc * xc)])
    cuts = np.concatenate([starts, [n]])  # candidate class boundaries
    m = cuts.size

    def cost(i: np.ndarray, j: int) -> np.ndarray:
        cnt = j - i
        return s2[j] - s2[i] - (s1[j] - s1[i]) ** 2 / cnt

    inf = np.inf
    # best[c, b]: min SSD covering x[:cuts[b]] with c + 1 classes
    best = np.full((classes, m), inf)
    arg = np.zeros((classes, m), dtype=np.int64)
    for b in range(1, m):
        best[0, b] = max(cost(np.array([0]), cuts[b])[0], 0.0)
    for c in range(1, classes):
        for b in range(c + 1, m):
            prev = np.arange(c, b)
            tot = best[c - 1, prev] + np.maximum(cost(cuts[prev], cuts[b]), 0.0)
            k = int(np.argmin(tot))
            best[c, b] = tot[k]
            arg[c, b] = prev[k]
    out = []
    b = m - 1
    for c in range(classes - 1, 0, -1):
        b = arg[c, b]
        out.append(float(x[cuts[b] - 1]))
    return out[::-1]
