from __future__ import annotations

from typing import Sequence

import numpy as np


class UndefinedCorrelationError(ValueError):
    pass


def pearson_corr(a: Sequence[float], b: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"series must be 1-D and equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("need at least two paired values")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a zero-variance series")
    r = float(xc @ yc) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))
