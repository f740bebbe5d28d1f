"""Density-aware localization: individuals are the local maxima of a
density map.

A pixel is a peak when it is strictly the largest value in the window
centered on it; plateaus of tied window-maxima yield a single peak at the
lexicographically smallest (y, x) of the tied component.  Zero-valued
pixels are never peaks, so an all-zero map localizes nobody regardless of
thresholds.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import label, maximum_filter

from .iomodel import DensityMap, Point

DEFAULT_WINDOW = 3
DEFAULT_REL_THRESHOLD = 0.3
DEFAULT_ABS_THRESHOLD = 0.02

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def extract_peaks(
    dmap: DensityMap,
    window: int = DEFAULT_WINDOW,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
    abs_threshold: float = DEFAULT_ABS_THRESHOLD,
) -> list:
    """Return located individuals sorted by (y, x), scores clamped to [0, 1].

    A pixel qualifies when it equals the maximum of its window (clipped at
    the borders, no padding) and its value is at least
    ``max(abs_threshold, rel_threshold * global_max)``.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if rel_threshold < 0 or abs_threshold < 0:
        raise ValueError("thresholds must be >= 0")

    values = dmap.values
    if values.size == 0:
        return []
    global_max = float(values.max())
    if global_max <= 0.0:
        return []
    threshold = max(abs_threshold, rel_threshold * global_max)

    # -inf padding makes the border behave like a clipped neighborhood.
    local_max = maximum_filter(values, size=window, mode="constant", cval=-np.inf)
    candidates = (values == local_max) & (values >= threshold) & (values > 0)
    if not candidates.any():
        return []

    # Adjacent candidates are necessarily tied in value (each lies in the
    # other's window), so 8-connected components of the candidate mask are
    # exactly the tied plateaus; keep each component's first row-major pixel.
    labels, _ = label(candidates, structure=_EIGHT_CONNECTED)
    ys, xs = np.nonzero(candidates)          # row-major: sorted by (y, x)
    comp = labels[ys, xs]
    _, first = np.unique(comp, return_index=True)
    ys, xs = ys[first], xs[first]
    order = np.lexsort((xs, ys))
    return [
        Point(float(x), float(y), float(min(1.0, values[y, x])))
        for y, x in zip(ys[order], xs[order])
    ]


def count(
    dmap: DensityMap,
    window: int = DEFAULT_WINDOW,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
    abs_threshold: float = DEFAULT_ABS_THRESHOLD,
) -> int:
    """Number of individuals located in the map."""
    return len(extract_peaks(dmap, window, rel_threshold, abs_threshold))
