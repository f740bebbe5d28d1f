"""Motion representation: encoding per-pixel motion offsets, decoding them
at located positions, predicting previous-frame positions, and building the
position distance matrix.

The stored vector at a covered pixel is ``L * (dx, dy, 1) / ||(dx, dy, 1)||``
where ``(dx, dy)`` is the previous-minus-next displacement and ``L`` is a
Gaussian presence likelihood.  Dividing the x/y channels by the z channel
recovers the full offset, so magnitude survives the unit-norm encoding.
"""

from __future__ import annotations

import math

import numpy as np

from .iomodel import MotionField, Point

EPS_Z = 1e-6  # below this the pixel carries no motion evidence

DEFAULT_SIGMA = 3.0
DEFAULT_RADIUS = 9.0


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def encode_mpm(
    prev_points: list,
    next_points: list,
    correspondence: dict,
    sigma: float = DEFAULT_SIGMA,
    radius: float = DEFAULT_RADIUS,
    shape: tuple = None,
) -> MotionField:
    """Build the motion field for a frame pair from known correspondences.

    ``correspondence`` maps next-frame index j to previous-frame index k.
    Pixels within ``radius`` of a next-frame individual store its encoded
    offset scaled by the Gaussian likelihood of that pixel; where coverage
    overlaps, the larger likelihood wins.  Uncovered pixels stay (0, 0, 0).
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if shape is None:
        raise ValueError("shape (height, width) is required")
    h, w = shape
    field = np.zeros((h, w, 3), dtype=np.float32)
    best_l = np.zeros((h, w), dtype=np.float64)

    for j, k in sorted(correspondence.items()):
        if not 0 <= j < len(next_points):
            raise IndexError(f"correspondence next index {j} out of range")
        if not 0 <= k < len(prev_points):
            raise IndexError(f"correspondence prev index {k} out of range")
        c_next = next_points[j]
        c_prev = prev_points[k]
        dx = c_prev.x - c_next.x
        dy = c_prev.y - c_next.y
        norm = math.sqrt(dx * dx + dy * dy + 1.0)
        vec = np.array([dx / norm, dy / norm, 1.0 / norm], dtype=np.float64)

        x0 = max(0, _round_half_up(c_next.x - radius))
        x1 = min(w - 1, _round_half_up(c_next.x + radius))
        y0 = max(0, _round_half_up(c_next.y - radius))
        y1 = min(h - 1, _round_half_up(c_next.y + radius))
        if x0 > x1 or y0 > y1:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64)
        ys = np.arange(y0, y1 + 1, dtype=np.float64)
        d2 = (xs[None, :] - c_next.x) ** 2 + (ys[:, None] - c_next.y) ** 2
        likelihood = np.exp(-d2 / (2.0 * sigma * sigma))
        likelihood[d2 > radius * radius] = 0.0

        window = best_l[y0 : y1 + 1, x0 : x1 + 1]
        take = likelihood > window
        if take.any():
            window[take] = likelihood[take]
            sub = field[y0 : y1 + 1, x0 : x1 + 1]
            sub[take] = (likelihood[take][:, None] * vec[None, :]).astype(np.float32)
    return MotionField(field)


def decode_offset(field: MotionField, point: Point) -> tuple:
    """Read the motion offset at the nearest integer pixel to ``point``.

    Returns (0, 0) when the pixel carries no motion evidence (v_z <= eps).
    """
    h, w = field.height, field.width
    if not (0 <= point.x < w and 0 <= point.y < h):
        raise ValueError(
            f"point ({point.x}, {point.y}) outside {w}x{h} field bounds"
        )
    px = min(w - 1, max(0, _round_half_up(point.x)))
    py = min(h - 1, max(0, _round_half_up(point.y)))
    vx, vy, vz = (float(c) for c in field.values[py, px])
    if vz <= EPS_Z:
        return (0.0, 0.0)
    return (vx / vz, vy / vz)


def predict_prev_positions(next_points: list, field: MotionField) -> list:
    """Estimate where each next-frame individual was in the previous frame.

    Output is index-aligned with ``next_points``; predictions are clamped
    to the field bounds.
    """
    h, w = field.height, field.width
    out = []
    for p in next_points:
        dx, dy = decode_offset(field, p)
        x = min(float(w - 1), max(0.0, p.x + dx))
        y = min(float(h - 1), max(0.0, p.y + dy))
        out.append(Point(x, y, p.score))
    return out


def distance_matrix(prev_points: list, predicted: list) -> np.ndarray:
    """Euclidean pixel distances, shape (len(prev), len(predicted))."""
    p, q = len(prev_points), len(predicted)
    if p == 0 or q == 0:
        return np.zeros((p, q), dtype=np.float64)
    a = np.array([[pt.x, pt.y] for pt in prev_points], dtype=np.float64)
    b = np.array([[pt.x, pt.y] for pt in predicted], dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def rescale01(m: np.ndarray) -> np.ndarray:
    """Affine rescale into [0, 1]; a constant matrix maps to all zeros."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return m.copy()
    mn, mx = float(m.min()), float(m.max())
    if mx == mn:
        return np.zeros_like(m)
    return (m - mn) / (mx - mn)
