"""Pluggable model backends, selected by identifier.

No pretrained network is bundled: the ``stub*`` identifiers are
deterministic image-derived baselines good enough to exercise the full
export path, and an unknown identifier is a hard error rather than a
silent fallback.  Real backends register the same three callables.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


class ModelError(RuntimeError):
    """A model identifier could not be resolved or executed."""


def _luminance(frame: np.ndarray) -> np.ndarray:
    return frame.astype(np.float64).mean(axis=2)


# ------------------------------------------------------------------ density


def _stub_density(frame: np.ndarray) -> np.ndarray:
    """Smoothed luminance as a presence likelihood."""
    smooth = gaussian_filter(_luminance(frame) / 255.0, sigma=2.0)
    return np.maximum(smooth, 0.0).astype(np.float32)


# --------------------------------------------------------------- appearance


def _clamped_window(dim: int, center: float, size: int) -> int:
    start = int(np.floor(center + 0.5)) - size // 2
    return min(max(start, 0), dim - size)


def crop(frame: np.ndarray, x: float, y: float, size: int) -> np.ndarray:
    """Square window centered on the rounded point, shifted inward at the
    borders so the output is always size x size."""
    h, w = frame.shape[:2]
    if size > h or size > w:
        raise ModelError(f"patch size {size} exceeds frame dimensions {w}x{h}")
    x0 = _clamped_window(w, x, size)
    y0 = _clamped_window(h, y, size)
    return frame[y0 : y0 + size, x0 : x0 + size]


def _normalize_rows(vecs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    return (vecs / np.where(norms > 0, norms, 1.0)).astype(np.float32)


def _stub_features(frame: np.ndarray, points: list, size: int) -> np.ndarray:
    """Grayscale patch pixels, flattened row-major and L2-normalized."""
    vecs = np.zeros((len(points), size * size), dtype=np.float64)
    for j, (x, y, _) in enumerate(points):
        vecs[j] = (_luminance(crop(frame, x, y, size)) / 255.0).reshape(-1)
    return _normalize_rows(vecs)


def _stub_rgb_features(frame: np.ndarray, points: list, size: int) -> np.ndarray:
    """All three channels flattened; three times the grayscale stub's dim."""
    vecs = np.zeros((len(points), 3 * size * size), dtype=np.float64)
    for j, (x, y, _) in enumerate(points):
        patch = crop(frame, x, y, size).astype(np.float64) / 255.0
        vecs[j] = patch.reshape(-1)
    return _normalize_rows(vecs)


# ------------------------------------------------------------------- motion


def _stub_motion(prev_frame: np.ndarray, next_frame: np.ndarray) -> np.ndarray:
    """No motion evidence: every pixel carries the zero vector."""
    h, w = next_frame.shape[:2]
    return np.zeros((h, w, 3), dtype=np.float32)


_REGISTRY = {
    "counting": {"stub": _stub_density},
    "appearance": {"stub": _stub_features, "stub-rgb": _stub_rgb_features},
    "motion": {"stub": _stub_motion},
}


def resolve(kind: str, identifier: str):
    if kind not in _REGISTRY:
        raise ModelError(
            f"unknown model kind {kind!r}; expected one of "
            f"{sorted(_REGISTRY)}"
        )
    backends = _REGISTRY[kind]
    if identifier not in backends:
        raise ModelError(
            f"no {kind} model named {identifier!r}; available: "
            f"{sorted(backends)}"
        )
    return backends[identifier]
