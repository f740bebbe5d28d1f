"""Appearance representation: patch geometry, feature flattening, and the
three appearance-similarity backends (cosine, euclidean, diffusion).

Every backend returns a (p, q) matrix with entries in [0, 1]: rows are the
previous frame's individuals, columns the next frame's.

The diffusion backend follows the usual retrieval recipe: build a mutual
k-NN affinity graph over the union of both frames' vectors, symmetrically
normalize it, and for each next-frame item solve the damped linear system
``(I - alpha * S) f = e_j``; the ranking scores are f restricted to the
previous frame's indices, min-max rescaled over the whole matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .iomodel import FeatureSet, Point

DEFAULT_PATCH_SIZE = 20
DEFAULT_ALPHA = 0.9
DEFAULT_KNN_K = 10
DEFAULT_GAMMA = 3.0

_SOLVE_TOL = 1e-8
_SOLVE_MAXITER = 1000
_RESIDUAL_BOUND = 1e-6


class NumericError(RuntimeError):
    """An iterative solve failed to converge; message carries the residual."""


@dataclass
class Patch:
    """Square crop around a located individual."""

    pixels: np.ndarray
    point_index: int = -1

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


def crop_patch(image: np.ndarray, point: Point, size: int = DEFAULT_PATCH_SIZE,
               point_index: int = -1) -> Patch:
    """Cut a size x size window centered at the rounded point.

    Windows that would extend past a border are shifted inward, so the
    output is always full-size.
    """
    if size < 1:
        raise ValueError("patch size must be >= 1")
    h, w = image.shape[:2]
    if size > h or size > w:
        raise ValueError(f"patch size {size} exceeds image dimensions {w}x{h}")
    if not (0 <= point.x < w and 0 <= point.y < h):
        raise ValueError(f"point ({point.x}, {point.y}) outside image bounds")
    cx = int(math.floor(point.x + 0.5))
    cy = int(math.floor(point.y + 0.5))
    x0 = min(max(cx - size // 2, 0), w - size)
    y0 = min(max(cy - size // 2, 0), h - size)
    return Patch(image[y0 : y0 + size, x0 : x0 + size].copy(), point_index)


def flatten(matrix: np.ndarray) -> np.ndarray:
    """Row-major flattening of a 2-D feature grid."""
    arr = np.asarray(matrix)
    if arr.size == 0:
        raise ValueError("cannot flatten an empty matrix")
    return arr.reshape(-1)


def _check_dims(f_prev: FeatureSet, f_next: FeatureSet) -> None:
    if f_prev.dim != f_next.dim:
        raise ValueError(
            f"feature dim mismatch: {f_prev.dim} vs {f_next.dim}"
        )


def _cosine_raw(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine matrix in [-1, 1]; pairs involving a zero vector get 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    an = np.divide(a, na[:, None], out=np.zeros_like(a), where=na[:, None] > 0)
    bn = np.divide(b, nb[:, None], out=np.zeros_like(b), where=nb[:, None] > 0)
    return np.clip(an @ bn.T, -1.0, 1.0)


def similarity_cosine(f_prev: FeatureSet, f_next: FeatureSet) -> np.ndarray:
    """(1 + cos) / 2 per pair; zero vectors score the neutral 0.5."""
    _check_dims(f_prev, f_next)
    return (1.0 + _cosine_raw(f_prev.vectors, f_next.vectors)) / 2.0


def similarity_euclidean(f_prev: FeatureSet, f_next: FeatureSet) -> np.ndarray:
    """1 / (1 + ||f_k - f_j||) per pair."""
    _check_dims(f_prev, f_next)
    p, q = f_prev.count, f_next.count
    if p == 0 or q == 0:
        return np.zeros((p, q), dtype=np.float64)
    d = cdist(
        f_prev.vectors.astype(np.float64),
        f_next.vectors.astype(np.float64),
        metric="euclidean",
    )
    return 1.0 / (1.0 + d)


def _cg_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Conjugate-gradient solve of a symmetric positive-definite system for
    a block of right-hand sides; raises NumericError past the iteration cap.
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rs = (r * r).sum(axis=0)
    for _ in range(_SOLVE_MAXITER):
        active = np.sqrt(rs) > _SOLVE_TOL
        if not active.any():
            break
        ap = a @ p
        denom = (p * ap).sum(axis=0)
        step = np.where(active & (denom > 0), rs / np.where(denom > 0, denom, 1.0), 0.0)
        x += step[None, :] * p
        r -= step[None, :] * ap
        rs_new = (r * r).sum(axis=0)
        beta = np.where(active, rs_new / np.where(rs > 0, rs, 1.0), 0.0)
        p = r + beta[None, :] * p
        rs = rs_new
    else:
        worst = float(np.sqrt(rs).max())
        raise NumericError(
            f"diffusion solve did not converge in {_SOLVE_MAXITER} iterations "
            f"(residual {worst:.3e})"
        )
    return x


def similarity_diffusion(
    f_prev: FeatureSet,
    f_next: FeatureSet,
    alpha: float = DEFAULT_ALPHA,
    knn_k: int = DEFAULT_KNN_K,
    gamma: float = DEFAULT_GAMMA,
) -> np.ndarray:
    """Graph-diffusion similarity over the union of both frames' vectors."""
    _check_dims(f_prev, f_next)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if knn_k < 1:
        raise ValueError("knn_k must be >= 1")
    p, q = f_prev.count, f_next.count
    if p == 0 or q == 0:
        return np.zeros((p, q), dtype=np.float64)

    union = np.concatenate([f_prev.vectors, f_next.vectors], axis=0)
    n = p + q
    aff = np.maximum(0.0, _cosine_raw(union, union)) ** gamma
    np.fill_diagonal(aff, 0.0)

    k = min(knn_k, n - 1)
    if k >= 1 and n > 1:
        order = np.argsort(-aff, axis=1)
        keep = np.zeros((n, n), dtype=bool)
        rows = np.repeat(np.arange(n), k)
        keep[rows, order[:, :k].reshape(-1)] = True
        keep &= keep.T  # mutual neighbors only
        aff = np.where(keep, aff, 0.0)

    deg = aff.sum(axis=1)
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros_like(deg), where=deg > 0)
    s = inv_sqrt[:, None] * aff * inv_sqrt[None, :]

    system = np.eye(n) - alpha * s
    rhs = np.zeros((n, q), dtype=np.float64)
    rhs[p + np.arange(q), np.arange(q)] = 1.0
    solution = _cg_solve(system, rhs)

    residual = np.linalg.norm(system @ solution - rhs, axis=0)
    if residual.max() > _RESIDUAL_BOUND:
        raise NumericError(
            f"diffusion solve residual {residual.max():.3e} exceeds "
            f"{_RESIDUAL_BOUND:.0e}"
        )

    raw = solution[:p, :]
    mn, mx = float(raw.min()), float(raw.max())
    if mx == mn:
        # a flat response carries no ranking evidence: neutral 0.5
        return np.full((p, q), 0.5)
    return (raw - mn) / (mx - mn)
