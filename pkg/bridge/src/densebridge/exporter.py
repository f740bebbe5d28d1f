"""Export operations: run a model backend over raw frames and serialize the
outputs into the engine's interchange formats.

Each export refreshes ``bundle.txt`` from the directory contents, so running
the kinds in any order leaves a consistent manifest.  Feature export copies
the points files it consumed into the output directory: the feature rows are
only meaningful next to the exact point list they were extracted for.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import formats, models
from .models import ModelError

log = logging.getLogger("densebridge")

KINDS = ("density", "features", "motion")


@dataclass
class ExtractorSpec:
    kind: str                 # density | features | motion
    model: str                # backend identifier
    frames_dir: str
    out_dir: str
    points_dir: str | None = None
    patch_size: int = 20

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.patch_size < 1:
            raise ValueError("patch size must be >= 1")
        if os.path.abspath(self.out_dir) == os.path.abspath(self.frames_dir):
            raise ValueError("output directory must differ from the frame directory")


def _load_frames(spec: ExtractorSpec) -> list:
    paths = formats.list_frames(spec.frames_dir)
    frames = [formats.read_ppm(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"frames disagree on dimensions: {sorted(shapes)}")
    return frames


def _refresh_manifest(out_dir: str, n: int, width: int, height: int) -> None:
    names = os.listdir(out_dir)
    has_features = all(
        f"frame_{i:06d}.feat" in names for i in range(n)
    ) and n > 0
    text = formats.manifest_text(n, width, height, has_features)
    formats.atomic_write(
        os.path.join(out_dir, "bundle.txt"), text.encode("utf-8")
    )


def export_density(spec: ExtractorSpec) -> list:
    """One .dmap per frame; values are clamped non-negative and affinely
    rescaled into [0, 1] when the raw model output exceeds that range."""
    spec.validate()
    backend = models.resolve("counting", spec.model)
    frames = _load_frames(spec)
    os.makedirs(spec.out_dir, exist_ok=True)
    written = []
    for i, frame in enumerate(frames):
        dmap = np.asarray(backend(frame), dtype=np.float32)
        if dmap.shape != frame.shape[:2]:
            raise ModelError(
                f"model {spec.model!r} returned {dmap.shape} for a "
                f"{frame.shape[:2]} frame"
            )
        dmap = np.maximum(dmap, 0.0)
        peak = float(dmap.max())
        if peak > 1.0:
            log.info("frame %d: rescaling density by 1/%.4f", i, peak)
            dmap = dmap / peak
        path = os.path.join(spec.out_dir, f"frame_{i:06d}.dmap")
        formats.atomic_write(path, formats.density_bytes(dmap))
        written.append(path)
    h, w = frames[0].shape[:2]
    _refresh_manifest(spec.out_dir, len(frames), w, h)
    return written


def export_features(spec: ExtractorSpec) -> list:
    """One .feat per frame, row i aligned with points row i; the consumed
    .pts files are copied alongside so the alignment ships with the bundle."""
    spec.validate()
    if spec.points_dir is None:
        raise ValueError("feature export needs --points")
    backend = models.resolve("appearance", spec.model)
    frames = _load_frames(spec)
    per_frame_points = []
    for i in range(len(frames)):
        path = os.path.join(spec.points_dir, f"frame_{i:06d}.pts")
        if not os.path.isfile(path):
            raise ValueError(f"{path}: points file not found")
        per_frame_points.append(formats.read_points_csv(path))

    os.makedirs(spec.out_dir, exist_ok=True)
    written = []
    dims = set()
    for i, (frame, points) in enumerate(zip(frames, per_frame_points)):
        vecs = np.asarray(backend(frame, points, spec.patch_size),
                          dtype=np.float32)
        if vecs.shape[0] != len(points):
            raise ModelError(
                f"model {spec.model!r} returned {vecs.shape[0]} vectors for "
                f"{len(points)} points at frame {i}"
            )
        dims.add(vecs.shape[1])
        if len(dims) != 1:
            raise ModelError(f"model {spec.model!r} changed dim across frames")
        path = os.path.join(spec.out_dir, f"frame_{i:06d}.feat")
        formats.atomic_write(path, formats.features_bytes(vecs))
        formats.atomic_write(
            os.path.join(spec.out_dir, f"frame_{i:06d}.pts"),
            formats.points_text(points).encode("utf-8"),
        )
        written.append(path)
    h, w = frames[0].shape[:2]
    _refresh_manifest(spec.out_dir, len(frames), w, h)
    return written


def export_motion(spec: ExtractorSpec) -> list:
    """N-1 .mpm files indexed by the later frame; vector norms are rescaled
    into the unit ball when a raw model output exceeds it."""
    spec.validate()
    backend = models.resolve("motion", spec.model)
    frames = _load_frames(spec)
    if len(frames) < 2:
        raise ValueError("motion export needs at least 2 frames")
    os.makedirs(spec.out_dir, exist_ok=True)
    written = []
    for i in range(len(frames) - 1):
        field = np.asarray(backend(frames[i], frames[i + 1]), dtype=np.float32)
        if field.shape != frames[0].shape[:2] + (3,):
            raise ModelError(
                f"model {spec.model!r} returned {field.shape}, expected "
                f"{frames[0].shape[:2] + (3,)}"
            )
        norms = np.linalg.norm(field.astype(np.float64), axis=2)
        worst = float(norms.max())
        if worst > 1.0:
            log.info("pair %d: rescaling motion vectors by 1/%.4f", i + 1, worst)
            field = (field / worst).astype(np.float32)
        field[:, :, 2] = np.maximum(field[:, :, 2], 0.0)
        path = os.path.join(spec.out_dir, f"pair_{i + 1:06d}.mpm")
        formats.atomic_write(path, formats.motion_bytes(field))
        written.append(path)
    h, w = frames[0].shape[:2]
    _refresh_manifest(spec.out_dir, len(frames), w, h)
    return written


EXPORTERS = {
    "density": export_density,
    "features": export_features,
    "motion": export_motion,
}


def run_export(spec: ExtractorSpec) -> list:
    return EXPORTERS[spec.kind](spec)
