"""Domain types and the on-disk interchange formats.

Coordinate convention used across the whole package: ``x`` is the column
index, ``y`` the row index, origin at the top-left corner, pixel centers at
integer coordinates.  Grids are stored row-major.

A scene directory holds a ``bundle.txt`` manifest plus per-frame files:

* ``frame_%06d.dmap`` -- magic ``DMAP``, u32 version=1, u32 height, u32
  width, H*W float32 little-endian, row-major.
* ``pair_%06d.mpm``   -- magic ``MPMF``, u32 version=1, u32 height, u32
  width, three planar channels (v_x, v_y, v_z), each H*W float32
  little-endian.  The index is the *later* frame of the pair.
* ``frame_%06d.pts``  -- UTF-8 CSV ``index,x,y,score``.
* ``frame_%06d.feat`` -- magic ``FEAT``, u32 version=1, u32 count, u32 dim,
  count*dim float32 little-endian, row i aligned with points row i.
* ``frame_%06d.ppm``  -- binary P6 raster (optional raw frames).
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

MANIFEST_NAME = "bundle.txt"
DMAP_MAGIC = b"DMAP"
MPM_MAGIC = b"MPMF"
FEAT_MAGIC = b"FEAT"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """A file does not conform to its declared binary/text layout."""


class ValidationError(ValueError):
    """Data is structurally readable but violates a type invariant."""


class ConfigError(ValueError):
    """A pipeline configuration value is out of its allowed range."""


@dataclass(frozen=True)
class Point:
    """A located individual: x = column, y = row, score in [0, 1]."""

    x: float
    y: float
    score: float = 1.0


# Ordered per-frame list of located individuals; list position is the
# canonical index used for feature alignment.
FramePoints = list


@dataclass
class DensityMap:
    """Per-frame non-negative likelihood grid, shape (height, width)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValidationError("density map must be 2-D")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, DensityMap) and np.array_equal(
            self.values, other.values
        )


@dataclass
class MotionField:
    """Per-pixel encoded motion vectors, shape (height, width, 3).

    Channels are (v_x, v_y, v_z).  The offset a pixel encodes is
    (v_x / v_z, v_y / v_z); pixels with v_z == 0 carry no motion evidence.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3 or self.values.shape[2] != 3:
            raise ValidationError("motion field must have shape (H, W, 3)")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, MotionField) and np.array_equal(
            self.values, other.values
        )


@dataclass
class FeatureSet:
    """Appearance vectors for one frame, shape (count, dim), row i belongs
    to points row i."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValidationError("feature set must be 2-D (count, dim)")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSet) and np.array_equal(
            self.vectors, other.vectors
        )


@dataclass
class Trajectory:
    """Identity-stamped sequence of (frame_index, Point) observations."""

    id: int
    observations: list = field(default_factory=list)

    def __post_init__(self):
        frames = [f for f, _ in self.observations]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValidationError(
                f"trajectory {self.id}: frame indices must be strictly increasing"
            )

    @property
    def frames(self) -> list:
        return [f for f, _ in self.observations]

    def point_at(self, frame: int):
        for f, p in self.observations:
            if f == frame:
                return p
        return None


@dataclass
class SceneBundle:
    """Everything the tracker consumes for one scene.

    ``motion[k]`` describes motion from frame k to frame k+1 (it is frame
    k+1's motion/position map).  ``points`` and ``features`` are optional;
    when ``features`` is present its per-frame count must match ``points``.
    """

    width: int
    height: int
    density: list
    motion: list
    points: list | None = None
    features: list | None = None
    images: list | None = None

    @property
    def frame_count(self) -> int:
        return len(self.density)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SceneBundle):
            return False
        if (self.width, self.height) != (other.width, other.height):
            return False
        if self.density != other.density or self.motion != other.motion:
            return False
        # with zero frames, an empty per-frame list and None are the same
        # thing on disk, so they compare equal
        def norm(v):
            return None if (self.frame_count == 0 and not v) else v

        if norm(self.points) != norm(other.points):
            return False
        if norm(self.features) != norm(other.features):
            return False
        a, b = norm(self.images), norm(other.images)
        if (a is None) != (b is None):
            return False
        if a is not None:
            if len(a) != len(b) or any(
                not np.array_equal(x, y) for x, y in zip(a, b)
            ):
                return False
        return True


@dataclass
class PipelineConfig:
    """Tracking-pipeline knobs; CLI flags map 1:1 onto these fields."""

    lambda_: float = 0.9          # fusion weight, --lambda
    retrieval_backend: str = "diffusion"
    gate_score: float = -0.45     # fused scores below this dissolve a match
    peak_window: int = 3
    peak_rel_threshold: float = 0.3
    peak_abs_threshold: float = 0.02
    patch_size: int = 20
    alpha: float = 0.9            # diffusion damping
    knn_k: int = 10
    gamma: float = 3.0
    matcher: str = "hungarian"
    seed: int = 0

    BACKENDS = ("cosine", "euclidean", "diffusion")
    MATCHERS = ("hungarian", "greedy")

    def validate(self) -> None:
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lambda_}")
        if self.retrieval_backend not in self.BACKENDS:
            raise ConfigError(
                f"retrieval backend must be one of {self.BACKENDS}, "
                f"got {self.retrieval_backend!r}"
            )
        if self.matcher not in self.MATCHERS:
            raise ConfigError(
                f"matcher must be one of {self.MATCHERS}, got {self.matcher!r}"
            )
        if self.peak_window < 3 or self.peak_window % 2 == 0:
            raise ConfigError(
                f"peak window must be odd and >= 3, got {self.peak_window}"
            )
        if not 0.0 <= self.peak_rel_threshold <= 1.0:
            raise ConfigError("peak rel threshold must be in [0, 1]")
        if self.peak_abs_threshold < 0:
            raise ConfigError("peak abs threshold must be >= 0")
        if self.patch_size < 1:
            raise ConfigError("patch size must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")

    def as_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "retrieval_backend": self.retrieval_backend,
            "gate_score": self.gate_score,
            "peak_window": self.peak_window,
            "peak_rel_threshold": self.peak_rel_threshold,
            "peak_abs_threshold": self.peak_abs_threshold,
            "patch_size": self.patch_size,
            "alpha": self.alpha,
            "knn_k": self.knn_k,
            "gamma": self.gamma,
            "matcher": self.matcher,
            "seed": self.seed,
        }


# --------------------------------------------------------------- validation


def validate_bundle(bundle: SceneBundle) -> list:
    """Check every type invariant; return violation strings (empty = valid).

    Violations are data, not errors: each one names the frame index and the
    offending field.
    """
    out = []
    n = bundle.frame_count
    h, w = bundle.height, bundle.width

    for i, dm in enumerate(bundle.density):
        if (dm.height, dm.width) != (h, w):
            out.append(
                f"frame {i}: density map shape {(dm.height, dm.width)} != {(h, w)}"
            )
        if not np.all(np.isfinite(dm.values)):
            out.append(f"frame {i}: density map has non-finite values")
        elif np.any(dm.values < 0):
            out.append(f"frame {i}: density map has negative values")

    expected_fields = n - 1 if n >= 1 else 0
    if len(bundle.motion) != expected_fields:
        out.append(
            f"bundle: expected {expected_fields} motion fields, got {len(bundle.motion)}"
        )
    for k, mf in enumerate(bundle.motion):
        pair = f"pair {k}->{k + 1}"
        if (mf.height, mf.width) != (h, w):
            out.append(f"{pair}: motion field shape mismatch")
            continue
        v = mf.values
        if not np.all(np.isfinite(v)):
            out.append(f"{pair}: motion field has non-finite values")
            continue
        norms = np.sqrt((v.astype(np.float64) ** 2).sum(axis=2))
        bad = np.argwhere(norms > 1.0 + 1e-6)
        if bad.size:
            y, x = bad[0]
            out.append(
                f"{pair}: motion vector norm {norms[y, x]:.4f} > 1 at pixel "
                f"(x={x}, y={y})"
            )
        neg = np.argwhere(v[:, :, 2] < 0)
        if neg.size:
            y, x = neg[0]
            out.append(f"{pair}: v_z < 0 at pixel (x={x}, y={y})")

    if bundle.points is not None:
        if len(bundle.points) != n:
            out.append(
                f"bundle: {len(bundle.points)} point lists for {n} frames"
            )
        for i, pts in enumerate(bundle.points):
            for j, p in enumerate(pts):
                if not (0 <= p.x < w and 0 <= p.y < h):
                    out.append(
                        f"frame {i}: point {j} at ({p.x}, {p.y}) outside "
                        f"{w}x{h} bounds"
                    )
                if not (0.0 <= p.score <= 1.0) or not np.isfinite(p.score):
                    out.append(f"frame {i}: point {j} score {p.score} not in [0, 1]")

    if bundle.features is not None:
        if len(bundle.features) != n:
            out.append(
                f"bundle: {len(bundle.features)} feature sets for {n} frames"
            )
        dims = {fs.dim for fs in bundle.features}
        if len(dims) > 1:
            out.append(f"bundle: feature dim not constant across frames: {sorted(dims)}")
        for i, fs in enumerate(bundle.features):
            if not np.all(np.isfinite(fs.vectors)):
                out.append(f"frame {i}: features have non-finite values")
            if bundle.points is not None and i < len(bundle.points):
                npts = len(bundle.points[i])
                if fs.count != npts:
                    out.append(
                        f"frame {i}: feature count {fs.count} != point count {npts}"
                    )

    if bundle.images is not None:
        if len(bundle.images) != n:
            out.append(f"bundle: {len(bundle.images)} images for {n} frames")
        for i, img in enumerate(bundle.images):
            if img.shape[:2] != (h, w):
                out.append(f"frame {i}: image shape {img.shape[:2]} != {(h, w)}")

    return out


# ------------------------------------------------------------- binary grids


def _read_exact(fh, nbytes: int, path: str) -> bytes:
    buf = fh.read(nbytes)
    if len(buf) != nbytes:
        raise FormatError(f"{path}: truncated (wanted {nbytes} bytes)")
    return buf


def _write_grid_file(path: str, magic: bytes, planes: list) -> None:
    h, w = planes[0].shape
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<III", FORMAT_VERSION, h, w))
        for plane in planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())


def _read_grid_file(path: str, magic: bytes, n_planes: int) -> np.ndarray:
    with open(path, "rb") as fh:
        got = _read_exact(fh, 4, path)
        if got != magic:
            raise FormatError(
                f"{path}: bad magic {got!r}, expected {magic!r}"
            )
        version, h, w = struct.unpack("<III", _read_exact(fh, 12, path))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        data = _read_exact(fh, 4 * h * w * n_planes, path)
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after grid data")
    arr = np.frombuffer(data, dtype="<f4").reshape(n_planes, h, w)
    return arr


def write_density(path: str, dmap: DensityMap) -> None:
    _write_grid_file(path, DMAP_MAGIC, [dmap.values])


def read_density(path: str) -> DensityMap:
    return DensityMap(_read_grid_file(path, DMAP_MAGIC, 1)[0].copy())


def write_motion(path: str, mf: MotionField) -> None:
    planes = [mf.values[:, :, c] for c in range(3)]
    _write_grid_file(path, MPM_MAGIC, planes)


def read_motion(path: str) -> MotionField:
    planes = _read_grid_file(path, MPM_MAGIC, 3)
    return MotionField(np.stack([planes[0], planes[1], planes[2]], axis=2))


def write_features(path: str, fs: FeatureSet) -> None:
    with open(path, "wb") as fh:
        fh.write(FEAT_MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, fs.count, fs.dim))
        fh.write(np.ascontiguousarray(fs.vectors, dtype="<f4").tobytes())


def read_features(path: str) -> FeatureSet:
    with open(path, "rb") as fh:
        got = _read_exact(fh, 4, path)
        if got != FEAT_MAGIC:
            raise FormatError(f"{path}: bad magic {got!r}, expected {FEAT_MAGIC!r}")
        version, count, dim = struct.unpack("<III", _read_exact(fh, 12, path))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        data = _read_exact(fh, 4 * count * dim, path)
    return FeatureSet(np.frombuffer(data, dtype="<f4").reshape(count, dim).copy())


# ---------------------------------------------------------------- CSV files


def write_points(path: str, pts: FramePoints) -> None:
    lines = ["index,x,y,score"]
    for j, p in enumerate(pts):
        lines.append(f"{j},{p.x!r},{p.y!r},{p.score!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_points(path: str) -> FramePoints:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "index,x,y,score":
        raise FormatError(f"{path}: expected header 'index,x,y,score'")
    pts = []
    for k, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        if len(cells) != 4:
            raise FormatError(f"{path}: row {k} has {len(cells)} cells, expected 4")
        idx = int(cells[0])
        if idx != k:
            raise FormatError(f"{path}: row {k} has index {idx}, expected {k}")
        pts.append(Point(float(cells[1]), float(cells[2]), float(cells[3])))
    return pts


def write_tracks_csv(trajectories: list, path: str) -> None:
    """Write trajectories as ``track_id,frame,x,y,score`` sorted by
    (track_id, frame)."""
    rows = []
    for t in trajectories:
        for f, p in t.observations:
            rows.append((t.id, f, p.x, p.y, p.score))
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = ["track_id,frame,x,y,score"]
    lines += [f"{tid},{f},{x!r},{y!r},{s!r}" for tid, f, x, y, s in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_tracks_csv(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "track_id,frame,x,y,score":
        raise FormatError(f"{path}: expected header 'track_id,frame,x,y,score'")
    obs = {}
    for k, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        if len(cells) != 5:
            raise FormatError(f"{path}: row {k} has {len(cells)} cells, expected 5")
        tid, frame = int(cells[0]), int(cells[1])
        pt = Point(float(cells[2]), float(cells[3]), float(cells[4]))
        obs.setdefault(tid, []).append((frame, pt))
    out = []
    for tid in sorted(obs):
        entries = sorted(obs[tid], key=lambda e: e[0])
        frames = [f for f, _ in entries]
        if len(set(frames)) != len(frames):
            raise ValidationError(f"{path}: track {tid} has duplicate frames")
        out.append(Trajectory(tid, entries))
    return out


# --------------------------------------------------------------- PPM raster


def write_ppm(path: str, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as a binary P6 raster."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PPM image must have shape (H, W, 3)")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise FormatError(f"{path}: bad magic, expected P6")
    # header = magic + three whitespace-separated integers, comments allowed
    pos, fields = 2, []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PPM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    raw = data[pos : pos + 3 * w * h]
    if len(raw) != 3 * w * h:
        raise FormatError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).copy()


# ------------------------------------------------------------ scene bundles


def _frame_name(stem: str, index: int, ext: str) -> str:
    return f"{stem}_{index:06d}.{ext}"


def write_bundle(bundle: SceneBundle, directory: str) -> None:
    """Write a validated bundle; output is byte-deterministic."""
    violations = validate_bundle(bundle)
    if violations:
        raise ValidationError("; ".join(violations))
    os.makedirs(directory, exist_ok=True)
    n = bundle.frame_count
    has_features = int(bundle.features is not None)
    has_images = int(bundle.images is not None)
    manifest = (
        f"frame_count={n}\n"
        f"width={bundle.width}\n"
        f"height={bundle.height}\n"
        f"has_features={has_features}\n"
        f"has_images={has_images}\n"
    )
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(manifest)
    for i in range(n):
        write_density(
            os.path.join(directory, _frame_name("frame", i, "dmap")),
            bundle.density[i],
        )
        if bundle.points is not None:
            write_points(
                os.path.join(directory, _frame_name("frame", i, "pts")),
                bundle.points[i],
            )
        if bundle.features is not None:
            write_features(
                os.path.join(directory, _frame_name("frame", i, "feat")),
                bundle.features[i],
            )
        if bundle.images is not None:
            write_ppm(
                os.path.join(directory, _frame_name("frame", i, "ppm")),
                bundle.images[i],
            )
    for k, mf in enumerate(bundle.motion):
        write_motion(
            os.path.join(directory, _frame_name("pair", k + 1, "mpm")), mf
        )


def _read_manifest(directory: str) -> dict:
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.isfile(path):
        raise FormatError(f"{path}: manifest not found")
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            if "=" not in ln:
                raise FormatError(f"{path}: bad manifest line {ln!r}")
            key, val = ln.split("=", 1)
            values[key] = val
    for key in ("frame_count", "width", "height", "has_features", "has_images"):
        if key not in values:
            raise FormatError(f"{path}: missing manifest key {key!r}")
        values[key] = int(values[key])
    return values


def read_bundle(directory: str) -> SceneBundle:
    """Read and validate a scene directory; raises on any violation."""
    man = _read_manifest(directory)
    n = man["frame_count"]
    density, motion = [], []
    for i in range(n):
        density.append(
            read_density(os.path.join(directory, _frame_name("frame", i, "dmap")))
        )
    n_fields = n - 1 if n >= 1 else 0
    found_fields = sorted(
        f for f in os.listdir(directory) if f.startswith("pair_") and f.endswith(".mpm")
    )
    if len(found_fields) != n_fields:
        raise ValidationError(
            f"{directory}: expected {n_fields} motion fields, found {len(found_fields)}"
        )
    for k in range(n_fields):
        motion.append(
            read_motion(os.path.join(directory, _frame_name("pair", k + 1, "mpm")))
        )

    points = None
    pts_files = [os.path.join(directory, _frame_name("frame", i, "pts")) for i in range(n)]
    present = [os.path.isfile(p) for p in pts_files]
    if any(present):
        if not all(present):
            missing = pts_files[present.index(False)]
            raise ValidationError(f"{directory}: missing points file {missing}")
        points = [read_points(p) for p in pts_files]

    features = None
    if man["has_features"]:
        features = [
            read_features(os.path.join(directory, _frame_name("frame", i, "feat")))
            for i in range(n)
        ]

    images = None
    if man["has_images"]:
        images = [
            read_ppm(os.path.join(directory, _frame_name("frame", i, "ppm")))
            for i in range(n)
        ]

    bundle = SceneBundle(
        width=man["width"],
        height=man["height"],
        density=density,
        motion=motion,
        points=points,
        features=features,
        images=images,
    )
    violations = validate_bundle(bundle)
    if violations:
        raise ValidationError("; ".join(violations))
    return bundle
