"""Writers (and the frame reader) for the tracking engine's interchange
formats.  Implemented against the format contract, not against the engine's
code; conformance is covered by round-tripping through the engine's reader
in the test suite.

Formats:

* ``bundle.txt``       -- ``frame_count``, ``width``, ``height``,
  ``has_features``, ``has_images`` as ``key=value`` lines.
* ``frame_%06d.dmap``  -- ``DMAP``, u32 version=1, u32 height, u32 width,
  H*W float32 little-endian row-major.
* ``pair_%06d.mpm``    -- ``MPMF``, u32 version=1, u32 height, u32 width,
  three planar float32 channels (v_x, v_y, v_z); index = later frame.
* ``frame_%06d.pts``   -- CSV ``index,x,y,score``.
* ``frame_%06d.feat``  -- ``FEAT``, u32 version=1, u32 count, u32 dim,
  count*dim float32 little-endian.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

VERSION = 1


def atomic_write(path: str, payload: bytes) -> None:
    """Write-temp-then-rename so partially written files never appear."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def density_bytes(values: np.ndarray) -> bytes:
    h, w = values.shape
    head = b"DMAP" + struct.pack("<III", VERSION, h, w)
    return head + np.ascontiguousarray(values, dtype="<f4").tobytes()


def motion_bytes(field: np.ndarray) -> bytes:
    h, w, _ = field.shape
    head = b"MPMF" + struct.pack("<III", VERSION, h, w)
    planes = b"".join(
        np.ascontiguousarray(field[:, :, c], dtype="<f4").tobytes()
        for c in range(3)
    )
    return head + planes


def features_bytes(vectors: np.ndarray) -> bytes:
    count, dim = vectors.shape
    head = b"FEAT" + struct.pack("<III", VERSION, count, dim)
    return head + np.ascontiguousarray(vectors, dtype="<f4").tobytes()


def points_text(points: list) -> str:
    lines = ["index,x,y,score"]
    lines += [f"{j},{x!r},{y!r},{s!r}" for j, (x, y, s) in enumerate(points)]
    return "\n".join(lines) + "\n"


def read_points_csv(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "index,x,y,score":
        raise ValueError(f"{path}: expected header 'index,x,y,score'")
    out = []
    for ln in lines[1:]:
        _, x, y, s = ln.split(",")
        out.append((float(x), float(y), float(s)))
    return out


def manifest_text(frame_count: int, width: int, height: int,
                  has_features: bool, has_images: bool = False) -> str:
    return (
        f"frame_count={frame_count}\n"
        f"width={width}\n"
        f"height={height}\n"
        f"has_features={int(has_features)}\n"
        f"has_images={int(has_images)}\n"
    )


def read_ppm(path: str) -> np.ndarray:
    """Binary P6 frame, returned as (H, W, 3) uint8."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: expected a P6 raster")
    pos, fields = 2, []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    raw = data[pos : pos + 3 * w * h]
    if len(raw) != 3 * w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).copy()


def list_frames(directory: str) -> list:
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith(".ppm")
    )
    if not names:
        raise ValueError(f"{directory}: no .ppm frames found")
    return [os.path.join(directory, n) for n in names]
