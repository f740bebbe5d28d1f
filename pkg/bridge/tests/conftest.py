import numpy as np
import pytest

DOT_TRACKS = [
    # (start_x, start_y, vx, vy) for three bright dots on a 64x64 clip
    (12.0, 14.0, 1.5, 0.5),
    (40.0, 20.0, -1.0, 1.0),
    (25.0, 48.0, 0.5, -1.5),
]
N_FRAMES = 5
SIZE = 64


def write_p6(path, img):
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.astype(np.uint8).tobytes())


def render_frame(positions):
    ys, xs = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    lum = np.zeros((SIZE, SIZE), dtype=np.float64)
    for x, y in positions:
        lum += np.exp(-((xs - x) ** 2 + (ys - y) ** 2) / (2 * 2.0**2))
    img = np.clip(lum * 255.0, 0, 255).astype(np.uint8)
    return np.stack([img, img, img], axis=2)


@pytest.fixture()
def toy_clip(tmp_path):
    """Five 64x64 frames with three moving bright dots; returns the frame
    directory and the per-frame dot positions."""
    frames_dir = tmp_path / "frames"
    frames_dir.mkdir()
    per_frame = []
    for f in range(N_FRAMES):
        positions = [
            (x0 + vx * f, y0 + vy * f) for x0, y0, vx, vy in DOT_TRACKS
        ]
        per_frame.append(positions)
        write_p6(frames_dir / f"frame_{f:06d}.ppm", render_frame(positions))
    return frames_dir, per_frame


@pytest.fixture()
def toy_points_dir(tmp_path, toy_clip):
    """Points files for the toy clip at the known dot positions."""
    from densebridge import formats

    _, per_frame = toy_clip
    points_dir = tmp_path / "points"
    points_dir.mkdir()
    for f, positions in enumerate(per_frame):
        rows = [(x, y, 1.0) for x, y in positions]
        (points_dir / f"frame_{f:06d}.pts").write_text(
            formats.points_text(rows), encoding="utf-8"
        )
    return points_dir
