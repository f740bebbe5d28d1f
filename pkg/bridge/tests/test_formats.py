"""Format conformance: everything the bridge writes must round-trip through
the engine's own readers."""

import os

import numpy as np
import pytest
from denseassoc import iomodel

from densebridge import formats


def test_density_bytes_read_by_engine(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.uniform(0, 1, (9, 13)).astype(np.float32)
    path = tmp_path / "frame_000000.dmap"
    formats.atomic_write(str(path), formats.density_bytes(values))
    back = iomodel.read_density(str(path))
    assert np.array_equal(back.values, values)


def test_motion_bytes_read_by_engine(tmp_path):
    rng = np.random.default_rng(1)
    d = rng.uniform(-4, 4, (7, 8, 2))
    norm = np.sqrt(d[:, :, 0] ** 2 + d[:, :, 1] ** 2 + 1.0)
    field = np.stack(
        [d[:, :, 0] / norm, d[:, :, 1] / norm, 1.0 / norm], axis=2
    ).astype(np.float32)
    path = tmp_path / "pair_000001.mpm"
    formats.atomic_write(str(path), formats.motion_bytes(field))
    back = iomodel.read_motion(str(path))
    assert np.array_equal(back.values, field)


def test_features_bytes_read_by_engine(tmp_path):
    rng = np.random.default_rng(2)
    vecs = rng.normal(size=(4, 11)).astype(np.float32)
    path = tmp_path / "frame_000000.feat"
    formats.atomic_write(str(path), formats.features_bytes(vecs))
    back = iomodel.read_features(str(path))
    assert np.array_equal(back.vectors, vecs)


def test_points_text_read_by_engine(tmp_path):
    rows = [(1.5, 2.25, 0.75), (30.0, 40.5, 1.0)]
    path = tmp_path / "frame_000000.pts"
    path.write_text(formats.points_text(rows), encoding="utf-8")
    back = iomodel.read_points(str(path))
    assert [(p.x, p.y, p.score) for p in back] == rows


def test_points_csv_round_trip(tmp_path):
    rows = [(3.0, 4.0, 0.5)]
    path = tmp_path / "frame_000000.pts"
    path.write_text(formats.points_text(rows), encoding="utf-8")
    assert formats.read_points_csv(str(path)) == rows


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = tmp_path / "out.bin"
    formats.atomic_write(str(path), b"payload")
    assert path.read_bytes() == b"payload"
    assert os.listdir(tmp_path) == ["out.bin"]


def test_ppm_reader_matches_engine_writer(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(5, 6, 3), dtype=np.uint8)
    path = tmp_path / "frame.ppm"
    iomodel.write_ppm(str(path), img)
    assert np.array_equal(formats.read_ppm(str(path)), img)


def test_list_frames_requires_frames(tmp_path):
    with pytest.raises(ValueError):
        formats.list_frames(str(tmp_path))
