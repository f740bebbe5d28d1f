import math

import numpy as np
import pytest

from denseassoc.iomodel import MotionField, Point
from denseassoc.motionrep import (
    decode_offset,
    distance_matrix,
    encode_mpm,
    predict_prev_positions,
    rescale01,
)


def test_stationary_encoding_is_unit_z():
    field = encode_mpm(
        [Point(10, 10)], [Point(10, 10)], {0: 0}, sigma=3, radius=9,
        shape=(32, 32),
    )
    vx, vy, vz = field.values[10, 10]
    assert (vx, vy) == (0.0, 0.0)
    assert vz == pytest.approx(1.0, abs=1e-7)


def test_moving_encoding_matches_hand_normalization():
    # d = prev - next = (-3, -4); unit 3-vector = (-3, -4, 1) / sqrt(26)
    field = encode_mpm(
        [Point(10, 10)], [Point(13, 14)], {0: 0}, sigma=3, radius=9,
        shape=(32, 32),
    )
    v = field.values[14, 13].astype(np.float64)
    n = math.sqrt(26.0)
    assert v[0] == pytest.approx(-3.0 / n, abs=1e-6)
    assert v[1] == pytest.approx(-4.0 / n, abs=1e-6)
    assert v[2] == pytest.approx(1.0 / n, abs=1e-6)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-6)


def test_empty_points_give_zero_field():
    field = encode_mpm([], [], {}, sigma=3, radius=9, shape=(16, 16))
    assert not field.values.any()


def test_encode_rejects_bad_correspondence():
    with pytest.raises(IndexError):
        encode_mpm([Point(1, 1)], [Point(2, 2)], {0: 5}, shape=(8, 8))
    with pytest.raises(IndexError):
        encode_mpm([Point(1, 1)], [Point(2, 2)], {3: 0}, shape=(8, 8))


def test_norm_bounded_everywhere():
    rng = np.random.default_rng(0)
    prev = [Point(float(x), float(y)) for x, y in rng.uniform(5, 58, (12, 2))]
    nxt = [
        Point(min(63.0, max(0.0, p.x + dx)), min(63.0, max(0.0, p.y + dy)))
        for p, (dx, dy) in zip(prev, rng.uniform(-6, 6, (12, 2)))
    ]
    field = encode_mpm(prev, nxt, {j: j for j in range(12)}, shape=(64, 64))
    norms = np.linalg.norm(field.values.astype(np.float64), axis=2)
    assert norms.max() <= 1.0 + 1e-6


def test_decode_round_trip():
    field = encode_mpm(
        [Point(10, 10)], [Point(13, 14)], {0: 0}, sigma=3, radius=9,
        shape=(32, 32),
    )
    dx, dy = decode_offset(field, Point(13, 14))
    assert dx == pytest.approx(-3.0, abs=1e-5)
    assert dy == pytest.approx(-4.0, abs=1e-5)


def test_decode_zero_field_and_stationary():
    zero = MotionField(np.zeros((16, 16, 3), dtype=np.float32))
    assert decode_offset(zero, Point(5, 5)) == (0.0, 0.0)
    field = encode_mpm([Point(5, 5)], [Point(5, 5)], {0: 0}, shape=(16, 16))
    assert decode_offset(field, Point(5, 5)) == (0.0, 0.0)


def test_decode_rejects_out_of_bounds():
    zero = MotionField(np.zeros((8, 8, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        decode_offset(zero, Point(8.0, 3.0))
    with pytest.raises(ValueError):
        decode_offset(zero, Point(3.0, -0.5))


def test_predict_round_trip_and_identity():
    field = encode_mpm(
        [Point(10, 10)], [Point(13, 14)], {0: 0}, shape=(32, 32)
    )
    pred = predict_prev_positions([Point(13, 14)], field)
    assert pred[0].x == pytest.approx(10.0, abs=1e-5)
    assert pred[0].y == pytest.approx(10.0, abs=1e-5)

    zero = MotionField(np.zeros((32, 32, 3), dtype=np.float32))
    pts = [Point(4.5, 7.25, 0.3), Point(20.0, 1.0, 0.9)]
    assert predict_prev_positions(pts, zero) == pts
    assert predict_prev_positions([], zero) == []


def test_random_round_trip_within_tolerance():
    # per-step displacement below the encode radius recovers exactly
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(1, 8))
        xs = rng.permutation(np.arange(10, 110, 12))[:n].astype(np.float64)
        ys = rng.permutation(np.arange(10, 110, 12))[:n].astype(np.float64)
        nxt = [Point(x + rng.uniform(-0.5, 0.5), y + rng.uniform(-0.5, 0.5))
               for x, y in zip(xs, ys)]
        prev = [
            Point(p.x + rng.uniform(-5, 5), p.y + rng.uniform(-5, 5))
            for p in nxt
        ]
        field = encode_mpm(prev, nxt, {j: j for j in range(n)}, sigma=3,
                           radius=9, shape=(128, 128))
        pred = predict_prev_positions(nxt, field)
        for got, want in zip(pred, prev):
            assert math.hypot(got.x - want.x, got.y - want.y) < 1e-4


def test_distance_matrix_values():
    assert distance_matrix([Point(0, 0)], [Point(3, 4)])[0, 0] == 5.0

    pts = [Point(1, 2), Point(5, 9), Point(30, 7)]
    d = distance_matrix(pts, pts)
    assert np.allclose(np.diag(d), 0.0)

    prev = [Point(1.5, 2.0), Point(10.0, 4.5)]
    pred = [Point(0.0, 0.0), Point(3.0, 3.0), Point(9.0, 9.0)]
    d = distance_matrix(prev, pred)
    assert d.shape == (2, 3)
    for k, a in enumerate(prev):
        for j, b in enumerate(pred):
            # independent scalar recomputation per entry
            assert d[k, j] == pytest.approx(
                math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2), abs=1e-12
            )


def test_distance_matrix_permutation_equivariance():
    rng = np.random.default_rng(2)
    prev = [Point(float(x), float(y)) for x, y in rng.uniform(0, 50, (4, 2))]
    pred = [Point(float(x), float(y)) for x, y in rng.uniform(0, 50, (5, 2))]
    d = distance_matrix(prev, pred)
    pr = rng.permutation(4)
    pc = rng.permutation(5)
    d2 = distance_matrix([prev[i] for i in pr], [pred[j] for j in pc])
    assert np.array_equal(d2, d[np.ix_(pr, pc)])


def test_rescale01_examples():
    assert np.array_equal(
        rescale01(np.array([[0.0, 10.0], [5.0, 10.0]])),
        np.array([[0.0, 1.0], [0.5, 1.0]]),
    )
    assert np.array_equal(
        rescale01(np.array([[2.0, 2.0], [2.0, 2.0]])), np.zeros((2, 2))
    )
    rng = np.random.default_rng(3)
    m = rng.uniform(-7, 13, size=(4, 6))
    out = rescale01(m)
    assert out.min() == 0.0 and out.max() == 1.0


def test_rescale01_preserves_row_order():
    rng = np.random.default_rng(4)
    m = rng.uniform(0, 100, size=(5, 7))
    out = rescale01(m)
    assert np.array_equal(np.argsort(m, axis=1), np.argsort(out, axis=1))
