import numpy as np
from hypothesis import given, strategies as st

from nearparabolic.geometry import close_polyline, distance_to_polyline, points_in_polygon

SQUARE = np.array([0, 1, 1 + 1j, 1j])
coords = st.floats(-2, 3, allow_nan=False)


@given(coords, coords)
def test_square_membership(x, y):
    inside = bool(points_in_polygon(np.array([complex(x, y)]), SQUARE)[0])
    if 1e-9 < x < 1 - 1e-9 and 1e-9 < y < 1 - 1e-9:
        assert inside
    elif not (0 <= x <= 1 and 0 <= y <= 1):
        assert not inside


@given(coords, coords)
def test_square_distance(x, y):
    z = complex(x, y)
    d = distance_to_polyline(np.array([z]), close_polyline(SQUARE))[0]
    dx = max(0 - x, 0, x - 1)
    dy = max(0 - y, 0, y - 1)
    if dx > 0 or dy > 0:
        assert abs(d - np.hypot(dx, dy)) < 1e-12
    else:
        assert abs(d - min(x, 1 - x, y, 1 - y)) < 1e-12


def test_chunking_agrees():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 2, 5000) + 1j * rng.uniform(-1, 2, 5000)
    poly = np.exp(2j * np.pi * np.arange(50) / 50) * 0.7 + 0.5 + 0.5j
    assert np.array_equal(points_in_polygon(pts, poly, chunk=7), points_in_polygon(pts, poly))
    assert np.allclose(distance_to_polyline(pts, poly, chunk=13), distance_to_polyline(pts, poly))


def test_degenerate_and_closing():
    assert not points_in_polygon(np.array([0.5j]), np.array([0, 1])).any()
    closed = close_polyline(SQUARE)
    assert closed[-1] == closed[0] and close_polyline(closed).size == closed.size
