import numpy as np
import pytest

from gazedwell.geometry import (BoundingBox, Hyperlink, PageLayout, Point, assign_gaze,
                                assign_gaze_batch, box_distance)

from conftest import make_layout
from oracles import grid_box_distance

BOX = BoundingBox(left=100, top=100, width=200, height=50)


def test_point_inside_box_has_zero_distance():
    assert box_distance(Point(150, 120), BOX) == 0.0


def test_distance_right_of_box():
    # Brute-force grid oracle gives 40 for this point (x is 40 past the right edge).
    assert grid_box_distance(340, 120, 100, 100, 200, 50) == 40
    assert box_distance(Point(340, 120), BOX) == 40.0


def test_distance_below_right_corner_region():
    assert grid_box_distance(310, 160, 100, 100, 200, 50) == 10
    assert box_distance(Point(310, 160), BOX) == 10.0


def test_boundary_counts_as_inside():
    assert box_distance(Point(100, 100), BOX) == 0.0
    assert box_distance(Point(300, 150), BOX) == 0.0


def test_distance_nonnegative_and_zero_only_on_box():
    rng = np.random.default_rng(1)
    for _ in range(200):
        g = Point(float(rng.uniform(-100, 600)), float(rng.uniform(-100, 600)))
        d = box_distance(g, BOX)
        assert d >= 0.0
        assert (d == 0.0) == BOX.contains(g)


def test_closed_form_matches_grid_oracle():
    rng = np.random.default_rng(2)
    for _ in range(2000):
        left, top = rng.integers(-50, 400, 2)
        width, height = rng.integers(1, 60, 2)
        box = BoundingBox(float(left), float(top), float(width), float(height))
        gx, gy = rng.uniform(-200, 700, 2)
        d = box_distance(Point(float(gx), float(gy)), box)
        oracle = grid_box_distance(gx, gy, left, top, width, height)
        assert abs(d - oracle) <= 1.0


def test_invalid_box_rejected():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 10)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 10, -1)


LAYOUT = make_layout([(100, 100, 200, 20), (100, 200, 200, 20), (100, 300, 200, 20)])


def test_assign_inside_link():
    assert assign_gaze(Point(150, 310), LAYOUT) == 3


def test_assign_beyond_threshold_is_none():
    # 41 px above link 1, links 2-3 even farther.
    assert assign_gaze(Point(150, 59), LAYOUT) is None
    assert assign_gaze(Point(150, 60), LAYOUT) == 1


def test_tie_breaks_to_lowest_id():
    # Midway between links 1 and 2: distance 40 to both.
    assert assign_gaze(Point(150, 160), LAYOUT) == 1


def test_translation_equivariance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        dx, dy = rng.uniform(-500, 500, 2)
        g = Point(float(rng.uniform(-100, 1400)), float(rng.uniform(-100, 1100)))
        moved = make_layout([(b.bbox.left + dx, b.bbox.top + dy, b.bbox.width, b.bbox.height)
                             for b in LAYOUT.links])
        assert assign_gaze(g, LAYOUT) == assign_gaze(Point(g.x + dx, g.y + dy), moved)


def test_batch_assignment_matches_scalar():
    rng = np.random.default_rng(4)
    xs = rng.uniform(-100, 1400, 500)
    ys = rng.uniform(-100, 1100, 500)
    batch = assign_gaze_batch(xs, ys, LAYOUT)
    for x, y, got in zip(xs, ys, batch):
        want = assign_gaze(Point(float(x), float(y)), LAYOUT)
        assert (want or 0) == got


def test_layout_validation():
    with pytest.raises(ValueError):
        PageLayout([], 100, 100)
    with pytest.raises(ValueError):
        PageLayout([Hyperlink(2, BoundingBox(0, 0, 10, 10))], 100, 100)
    with pytest.raises(ValueError):
        PageLayout([Hyperlink(1, BoundingBox(0, 0, 10, 10))], 0, 100)
