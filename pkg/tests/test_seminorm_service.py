import math

import numpy as np
import pytest

from errors import InvalidArgumentError
from geometry import Point2, Square, unit_square
from seminorm_service import (RoughnessConfig, best_chord_pair, flatness_ratio, is_OK, satisfies_R, satisfies_R1,
                              seminorm_at_frame, set_seminorm)


def rotate(points, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.asarray(points) @ np.array([[c, s], [-s, c]])


def test_collinear_set_has_zero_seminorm(collinear):
    points, _, _ = collinear
    estimate = set_seminorm(points, 4.0)
    assert estimate.value == 0.0
    assert estimate.graph_ok


def test_single_point():
    assert set_seminorm([Point2(0.2, 0.3)], 4.0).value == 0.0


def test_bent_set_is_positive_and_rotation_invariant():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]])
    base = set_seminorm(pts, 4.0).value
    assert base > 0
    for angle in (0.3, 1.1, 2.5):
        assert set_seminorm(rotate(pts, angle), 4.0).value == pytest.approx(base, rel=1e-3)


def test_estimate_is_the_minimum_over_frames():
    pts = np.array([[0.0, 0.0], [1.0, 0.2], [2.0, 1.0], [3.0, 0.7]])
    estimate = set_seminorm(pts, 4.0)
    for theta in np.linspace(0.0, math.pi, 13):
        assert estimate.value <= seminorm_at_frame(pts, 4.0, theta) * (1 + 1e-4)


def test_seminorm_validates_arguments():
    with pytest.raises(InvalidArgumentError):
        set_seminorm([[0, 0], [1, 1], [2, 0]], 2.0)
    with pytest.raises(InvalidArgumentError):
        set_seminorm([[0, 0], [1, 1], [2, 0]], 4.0, angles=4)


def test_sparse_squares_are_ok():
    assert is_OK(unit_square(), [Point2(0.0, 0.0), Point2(0.3, 0.1)], 4.0, 0.005)


def test_rough_set_is_not_ok():
    corners = [Point2(-0.1, -0.1), Point2(0.1, -0.1), Point2(0.1, 0.1), Point2(-0.1, 0.1)]
    assert not is_OK(Square(Point2(0.0, 0.0), 0.25), corners, 4.0, 0.005)


def test_best_chord_pair_of_a_square():
    pair = best_chord_pair([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert pair.score == pytest.approx(math.sqrt(2.0))
    assert abs(float(np.dot(pair.v1, pair.v2))) == pytest.approx(0.0, abs=1e-12)


def test_best_chord_pair_of_collinear_points(collinear):
    points, _, _ = collinear
    pair = best_chord_pair(points)
    assert pair.score == pytest.approx(0.0, abs=1e-12)
    assert not satisfies_R1(points, 0.05)


def test_chord_search_sweeps_large_sets(rng):
    pts = rng.uniform(-1, 1, (80, 2))
    assert best_chord_pair(pts).score == pytest.approx(math.sqrt(2.0), rel=1e-2)


def test_roughness_constants_in_range():
    with pytest.raises(InvalidArgumentError):
        RoughnessConfig(0.0, 0.1, 0.05)


def test_roughness_of_square_corners_and_of_a_line():
    cfg = RoughnessConfig(0.01, 0.1, 0.05)
    corners = np.array([[-0.2, -0.2], [0.2, -0.2], [0.2, 0.2], [-0.2, 0.2]])
    line = np.array([[-0.3, 0.0], [-0.1, 0.0], [0.2, 0.0]])
    assert satisfies_R(unit_square(), corners, cfg, 4.0)
    assert not satisfies_R(unit_square(), line, cfg, 4.0)
    assert flatness_ratio(line, unit_square(), 4.0) == pytest.approx(0.0, abs=1e-12)


def test_seminorm_is_translation_invariant_and_scales():
    pts = np.array([[0.0, 0.0], [1.0, 0.2], [2.0, 1.0], [3.0, 0.7]])
    base = set_seminorm(pts, 4.0).value
    assert set_seminorm(pts + np.array([5.0, -3.0]), 4.0).value == pytest.approx(base, rel=1e-6)
    for lam in (0.5, 2.0, 10.0):
        assert set_seminorm(lam * pts, 4.0).value == pytest.approx(lam ** (2.0 / 4.0 - 1.0) * base, rel=1e-3)
