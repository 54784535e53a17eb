import math

import numpy as np
import pytest

from errors import DegenerateChordError, InvalidArgumentError, InvalidInputError
from geometry import (AffineJet, DyadicAddress, Frame, LinearFunctional, Point2, Square, WhitneyField,
                      are_neighbors, bounding_square, children, dilate, frame_from_chord, unit_square)


def test_point_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        Point2(float('nan'), 0.0)


def test_square_side_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        Square(Point2(0.0, 0.0), 0.0)


def test_contains_is_closed():
    Q = unit_square()
    mask = Q.contains(np.array([[0.5, 0.5], [0.5, 0.50001], [-0.5, 0.0]]))
    assert mask.tolist() == [True, False, True]


def test_dilate_keeps_center():
    Q = Square(Point2(1.0, 2.0), 0.5)
    D = dilate(Q, 3.0)
    assert D.center == Q.center
    assert D.side == pytest.approx(1.5)


def test_children_tile_parent():
    Q = unit_square()
    kids = children(Q)
    assert sum(k.area for k in kids) == pytest.approx(Q.area)
    assert [k.address for k in kids] == [DyadicAddress(1, 0, 0), DyadicAddress(1, 1, 0),
                                         DyadicAddress(1, 0, 1), DyadicAddress(1, 1, 1)]


def test_children_meet_at_corners():
    kids = children(unit_square())
    assert all(are_neighbors(a, b) for a in kids for b in kids)


def test_distant_squares_are_not_neighbors():
    grandchildren = children(children(unit_square())[0])
    far = children(unit_square())[3]
    assert not are_neighbors(grandchildren[0], far)


def test_frame_must_be_orthonormal():
    with pytest.raises(InvalidArgumentError):
        Frame(Point2(0.0, 0.0), (1.0, 0.0), (1.0, 0.0))


def test_frame_round_trip():
    frame = Frame.from_angle(0.7, Point2(0.3, -0.2))
    pts = np.array([[0.1, 0.2], [-1.0, 3.0]])
    assert np.allclose(frame.to_world(frame.to_local(pts)), pts)


def test_chord_frame_puts_both_ends_on_axis():
    a, b = Point2(0.2, 0.1), Point2(-0.4, 0.5)
    uv = frame_from_chord(a, b).to_local([a, b])
    assert np.allclose(uv[:, 1], 0.0, atol=1e-14)
    assert uv[1, 0] == pytest.approx(a.distance(b))


def test_chord_between_equal_points():
    with pytest.raises(DegenerateChordError):
        frame_from_chord(Point2(1.0, 1.0), Point2(1.0, 1.0))


def test_jet_evaluates_to_value_at_base():
    L = AffineJet(Point2(0.3, 0.4), 2.5, (1.0, -2.0))
    assert L(L.base) == 2.5
    assert L(Point2(1.3, 0.4)) == pytest.approx(3.5)


def test_rebase_keeps_the_polynomial():
    L = AffineJet(Point2(0.0, 0.0), 1.0, (2.0, 3.0))
    M = L.rebase(Point2(1.0, 1.0))
    assert M.value == pytest.approx(6.0)
    x = Point2(-0.7, 0.25)
    assert M(x) == pytest.approx(L(x))


def test_whitney_field_checks_bases():
    sites = [Point2(0.0, 0.0), Point2(1.0, 0.0)]
    with pytest.raises(InvalidInputError):
        WhitneyField({1: AffineJet(Point2(0.0, 0.0), 0.0, (0.0, 0.0))}, sites)


def test_functional_is_linear():
    lam = LinearFunctional({0: 1.5, 2: -0.5}, {(0, 'gx'): 2.0, (0, 'value'): -1.0}, 0.25, 'check')
    u, v = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.5, 4.0])
    Ju = {0: AffineJet(Point2(0.0, 0.0), 1.0, (2.0, 0.0))}
    Jv = {0: AffineJet(Point2(0.0, 0.0), -3.0, (0.5, 1.0))}
    combined = {0: Ju[0].scaled(2.0) + Jv[0].scaled(-3.0)}
    assert lam.apply(2.0 * u - 3.0 * v, combined) == pytest.approx(
        2.0 * lam.apply(u, Ju) - 3.0 * lam.apply(v, Jv), rel=1e-12)


def test_functional_needs_jets_when_it_reads_them():
    lam = LinearFunctional({}, {(0, 'gy'): 1.0})
    with pytest.raises(InvalidInputError):
        lam.apply([0.0])


def test_functional_dict_round_trip():
    lam = LinearFunctional({3: 0.5}, {(1, 'gy'): -2.0}, 0.125, 'cross[0,2]')
    again = LinearFunctional.from_dict(lam.to_dict())
    assert again == lam
    assert math.isclose(again.offset_weight, 0.125)


def test_bounding_square():
    Q = bounding_square([[0.0, 0.0], [2.0, 1.0]])
    assert Q.side == pytest.approx(3.0)
    assert (Q.center.x, Q.center.y) == (1.0, 0.5)
    assert bounding_square([]).side == 1.0
