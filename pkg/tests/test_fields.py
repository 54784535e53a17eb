import numpy as np
import pytest

from errors import InternalError, InvalidArgumentError
from fields import (AffineField, AffineMap2D, AnalyticField, BlendedField, BoxPlateau, ComposedField, ProductField,
                    QuotientField, RadialBump, constant_field, smoothstep)
from geometry import AffineJet, Point2, Square, unit_square


def wave():
    return AnalyticField(
        lambda x, y: np.sin(x) * np.cos(2 * y),
        lambda x, y: (np.cos(x) * np.cos(2 * y), -2 * np.sin(x) * np.sin(2 * y)),
        lambda x, y: (-np.sin(x) * np.cos(2 * y), -2 * np.cos(x) * np.sin(2 * y), -4 * np.sin(x) * np.cos(2 * y)),
    )


def assert_derivatives(F, pts, step=1e-5, rtol=1e-4):
    v, g, H = F.evaluate(pts)
    ex, ey = np.array([step, 0.0]), np.array([0.0, step])
    fd = np.stack([(F.value(pts + ex) - F.value(pts - ex)) / (2 * step),
                   (F.value(pts + ey) - F.value(pts - ey)) / (2 * step)], axis=1)
    scale = max(1.0, float(np.max(np.abs(g))))
    assert np.max(np.abs(fd - g)) <= rtol * scale
    gx_plus, gx_minus = F.gradient(pts + ex), F.gradient(pts - ex)
    assert np.max(np.abs((gx_plus - gx_minus) / (2 * step) - H[:, :, 0])) <= rtol * max(1.0, np.max(np.abs(H)))
    assert np.allclose(H, np.transpose(H, (0, 2, 1)))


@pytest.fixture
def sample_points(rng):
    return rng.uniform(-0.6, 0.6, size=(40, 2))


def test_smoothstep_endpoints():
    s, ds, d2s = smoothstep(np.array([0.0, 0.5, 1.0]))
    assert s.tolist() == [0.0, 0.5, 1.0]
    assert ds[0] == ds[2] == 0.0
    assert d2s[0] == d2s[2] == 0.0


def test_affine_field_matches_its_jet():
    L = AffineJet(Point2(0.1, 0.2), 3.0, (1.0, -1.0))
    F = AffineField(L)
    jet = F.jet(Point2(0.5, 0.5))
    assert jet.value == pytest.approx(L(Point2(0.5, 0.5)))
    assert jet.grad == pytest.approx((1.0, -1.0))


def test_product_and_quotient_derivatives(sample_points):
    den = constant_field(2.0) + wave()
    assert_derivatives(ProductField(wave(), den), sample_points)
    assert_derivatives(QuotientField(wave(), den), sample_points)


def test_composed_field_derivatives(sample_points):
    mapping = AffineMap2D([[0.8, -0.6], [0.6, 0.8]], [0.1, -0.3])
    assert_derivatives(ComposedField(wave(), mapping), sample_points)


def test_affine_map_inverse():
    M = AffineMap2D([[2.0, 1.0], [0.0, 1.0]], [1.0, -1.0])
    pts = np.array([[0.3, 0.4], [-2.0, 5.0]])
    back = M.inverse().apply(M.apply(pts)[0])[0]
    assert np.allclose(back, pts)


def test_box_plateau_is_one_on_box_and_zero_outside():
    w = BoxPlateau.around(unit_square(), 0.9, 1.1)
    inside = np.array([[0.0, 0.0], [0.45, -0.45]])
    outside = np.array([[0.56, 0.0], [0.0, -0.6]])
    assert np.allclose(w.value(inside), 1.0)
    assert np.allclose(w.value(outside), 0.0)
    assert w.support.side == pytest.approx(1.1)


def test_box_plateau_derivatives(sample_points):
    assert_derivatives(BoxPlateau.around(unit_square(), 0.5, 1.5), sample_points)


def test_radial_bump():
    bump = RadialBump(Point2(0.0, 0.0), 0.2, 0.4)
    assert bump.at(Point2(0.1, 0.0)) == 1.0
    assert bump.at(Point2(0.0, 0.5)) == 0.0
    ring = np.array([[0.25, 0.05], [-0.1, 0.3], [0.2, -0.2]])
    assert_derivatives(bump, ring)


def test_radial_bump_radii():
    with pytest.raises(InvalidArgumentError):
        RadialBump(Point2(0.0, 0.0), 0.4, 0.2)


def test_blend_of_equal_fields_reproduces_the_field(sample_points):
    halves = [Square(Point2(-0.25, 0.0), 0.5), Square(Point2(0.25, 0.0), 0.5)]
    weights = [BoxPlateau(Q.lo, Q.hi, 0.05) for Q in halves]
    supports = [w.support for w in weights]
    F = wave()
    blend = BlendedField(weights, [F, F], supports)
    pts = sample_points * np.array([0.8, 0.4])
    v, g, _ = blend.evaluate(pts)
    fv, fg, _ = F.evaluate(pts)
    assert np.allclose(v, fv)
    assert np.allclose(g, fg)


def test_blend_refuses_uncovered_points():
    Q = Square(Point2(0.0, 0.0), 0.5)
    w = BoxPlateau(Q.lo, Q.hi, 0.05)
    blend = BlendedField([w], [constant_field(1.0)], [w.support])
    with pytest.raises(InternalError):
        blend.value(np.array([[2.0, 2.0]]))
