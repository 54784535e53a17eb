import numpy as np
import pytest

from errors import ConfigError, InvalidInputError
from geometry import AffineJet, Point2, Square, points_array, unit_square
from local_service import (TraceLift, hatM_zero_jet_bound, local_extend, local_functionals, rho, straighten,
                           trace_extend_T1)
from trace1d_service import Samples1D, extend_Tb

CURVED = [Point2(-0.3, 0.0), Point2(-0.1, 0.002), Point2(0.1, 0.001), Point2(0.3, -0.001)]
X0 = Point2(0.05, 0.3)


def test_kernel_integrates_to_one():
    t, w = np.polynomial.legendre.leggauss(8)
    assert float(np.sum(w * rho(t))) == pytest.approx(1.0)


def test_trace_lift_has_trace_g():
    g = extend_Tb(Samples1D.of([-0.4, 0.0, 0.3], [1.0, -0.5, 0.25], 4.0))
    F = trace_extend_T1(g)
    xs = np.linspace(-0.6, 0.6, 13)
    on_axis = np.stack([xs, np.zeros_like(xs)], axis=1)
    v, grad, _ = F.evaluate(on_axis)
    assert v == pytest.approx(g(xs), abs=1e-12)
    assert grad[:, 0] == pytest.approx(g.derivative(xs), abs=1e-12)


def test_trace_lift_derivatives(rng):
    g = extend_Tb(Samples1D.of([-0.4, 0.0, 0.3], [1.0, -0.5, 0.25], 4.0))
    F = TraceLift(g)
    pts = rng.uniform(-0.5, 0.5, (20, 2))
    pts[:, 1] = np.where(np.abs(pts[:, 1]) < 0.05, 0.1, pts[:, 1])
    step = 1e-5
    _, grad, _ = F.evaluate(pts)
    for axis in (0, 1):
        e = np.zeros(2)
        e[axis] = step
        fd = (F.value(pts + e) - F.value(pts - e)) / (2 * step)
        assert fd == pytest.approx(grad[:, axis], abs=1e-6)


def test_straightening_flattens_the_set():
    S = straighten(unit_square(), CURVED, 4.0)
    assert S.contraction <= 0.5
    flat = S.straighten_world(CURVED)
    assert np.max(np.abs(flat[:, 1])) <= 1e-8
    assert S.max_gradient_deviation() <= 0.1


def test_straightening_inverts(rng):
    S = straighten(unit_square(), CURVED, 4.0)
    uv = rng.uniform(-0.5, 0.5, (25, 2))
    assert S.inverse(S.forward(uv)) == pytest.approx(uv, abs=1e-8)


def test_straightening_rejects_non_graphs():
    with pytest.raises(ConfigError):
        straighten(unit_square(), [Point2(0.0, -0.3), Point2(0.3, 0.0), Point2(0.0, 0.3), Point2(-0.3, 0.0)], 4.0)


def test_local_extension_interpolates_and_pins_the_jet():
    f0 = np.array([0.5, -1.0, 0.25, 2.0])
    L0 = AffineJet(X0, 0.7, (1.5, -0.5))
    solution = local_extend(unit_square(), CURVED, X0, f0, L0, 4.0, check_flatness=False)
    assert solution.field.value(CURVED) == pytest.approx(f0, rel=1e-8, abs=1e-8)
    jet = solution.field.jet(X0)
    assert jet.value == pytest.approx(0.7, rel=1e-6)
    assert jet.grad == pytest.approx((1.5, -0.5), rel=1e-6)
    assert solution.count <= 50 * len(CURVED) ** 2


def test_local_extension_on_a_scaled_square(line_points):
    Q = Square(Point2(2.0, 1.0), 0.25)
    E0 = [Point2(2.0 + 0.2 * p.x, 1.0 + 0.2 * p.y) for p in line_points]
    x0 = Point2(2.0, 1.08)
    f0 = np.array([1.0, 0.0, 1.0, 3.0])
    solution = local_extend(Q, E0, x0, f0, AffineJet(x0, 0.0, (0.0, 0.0)), 4.0)
    assert solution.field.value(E0) == pytest.approx(f0, abs=1e-8)
    assert solution.field.at(x0) == pytest.approx(0.0, abs=1e-10)


def test_affine_data_costs_nothing(line_points):
    L0 = AffineJet(X0, 0.3, (2.0, 1.0))
    f0 = L0.evaluate(line_points)
    solution = local_extend(unit_square(), line_points, X0, f0, L0, 4.0)
    assert solution.Mhat_p == pytest.approx(0.0, abs=1e-20)


def test_functionals_are_affine_in_the_data(rng, line_points):
    functionals = local_functionals(unit_square(), line_points, X0, 4.0)
    u, v = rng.normal(size=4), rng.normal(size=4)
    Lu = {0: AffineJet(X0, 1.0, (0.5, 0.0))}
    Lv = {0: AffineJet(X0, -2.0, (0.0, 3.0))}
    Lw = {0: Lu[0] + Lv[0]}
    for lam in functionals:
        assert lam.apply(u + v, Lw) == pytest.approx(lam.apply(u, Lu) + lam.apply(v, Lv), abs=1e-10)


def test_empty_set_gives_the_jet():
    L0 = AffineJet(X0, 1.0, (0.0, 2.0))
    solution = local_extend(unit_square(), [], X0, [], L0, 4.0)
    assert solution.count == 0
    assert solution.field.at(Point2(0.0, 0.0)) == pytest.approx(L0(Point2(0.0, 0.0)))


def test_basepoint_too_close_to_the_set(line_points):
    with pytest.raises(InvalidInputError):
        local_extend(unit_square(), line_points, Point2(0.1, 0.001), np.zeros(4),
                     AffineJet(Point2(0.1, 0.001), 0.0, (0.0, 0.0)), 4.0)


def test_points_outside_the_inner_square(line_points):
    outside = line_points + [Point2(0.47, 0.0)]
    with pytest.raises(InvalidInputError):
        local_extend(unit_square(), outside, X0, np.zeros(5), AffineJet(X0, 0.0, (0.0, 0.0)), 4.0)


def test_zero_jet_bound():
    upper, equivalent = hatM_zero_jet_bound(unit_square(), [], X0, AffineJet(X0, 1.0, (0.0, 0.0)), 4.0)
    assert upper == pytest.approx(1.0)
    assert not equivalent


def test_zero_jet_bound_scaling():
    Q = Square(Point2(0.0, 0.0), 2.0)
    upper, _ = hatM_zero_jet_bound(Q, [], X0, AffineJet(X0, 1.0, (1.0, 0.0)), 4.0)
    assert upper == pytest.approx(2.0 ** -6 + 2.0 ** -2)


def test_zero_jet_bound_is_an_equivalence_on_rough_sets(line_points):
    L = AffineJet(X0, 1.0, (0.5, 0.0))
    corners = [Point2(-0.3, -0.3), Point2(0.3, -0.3), Point2(0.3, 0.3), Point2(-0.3, 0.3)]
    upper, equivalent = hatM_zero_jet_bound(unit_square(), corners, X0, L, 4.0)
    assert equivalent
    flat_upper, flat = hatM_zero_jet_bound(unit_square(), line_points, X0, L, 4.0)
    assert not flat
    assert flat_upper == pytest.approx(upper)


def test_flatness_constant_is_enforced():
    f0 = np.zeros(len(CURVED))
    L0 = AffineJet(X0, 0.0, (0.0, 0.0))
    with pytest.raises(InvalidInputError):
        local_extend(unit_square(), CURVED, X0, f0, L0, 4.0, flatness=1e-9)
    solution = local_extend(unit_square(), CURVED, X0, f0, L0, 4.0, flatness=0.9)
    assert solution.Mhat_p == pytest.approx(0.0, abs=1e-20)
