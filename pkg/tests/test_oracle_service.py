import math

import numpy as np
import pytest

from assembly_service import extend
from errors import InvalidArgumentError, InvalidInputError
from fields import AnalyticField
from geometry import AffineJet, Point2, Square, unit_square
from local_service import local_extend
from oracle_service import (GridProblem, _minimize, _PowerEnergy, grid_problem_for, hoelder_ratio, min_besov_1d,
                            min_energy_2d, sobolev_norm_quadrature, sobolev_seminorm_quadrature)


def paraboloid():
    return AnalyticField(
        lambda x, y: (x ** 2 + y ** 2) / 2,
        lambda x, y: (x, y),
        lambda x, y: (np.ones_like(x), np.zeros_like(x), np.ones_like(x)),
    )


def test_seminorm_quadrature_of_a_paraboloid():
    assert sobolev_seminorm_quadrature(paraboloid(), unit_square(), 32, 4.0) == pytest.approx(math.sqrt(2.0))


def test_full_norm_exceeds_seminorm():
    box = Square(Point2(0.5, 0.5), 1.0)
    assert sobolev_norm_quadrature(paraboloid(), box, 32, 4.0) > sobolev_seminorm_quadrature(paraboloid(), box, 32, 4.0)


def test_hoelder_ratio_of_a_paraboloid(rng):
    ratio = hoelder_ratio(paraboloid(), unit_square(), 4.0, samples=500, rng=rng)
    assert 0 < ratio <= math.sqrt(2.0) ** 0.5 + 1e-12


def test_grid_problem_validation():
    with pytest.raises(InvalidArgumentError):
        GridProblem(unit_square(), 8, 4.0)
    with pytest.raises(InvalidInputError):
        GridProblem(unit_square(), 16, 4.0, ((Point2(2.0, 0.0), 1.0),))


def test_grid_problem_dict_round_trip():
    prob = GridProblem(unit_square(), 16, 4.0, ((Point2(0.1, 0.2), 1.0),),
                       ((Point2(-0.2, 0.1), 0.5, (1.0, 0.0)),))
    assert GridProblem.from_dict(prob.to_dict()) == prob


def test_affine_constraints_cost_nothing():
    constraints = tuple((Point2(x, y), 1.0 + 2.0 * x - y) for x, y in [(-0.3, -0.2), (0.25, 0.1), (0.0, 0.35)])
    value, grid = min_energy_2d(GridProblem(unit_square(), 16, 4.0, constraints))
    assert value == pytest.approx(0.0, abs=1e-3)
    assert grid.value([pt for pt, _ in constraints]) == pytest.approx([v for _, v in constraints], abs=1e-6)


def test_bent_constraints_cost_something():
    constraints = ((Point2(-0.3, 0.0), 0.0), (Point2(0.0, 0.0), 1.0), (Point2(0.3, 0.0), 0.0))
    value, grid = min_energy_2d(GridProblem(unit_square(), 16, 4.0, constraints))
    assert value > 0.1
    assert grid.value([Point2(0.0, 0.0)])[0] == pytest.approx(1.0, abs=1e-6)


def test_line_oracle_of_affine_data():
    assert min_besov_1d([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], 4.0, n=32) == pytest.approx(0.0, abs=1e-6)


def test_line_oracle_scaling():
    p = 4.0
    base = min_besov_1d([0.0, 1.0, 2.0], [0.0, 0.0, 1.0], p, n=32)
    scaled = min_besov_1d([0.0, 2.0, 4.0], [0.0, 0.0, 1.0], p, n=32)
    assert base > 0
    assert scaled == pytest.approx(base * 2.0 ** ((2.0 - 2.0 * p) / p), rel=1e-4)


def test_line_oracle_needs_two_points():
    assert min_besov_1d([0.5], [1.0], 4.0) == 0.0


@pytest.mark.parametrize('p', [2.5, 3.0, 4.0])
def test_weighted_chain_energy(p):
    m = 12
    D = np.diff(np.eye(m), axis=0)
    A = np.zeros((2, m))
    A[0, 0] = A[1, -1] = 1.0
    c = 1.0 + np.arange(m - 1)
    x, value, _ = _minimize(_PowerEnergy((D,), (1.0,), c, p), A, np.array([0.0, 1.0]), 1e-10, 500)
    # steps proportional to c^(-1/(p-1)) balance the weighted increments
    steps = c ** (-1.0 / (p - 1.0))
    total = steps.sum()
    assert np.diff(x) == pytest.approx(steps / total, rel=1e-5)
    assert value == pytest.approx(total ** (1.0 - p), rel=1e-6)


def test_grid_oracle_converges_on_small_instances(rng):
    for _ in range(8):
        n = int(rng.integers(4, 9))
        points = rng.uniform(-0.5, 0.5, (n, 2))
        values = rng.normal(size=n)
        value, grid = min_energy_2d(grid_problem_for(points, values, 3.0, 33))
        assert value > 0
        assert grid.value(points) == pytest.approx(values, abs=1e-6)


@pytest.mark.slow
def test_extension_norm_tracks_the_grid_optimum(rng):
    constructed, optimal = [], []
    for amplitude in (0.1, 1.0, 10.0, 100.0):
        for _ in range(2):
            n = int(rng.integers(4, 9))
            points = rng.uniform(-0.5, 0.5, (n, 2))
            values = amplitude * rng.normal(size=n)
            M = extend(values, points, 3.0).M
            optimum, _ = min_energy_2d(grid_problem_for(points, values, 3.0, 33))
            assert 0.05 <= M / optimum <= 50.0
            constructed.append(M)
            optimal.append(optimum)
    assert np.corrcoef(np.log(constructed), np.log(optimal))[0, 1] > 0.5


@pytest.mark.slow
def test_local_extension_is_within_range_of_the_grid_optimum(line_points):
    x0 = Point2(0.05, 0.3)
    f0 = np.array([1.0, 0.0, 1.0, 3.0])
    solution = local_extend(unit_square(), line_points, x0, f0, AffineJet(x0, 0.0, (0.0, 0.0)), 4.0)
    problem = GridProblem(unit_square(), 33, 4.0, tuple(zip(line_points, f0)), ((x0, 0.0, (0.0, 0.0)),))
    optimum, _ = min_energy_2d(problem)
    assert 0.02 <= solution.Mhat_p ** 0.25 / optimum <= 50.0
