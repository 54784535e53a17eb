import math
from dataclasses import replace

import numpy as np
import pytest

import config
import storage
from decomposition_service import (build_adjacency, build_decomposition, check_good_geometry, choose_root,
                                   find_keystones, keystone_gradient_sum, path_decay_constant)
from errors import InvalidInputError
from fields import AffineField
from geometry import AffineJet, Point2, children, unit_square


def test_root_contains_points_in_its_inner_tenth():
    pts = np.array([[0.3, -0.2], [-0.1, 0.4]])
    root = choose_root(pts)
    assert root.side == 16.0
    assert root.center == Point2(0.0, 0.0)
    root = choose_root(np.array([[3.0, 0.0]]))
    assert root.side == 64.0


def test_duplicate_points_are_rejected():
    with pytest.raises(InvalidInputError):
        choose_root(np.array([[0.1, 0.1], [0.2, 0.0], [0.1, 0.1]]))


def test_sparse_sets_decompose_trivially():
    decomp = build_decomposition([Point2(0.0, 0.1), Point2(0.2, -0.3)], p=4.0)
    assert decomp.trivial
    assert decomp.keystones == [0]
    assert decomp.paths == [[0]]


def test_collinear_sets_decompose_trivially(collinear):
    points, _, p = collinear
    assert build_decomposition(points, p).trivial


def test_adjacency_of_four_children():
    adjacency = build_adjacency(children(unit_square()))
    assert [len(a) for a in adjacency] == [3, 3, 3, 3]
    assert find_keystones(children(unit_square())) == [0, 1, 2, 3]


@pytest.fixture(scope='module')
def decomposition():
    points, _, p = storage.load_instance(storage.fixture_path('eight_points.json'))
    return build_decomposition(points, p)


def test_leaves_tile_the_root(decomposition):
    report = check_good_geometry(decomposition)
    assert report['area_ratio'] == pytest.approx(1.0, abs=1e-9)
    assert report['max_neighbor_ratio'] <= 2.0
    assert report['min_representative_ratio'] >= 0.2


def test_every_path_ends_in_its_keystone(decomposition):
    assert not decomposition.trivial
    keystones = set(decomposition.keystones)
    for nu, path in enumerate(decomposition.paths):
        assert path[0] == nu
        assert path[-1] in keystones
        assert decomposition.keystones[decomposition.mu_of_nu[nu]] == path[-1]
        for a, b in zip(path, path[1:]):
            assert b in decomposition.adjacency[a]


def test_adjacency_is_symmetric(decomposition):
    for nu, nbrs in enumerate(decomposition.adjacency):
        for other in nbrs:
            assert nu in decomposition.adjacency[other]


def test_keystone_sets_are_not_empty(decomposition):
    assert all(len(idx) > 0 for idx in decomposition.E_sharp_mu)


def test_affine_fields_have_no_keystone_gradient_gap(decomposition):
    F = AffineField(AffineJet(Point2(0.0, 0.0), 1.0, (0.5, -2.0)))
    assert keystone_gradient_sum(decomposition, F) == pytest.approx(0.0, abs=1e-20)


def test_path_decay_of_a_single_leaf():
    assert path_decay_constant([0], [1.0]) == 1.0


def _corpus_points(kind, seed):
    if kind == 'random':
        rng = np.random.default_rng(seed)
        return rng.uniform(-0.5, 0.5, (5 + 5 * seed, 2))
    points, _, _ = storage.load_instance(storage.fixture_path(f'{kind}.json'))
    return points


@pytest.mark.parametrize('kind, seed', [('random', k) for k in range(6)]
                         + [('two_scale', 0), ('collinear', 0), ('eight_points', 0)])
def test_decomposition_invariants(kind, seed):
    decomp = build_decomposition(_corpus_points(kind, seed), 4.0)
    report = check_good_geometry(decomp)
    assert report['area_ratio'] == pytest.approx(1.0, abs=1e-9)
    assert 1.0 <= report['max_neighbor_ratio'] <= 2.0
    assert report['max_dilate_overlap'] <= 13
    assert report['dilates_disjoint']
    assert report['gap_ok']
    assert report['keystone_overlap'] <= 50
    assert report['min_representative_ratio'] >= 0.2
    assert math.isfinite(report['path_decay_constant'])
    keystones = set(decomp.keystones)
    for nu, path in enumerate(decomp.paths):
        assert path[0] == nu
        assert path[-1] in keystones
        for a, b in zip(path, path[1:]):
            assert b in decomp.adjacency[a]


def test_two_scale_set_refines_towards_the_cluster(two_scale):
    points, _, p = two_scale
    decomp = build_decomposition(points, p)
    sides = decomp.sides()
    smallest = decomp.leaves[int(np.argmin(sides))]
    assert np.hypot(smallest.center.x - 0.02, smallest.center.y + 0.01) < 0.1
    assert sides.max() / sides.min() >= 64.0


def test_geometry_report_counts_rough_keystones(decomposition, collinear):
    report = check_good_geometry(decomposition)
    assert 0 <= report['rough_keystones'] <= len(decomposition.keystones)
    loose = replace(config.Config(), c1=1e-6, c2=1e-3, c3=0.99).validate()
    assert check_good_geometry(decomposition, loose)['rough_keystones'] >= 1
    points, _, p = collinear
    assert 'rough_keystones' not in check_good_geometry(build_decomposition(points, p))
