from dataclasses import replace

import numpy as np
import pytest

import assembly_service
import config
import storage
from assembly_service import build_pou, extend, keystone_terms, neighbor_terms, norm_surrogate_p
from errors import InvalidInputError
from fields import constant_field
from geometry import AffineJet, Point2, WhitneyField, dilate
from jet_service import constant_path_field, keystone_jet, random_keystone_field


@pytest.fixture(scope='module')
def instance():
    return storage.load_instance(storage.fixture_path('eight_points.json'))


@pytest.fixture(scope='module')
def extension(instance):
    points, values, p = instance
    return extend(values, points, p, config.Config().validate())


def test_empty_set_extends_by_zero():
    result = extend([], [], 4.0)
    assert result.field.at(Point2(1.0, 2.0)) == 0.0
    assert result.M_p == 0.0


def test_single_point_extends_by_a_constant():
    result = extend([2.5], [[0.3, 0.1]], 4.0)
    assert result.field.at(Point2(-5.0, 7.0)) == 2.5
    assert result.functional_count == 0


def test_values_must_match_points():
    with pytest.raises(InvalidInputError):
        extend([1.0], [[0.0, 0.0], [1.0, 0.0]], 4.0)


def test_collinear_data_uses_the_root_square(collinear):
    points, values, p = collinear
    result = extend(values, points, p)
    assert result.decomposition.trivial
    assert result.field.value(points) == pytest.approx(values, rel=1e-7, abs=1e-9)
    assert len(result.keystone_field) == 1


def test_affine_data_on_a_line_costs_nothing(collinear):
    points, _, p = collinear
    L = AffineJet(Point2(0.0, 0.0), 1.0, (0.4, -0.2))
    result = extend(L.evaluate(points), points, p)
    assert result.M_p == pytest.approx(0.0, abs=1e-12)


def test_partition_of_unity(extension, rng):
    decomp = extension.decomposition
    pou = build_pou(decomp)
    inner = dilate(decomp.root, 0.95)
    samples = inner.lo + rng.random((500, 2)) * inner.side
    assert pou.blend([constant_field(1.0)] * len(pou.weights)).value(samples) == pytest.approx(1.0, abs=1e-10)
    for nu in range(0, decomp.K, max(1, decomp.K // 10)):
        theta = pou.theta(nu)
        inside = dilate(decomp.leaves[nu], 0.9)
        pts = inside.lo + rng.random((20, 2)) * inside.side
        assert theta.value(pts) == pytest.approx(1.0, abs=1e-12)


def test_extension_interpolates(extension, instance):
    points, values, _ = instance
    assert extension.field.value(points) == pytest.approx(values, rel=1e-7, abs=1e-9)


def test_jets_are_constant_along_paths(extension):
    decomp = extension.decomposition
    L = extension.assembly.jets
    for nu, x in enumerate(decomp.x_nu):
        jet = extension.field.jet(x)
        assert jet.value == pytest.approx(L[nu].value, rel=1e-6, abs=1e-9)
        assert jet.grad == pytest.approx(L[nu].grad, rel=1e-4, abs=1e-7)


def test_extension_is_linear(extension, instance, rng):
    points, values, p = instance
    cfg = config.Config().validate()
    other = rng.normal(size=len(values))
    combined = extend(values - 2.0 * other, points, p, cfg)
    second = extend(other, points, p, cfg)
    samples = rng.uniform(-0.6, 0.6, (30, 2))
    expected = extension.field.value(samples) - 2.0 * second.field.value(samples)
    assert combined.field.value(samples) == pytest.approx(expected, rel=1e-7, abs=1e-8)


def test_field_is_affine_far_away(extension):
    far = np.array([[100.0, 100.0], [-250.0, 40.0]])
    origin_jet = extension.assembly.origin_jet
    assert extension.field.value(far) == pytest.approx(origin_jet.evaluate(far))
    assert np.allclose(extension.field.hessian(far), 0.0)


def test_norm_report(extension, instance):
    points, _, _ = instance
    assert extension.M_p >= 0.0
    assert extension.Mhat_p >= 0.0
    assert extension.M == pytest.approx(extension.M_p ** 0.25)
    assert 0 < extension.functional_count <= 50 * len(points) ** 2
    data = extension.to_dict()
    assert data['functional_count'] == extension.functional_count
    assert data['decomposition']['leaves'] == extension.decomposition.K


def test_pair_terms_vanish_for_one_affine_jet(extension):
    decomp = extension.decomposition
    L = AffineJet(Point2(0.0, 0.0), 0.5, (1.0, -1.0))
    Lsharp = random_keystone_field(decomp, np.random.default_rng(0))
    same = WhitneyField({mu: L.rebase(x) for mu, x in enumerate(decomp.x_sharp)}, list(decomp.x_sharp))
    assert sum(g + v for _, _, g, v in keystone_terms(same, decomp, 4.0)) == pytest.approx(0.0, abs=1e-20)
    jets = constant_path_field(same, decomp)
    assert sum(g + v for _, _, g, v in neighbor_terms(jets, decomp, 4.0)) == pytest.approx(0.0, abs=1e-20)
    assert sum(g for _, _, g, _ in keystone_terms(Lsharp, decomp, 4.0)) >= 0.0



def test_norm_surrogate_matches_the_assembly(extension, instance):
    _, values, p = instance
    decomp = extension.decomposition
    assert norm_surrogate_p(values, extension.keystone_field, decomp, p) == pytest.approx(extension.Mhat_p,
                                                                                            rel=1e-10)


def test_keystone_jets_are_selected_one_at_a_time(extension, instance):
    _, values, p = instance
    decomp = extension.decomposition
    jet = keystone_jet(0, decomp, values, p, config.Config().validate())
    assert jet.value == pytest.approx(extension.keystone_field[0].value)
    assert jet.grad == pytest.approx(extension.keystone_field[0].grad)


def test_configured_constants_reach_the_local_extensions(instance, monkeypatch):
    points, values, p = instance
    seen = []
    original = assembly_service.local_extend

    def recording(*args, **kwargs):
        seen.append((kwargs.get('flatness'), kwargs.get('angles'), kwargs.get('angle_tolerance')))
        return original(*args, **kwargs)

    monkeypatch.setattr(assembly_service, 'local_extend', recording)
    cfg = replace(config.Config(), c4=0.2, angle_count=48, angle_tolerance=1e-5).validate()
    extend(values, points, p, cfg)
    assert seen
    assert set(seen) == {(0.2, 48, 1e-5)}


@pytest.mark.slow
def test_random_keystone_jets_do_not_beat_the_selection(extension, instance):
    _, values, p = instance
    decomp = extension.decomposition
    selected = norm_surrogate_p(values, extension.keystone_field, decomp, p)
    rng = np.random.default_rng(7)
    for _ in range(50):
        competitor = random_keystone_field(decomp, rng)
        assert norm_surrogate_p(values, competitor, decomp, p) >= selected / 100.0
