import pytest

import verify_corpus


def test_bundled_instance_passes_every_check(eight_points, cfg, rng):
    points, values, _ = eight_points
    assert verify_corpus.check_instance(points, values, cfg, rng) == []


def test_random_instances_are_seeded(rng):
    points, values = verify_corpus.random_instance(rng, 5)
    assert points.shape == (5, 2)
    assert abs(points).max() <= 0.5
    assert len(values) == 5


@pytest.mark.slow
def test_small_corpus(capsys):
    assert verify_corpus.verify(count=4, max_points=8, seed=3) == 0
    assert '4 of 4 instances passed' in capsys.readouterr().out


@pytest.mark.slow
@pytest.mark.parametrize('p', [2.5, 3.0, 4.0])
def test_full_corpus(capsys, p):
    assert verify_corpus.verify(count=100, max_points=40, seed=11, p=p) == 0
    assert f'100 of 100 instances passed at p = {p:g}' in capsys.readouterr().out
