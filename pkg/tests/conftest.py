import numpy as np
import pytest

import config
import storage
from geometry import Point2


@pytest.fixture
def rng():
    return np.random.default_rng(config.SEED)


@pytest.fixture
def cfg():
    return config.Config().validate()


@pytest.fixture
def eight_points():
    return storage.load_instance(storage.fixture_path('eight_points.json'))


@pytest.fixture
def collinear():
    return storage.load_instance(storage.fixture_path('collinear.json'))


@pytest.fixture
def line_points():
    """Four points on the x-axis inside the unit square"""
    return [Point2(-0.3, 0.0), Point2(-0.1, 0.0), Point2(0.1, 0.0), Point2(0.3, 0.0)]


@pytest.fixture
def two_scale():
    """A coarse ring around a tight cluster near the centre"""
    return storage.load_instance(storage.fixture_path('two_scale.json'))
