import json

import pytest

import config
from errors import ConfigError


def test_defaults_are_valid():
    cfg = config.load_config()
    assert cfg.p == config.P
    assert cfg.c1 <= 0.01


def test_overrides_win_over_the_file(tmp_path):
    path = tmp_path / 'cfg.json'
    path.write_text(json.dumps({'p': 3.0, 'angle_count': 64}))
    cfg = config.load_config(str(path), p=5.0, c2=None)
    assert cfg.p == 5.0
    assert cfg.angle_count == 64
    assert isinstance(cfg.angle_count, int)
    assert cfg.c2 == config.C2


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / 'cfg.json'
    path.write_text(json.dumps({'colour': 'blue'}))
    with pytest.raises(ConfigError, match='colour'):
        config.load_config(str(path))


@pytest.mark.parametrize('overrides', [
    {'p': 2.0},
    {'c1': 0.02},
    {'c3': 1.5},
    {'angle_count': 4},
    {'oracle_grid': 8},
    {'oracle_tol': 0.0},
])
def test_out_of_range_settings(overrides):
    with pytest.raises(ConfigError):
        config.load_config(**overrides)


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load_config('/nonexistent/cfg.json')


def test_config_dict_lists_every_setting():
    data = config.Config().to_dict()
    assert {'p', 'c1', 'c2', 'c3', 'c4', 'seed', 'oracle_grid'} <= set(data)
