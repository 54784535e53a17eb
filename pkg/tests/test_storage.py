import json

import numpy as np
import pytest

import storage
from errors import InvalidInputError
from geometry import Point2


def test_bundled_instance(eight_points):
    points, values, p = eight_points
    assert len(points) == len(values) == 8
    assert points[0] == Point2(0.12, 0.31)
    assert p == 4.0


def test_values_default_to_zero():
    points, values, p = storage.parse_instance({'points': [[0, 0], [1, 2]]})
    assert values.tolist() == [0.0, 0.0]
    assert p is None


@pytest.mark.parametrize('data', [
    [],
    {'values': [1.0]},
    {'points': [[0, 0]], 'values': [1.0, 2.0]},
    {'points': [[0, 'a']]},
    {'points': [[0, 0]], 'values': ['x']},
    {'points': [[0, 0]], 'p': 'four'},
])
def test_malformed_instances(data):
    with pytest.raises(InvalidInputError):
        storage.parse_instance(data)


def test_unreadable_file(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"points": [')
    with pytest.raises(InvalidInputError):
        storage.load_json(str(path))
    with pytest.raises(InvalidInputError):
        storage.load_json(str(tmp_path / 'missing.json'))


def test_write_json_converts_numpy(tmp_path):
    path = tmp_path / 'out' / 'result.json'
    storage.write_json(str(path), {'a': np.float64(0.1), 'b': np.arange(3), 'c': float('inf'), 2: np.int64(7)})
    data = json.loads(path.read_text())
    assert data == {'a': 0.1, 'b': [0, 1, 2], 'c': 'inf', '2': 7}


def test_write_csv_keeps_full_precision(tmp_path):
    path = tmp_path / 'field.csv'
    storage.write_csv(str(path), ['x', 'value'], [(1, 1.0 / 3.0), (2, np.float64(0.1))])
    lines = path.read_text().splitlines()
    assert lines[0] == 'x,value'
    assert float(lines[1].split(',')[1]) == 1.0 / 3.0
    assert lines[2] == '2,0.10000000000000001'
