"""
File storage helper functions
Instance files in, JSON and CSV results out
"""

import csv
import json
import logging
import math
import os

import numpy as np

import config
from errors import InvalidInputError
from geometry import Point2

logger = logging.getLogger(__name__)


def _jsonable(value):
    """numpy scalars and arrays to plain Python; non-finite floats to strings"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def load_json(path):
    """Parse a JSON file, reporting malformed input as InvalidInputError"""
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f'cannot read {path}: {exc}')
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f'{path} is not valid JSON: {exc}')


def write_json(path, data):
    """Write JSON; floats keep their shortest round-trip representation"""
    _ensure_dir(path)
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write('\n')
    logger.debug('wrote %s', path)


def write_csv(path, header, rows):
    """Write rows with a header line; floats at 17 significant digits"""
    _ensure_dir(path)
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([('%.17g' % v) if isinstance(v, (float, np.floating)) else v for v in row])
    logger.debug('wrote %s (%d rows)', path, len(rows))


def _ensure_dir(path):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)


def _field(data, name, path):
    if name not in data:
        raise InvalidInputError(f'{path}: missing field "{name}"')
    return data[name]


def parse_instance(data, path='instance'):
    """
    Validate an instance mapping

    Args:
        data: {"points": [[x, y], ...], "values": [...], "p": optional}
        path: name used in messages

    Returns:
        (points: list of Point2, values: ndarray, p: float or None)
    """
    if not isinstance(data, dict):
        raise InvalidInputError(f'{path}: expected a JSON object')
    raw_points = _field(data, 'points', path)
    raw_values = data.get('values', [0.0] * len(raw_points))
    try:
        points = [Point2(float(x), float(y)) for x, y in raw_points]
    except (TypeError, ValueError):
        raise InvalidInputError(f'{path}: field "points" must be a list of [x, y] pairs')
    try:
        values = np.asarray([float(v) for v in raw_values], dtype=float)
    except (TypeError, ValueError):
        raise InvalidInputError(f'{path}: field "values" must be a list of numbers')
    if len(values) != len(points):
        raise InvalidInputError(f'{path}: field "values" has {len(values)} entries for {len(points)} points')
    p = data.get('p')
    if p is not None:
        try:
            p = float(p)
        except (TypeError, ValueError):
            raise InvalidInputError(f'{path}: field "p" must be a number')
    return points, values, p


def load_instance(path):
    return parse_instance(load_json(path), path)


def fixture_path(name):
    """Path of a bundled instance file"""
    return os.path.join(config.FIXTURES_DIR, name)
