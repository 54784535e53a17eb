"""
Configuration file for the extension toolkit
Defaults come from the environment; a JSON file and CLI flags layer on top
"""

import json
import os
from dataclasses import asdict, dataclass, fields, replace

from errors import ConfigError

BASE_DIR = os.path.dirname(os.path.abspath(__file__))
FIXTURES_DIR = os.path.join(BASE_DIR, 'fixtures')

# Default config file (JSON) picked up when no --config flag is given
CONFIG_PATH = os.environ.get('EXTENSION_CONFIG', '')

# Logging
LOG_LEVEL = os.environ.get('EXTENSION_LOG_LEVEL', 'WARNING').upper()
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# Sobolev exponent
P = float(os.environ.get('EXTENSION_P', 4.0))

# Smallness constants
C1 = float(os.environ.get('EXTENSION_C1', 0.01))  # OK-square threshold
C2 = float(os.environ.get('EXTENSION_C2', 0.05))  # chord spread for Case 1
C3 = float(os.environ.get('EXTENSION_C3', 0.1))   # roughness band ceiling
C4 = float(os.environ.get('EXTENSION_C4', 0.05))  # straightening flatness

# Set seminorm search
ANGLE_COUNT = int(os.environ.get('EXTENSION_ANGLE_COUNT', 256))
ANGLE_TOLERANCE = 1e-4

# Quadrature and iterations
BESOV_QUADRATURE_TOL = 1e-6
TRACE_QUADRATURE_POINTS = 32
INVERSE_TOL = 1e-12
INVERSE_MAX_ITER = 100
ELIMINATION_TOL = 1e-10
ELIMINATION_MAX_CYCLES = 100

# Variational oracle
ORACLE_GRID = int(os.environ.get('EXTENSION_ORACLE_GRID', 64))
ORACLE_TOL = 1e-8
ORACLE_MAX_ITER = 500

# Reproducibility
SEED = int(os.environ.get('EXTENSION_SEED', 0))


@dataclass(frozen=True)
class Config:
    p: float = P
    c1: float = C1
    c2: float = C2
    c3: float = C3
    c4: float = C4
    angle_count: int = ANGLE_COUNT
    angle_tolerance: float = ANGLE_TOLERANCE
    besov_tol: float = BESOV_QUADRATURE_TOL
    oracle_grid: int = ORACLE_GRID
    oracle_tol: float = ORACLE_TOL
    oracle_max_iter: int = ORACLE_MAX_ITER
    seed: int = SEED

    def validate(self):
        """Raise ConfigError when a setting is out of range"""
        if not (2.0 < self.p < float('inf')):
            raise ConfigError(f'p must satisfy 2 < p < inf, got {self.p}')
        for name in ('c1', 'c2', 'c3', 'c4'):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ConfigError(f'{name} must lie in (0, 1), got {value}')
        if self.c1 > 0.01:
            raise ConfigError(f'c1 must not exceed 1/100, got {self.c1}')
        if self.angle_count < 8:
            raise ConfigError(f'angle_count must be at least 8, got {self.angle_count}')
        if not (16 <= self.oracle_grid <= 512):
            raise ConfigError(f'oracle_grid must lie in [16, 512], got {self.oracle_grid}')
        for name in ('angle_tolerance', 'besov_tol', 'oracle_tol'):
            if getattr(self, name) <= 0:
                raise ConfigError(f'{name} must be positive')
        return self

    def to_dict(self):
        return asdict(self)


def load_config(path=None, **overrides):
    """
    Build a validated Config

    Args:
        path: JSON file with overrides; falls back to EXTENSION_CONFIG
        **overrides: explicit values (None entries are ignored)

    Returns:
        Config
    """
    cfg = Config()
    path = path or CONFIG_PATH
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except (OSError, ValueError) as e:
            raise ConfigError(f'cannot read config {path}: {e}')
        cfg = _apply(cfg, data)
    cfg = _apply(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def _apply(cfg, data):
    if not isinstance(data, dict):
        raise ConfigError('config must be a JSON object')
    known = {f.name: f.type for f in fields(Config)}
    cast = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f'unknown config key: {key}')
        try:
            cast[key] = int(value) if known[key] in (int, 'int') else float(value)
        except (TypeError, ValueError):
            raise ConfigError(f'config key {key} is not numeric: {value!r}')
    return replace(cfg, **cast)
