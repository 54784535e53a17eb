"""
Core geometry types
Points, dyadic squares, Euclidean frames, affine jets, Whitney fields
and sparse linear functionals
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import DegenerateChordError, InvalidArgumentError, InvalidInputError

JET_COMPONENTS = ('value', 'gx', 'gy')


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError(f'point coordinates must be finite, got ({self.x}, {self.y})')

    def as_array(self):
        return np.array([self.x, self.y], dtype=float)

    def distance(self, other):
        return math.hypot(self.x - other.x, self.y - other.y)

    def to_dict(self):
        return [self.x, self.y]

    @classmethod
    def from_dict(cls, data):
        return cls(float(data[0]), float(data[1]))


def as_points(values):
    """Coerce a list of Point2 / pairs into Point2 instances"""
    return [v if isinstance(v, Point2) else Point2(float(v[0]), float(v[1])) for v in values]


def points_array(points):
    """Stack points into an (n, 2) float array"""
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        return np.zeros((0, 2))
    return np.array([[p.x, p.y] if isinstance(p, Point2) else [p[0], p[1]] for p in points], dtype=float)


@dataclass(frozen=True)
class DyadicAddress:
    level: int
    i: int
    j: int

    def __post_init__(self):
        if self.level < 0:
            raise InvalidArgumentError('dyadic level must be non-negative')

    def to_dict(self):
        return [self.level, self.i, self.j]


@dataclass(frozen=True)
class Square:
    """Closed axis-aligned square; `address` is relative to a fixed root"""
    center: Point2
    side: float
    address: Optional[DyadicAddress] = None

    def __post_init__(self):
        if not (self.side > 0):
            raise InvalidArgumentError(f'square side must be positive, got {self.side}')

    @property
    def lo(self):
        return np.array([self.center.x - self.side / 2, self.center.y - self.side / 2])

    @property
    def hi(self):
        return np.array([self.center.x + self.side / 2, self.center.y + self.side / 2])

    @property
    def area(self):
        return self.side * self.side

    def contains(self, points, tol=0.0):
        """Closed membership mask for an (n, 2) array"""
        pts = points_array(points)
        lo = self.lo - tol
        hi = self.hi + tol
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def distance_to_points(self, points):
        """Euclidean distance from each point to the closed square"""
        pts = points_array(points)
        gap = np.maximum(np.maximum(self.lo - pts, pts - self.hi), 0.0)
        return np.hypot(gap[:, 0], gap[:, 1])

    def distance_to(self, other):
        gap = np.maximum(np.maximum(self.lo - other.hi, other.lo - self.hi), 0.0)
        return float(np.hypot(gap[0], gap[1]))

    def intersects(self, other, tol=0.0):
        return bool(np.all(self.lo <= other.hi + tol) and np.all(other.lo <= self.hi + tol))

    def to_dict(self):
        data = {'center': self.center.to_dict(), 'side': self.side}
        if self.address is not None:
            data['address'] = self.address.to_dict()
        return data

    @classmethod
    def from_dict(cls, data):
        address = data.get('address')
        return cls(
            Point2.from_dict(data['center']),
            float(data['side']),
            DyadicAddress(*[int(v) for v in address]) if address is not None else None,
        )


def unit_square():
    """[-1/2, 1/2]^2 with the root address"""
    return Square(Point2(0.0, 0.0), 1.0, DyadicAddress(0, 0, 0))


def bounding_square(points, scale=1.5):
    """Square about the centre of the bounding box, scale times its larger side"""
    pts = points_array(points)
    if len(pts) == 0:
        return Square(Point2(0.0, 0.0), 1.0)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = max(float(np.max(hi - lo)), 1e-3) * scale
    return Square(Point2(*((lo + hi) / 2)), side)


def dilate(Q, A):
    """
    A-dilate of Q about its center

    Args:
        Q: Square
        A: positive factor

    Returns:
        Square with the same center and side A * Q.side
    """
    if not (A > 0):
        raise InvalidArgumentError(f'dilation factor must be positive, got {A}')
    return Square(Q.center, Q.side * A, Q.address if A == 1 else None)


def children(Q):
    """Four dyadic children, ordered left-to-right then bottom-to-top"""
    half = Q.side / 2
    quarter = Q.side / 4
    result = []
    for dj in (0, 1):
        for di in (0, 1):
            center = Point2(Q.center.x + (2 * di - 1) * quarter, Q.center.y + (2 * dj - 1) * quarter)
            address = None
            if Q.address is not None:
                a = Q.address
                address = DyadicAddress(a.level + 1, 2 * a.i + di, 2 * a.j + dj)
            result.append(Square(center, half, address))
    return result


def parent_address(address):
    if address.level == 0:
        return None
    return DyadicAddress(address.level - 1, address.i // 2, address.j // 2)


def are_neighbors(Q, Qp):
    """True iff the closed squares intersect; exact on dyadic addresses"""
    a, b = Q.address, Qp.address
    if a is not None and b is not None:
        level = max(a.level, b.level)
        sa = 1 << (level - a.level)
        sb = 1 << (level - b.level)
        return (a.i * sa <= (b.i + 1) * sb and b.i * sb <= (a.i + 1) * sa
                and a.j * sa <= (b.j + 1) * sb and b.j * sb <= (a.j + 1) * sa)
    return Q.intersects(Qp, tol=1e-12 * max(Q.side, Qp.side))


@dataclass(frozen=True)
class Frame:
    origin: Point2
    e1: Tuple[float, float]
    e2: Tuple[float, float]

    def __post_init__(self):
        e1 = np.asarray(self.e1)
        e2 = np.asarray(self.e2)
        if abs(float(e1 @ e2)) > 1e-12 or abs(np.linalg.norm(e1) - 1) > 1e-12 or abs(np.linalg.norm(e2) - 1) > 1e-12:
            raise InvalidArgumentError('frame vectors must be orthonormal')

    @classmethod
    def from_angle(cls, theta, origin=None):
        c, s = math.cos(theta), math.sin(theta)
        return cls(origin or Point2(0.0, 0.0), (c, s), (-s, c))

    @property
    def matrix(self):
        """Rows e1, e2: maps world offsets to frame coordinates"""
        return np.array([self.e1, self.e2], dtype=float)

    def to_local(self, points):
        pts = points_array(points) - self.origin.as_array()
        return pts @ self.matrix.T

    def to_world(self, uv):
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        return uv @ self.matrix + self.origin.as_array()

    def to_dict(self):
        return {'origin': self.origin.to_dict(), 'e1': list(self.e1), 'e2': list(self.e2)}

    @classmethod
    def from_dict(cls, data):
        return cls(Point2.from_dict(data['origin']), tuple(data['e1']), tuple(data['e2']))


def frame_from_chord(a, b):
    """Frame with origin a and first axis along b - a; v(a) = v(b) = 0"""
    dx, dy = b.x - a.x, b.y - a.y
    length = math.hypot(dx, dy)
    if length == 0:
        raise DegenerateChordError(f'chord endpoints coincide at ({a.x}, {a.y})')
    e1 = (dx / length, dy / length)
    return Frame(a, e1, (-e1[1], e1[0]))


@dataclass(frozen=True)
class AffineJet:
    base: Point2
    value: float
    grad: Tuple[float, float]

    def __call__(self, x):
        return jet_eval(self, x)

    def evaluate(self, points):
        pts = points_array(points) - self.base.as_array()
        return self.value + pts @ np.asarray(self.grad, dtype=float)

    def rebase(self, new_base):
        """Same affine polynomial anchored at another point"""
        return AffineJet(new_base, jet_eval(self, new_base), self.grad)

    def component(self, name):
        if name == 'value':
            return self.value
        if name == 'gx':
            return self.grad[0]
        if name == 'gy':
            return self.grad[1]
        raise InvalidArgumentError(f'unknown jet component {name}')

    def __add__(self, other):
        other = other.rebase(self.base)
        return AffineJet(self.base, self.value + other.value,
                         (self.grad[0] + other.grad[0], self.grad[1] + other.grad[1]))

    def scaled(self, alpha):
        return AffineJet(self.base, alpha * self.value, (alpha * self.grad[0], alpha * self.grad[1]))

    def to_dict(self):
        return {'base': self.base.to_dict(), 'value': self.value, 'grad': list(self.grad)}

    @classmethod
    def from_dict(cls, data):
        return cls(Point2.from_dict(data['base']), float(data['value']),
                   (float(data['grad'][0]), float(data['grad'][1])))


def zero_jet(base):
    return AffineJet(base, 0.0, (0.0, 0.0))


def jet_eval(L, x):
    """value + grad . (x - base)"""
    return L.value + L.grad[0] * (x.x - L.base.x) + L.grad[1] * (x.y - L.base.y)


@dataclass(frozen=True)
class WhitneyField:
    entries: Dict[int, AffineJet]
    sites: List[Point2]

    def __post_init__(self):
        for site_id, jet in self.entries.items():
            if jet.base != self.sites[site_id]:
                raise InvalidInputError(f'jet {site_id} is not based at its site')

    def __getitem__(self, site_id):
        return self.entries[site_id]

    def __len__(self):
        return len(self.entries)

    def to_dict(self):
        return {
            'sites': [s.to_dict() for s in self.sites],
            'entries': {str(k): v.to_dict() for k, v in sorted(self.entries.items())},
        }

    @classmethod
    def from_dict(cls, data):
        return cls({int(k): AffineJet.from_dict(v) for k, v in data['entries'].items()},
                   [Point2.from_dict(s) for s in data['sites']])


@dataclass(frozen=True)
class LinearFunctional:
    """
    lambda(f, jets) = offset_weight * (sum_s c_s f(s) + sum_(j, comp) c_(j, comp) jets[j].comp)
    """
    coeffs_f: Dict[int, float] = field(default_factory=dict)
    coeffs_jet: Dict[Tuple[int, str], float] = field(default_factory=dict)
    offset_weight: float = 1.0
    label: str = ''

    def apply(self, f_values, jets=None):
        total = 0.0
        for site, c in self.coeffs_f.items():
            total += c * f_values[site]
        if self.coeffs_jet:
            if jets is None:
                raise InvalidInputError(f'functional {self.label or "?"} needs jets')
            for (jet_id, comp), c in self.coeffs_jet.items():
                total += c * jets[jet_id].component(comp)
        return self.offset_weight * total

    def scaled(self, factor):
        return LinearFunctional(self.coeffs_f, self.coeffs_jet, self.offset_weight * factor, self.label)

    def relabeled(self, label):
        return LinearFunctional(self.coeffs_f, self.coeffs_jet, self.offset_weight, label)

    @property
    def size(self):
        return len(self.coeffs_f) + len(self.coeffs_jet)

    def to_dict(self):
        return {
            'label': self.label,
            'offset_weight': self.offset_weight,
            'coeffs_f': {str(k): v for k, v in sorted(self.coeffs_f.items())},
            'coeffs_jet': [[j, comp, v] for (j, comp), v in sorted(self.coeffs_jet.items())],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            {int(k): float(v) for k, v in data['coeffs_f'].items()},
            {(int(j), str(comp)): float(v) for j, comp, v in data['coeffs_jet']},
            float(data['offset_weight']),
            data.get('label', ''),
        )
