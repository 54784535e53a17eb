"""
Set seminorm service
Besov seminorm estimate of a finite planar set by a search over frames,
and the OK / roughness predicates built on it
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

import config
from errors import InvalidArgumentError
from geometry import Frame, Point2, as_points, dilate, frame_from_chord, points_array
from trace1d_service import seminorm_batch

logger = logging.getLogger(__name__)

DEGENERATE_GAP = 1e-12
EXHAUSTIVE_LIMIT = 60


@dataclass(frozen=True)
class SetSeminormEstimate:
    value: float
    frame: Frame
    graph_ok: bool
    angle: float = 0.0
    profile: Tuple[Tuple[float, float], ...] = field(default=(), repr=False)

    def to_dict(self, with_profile=False):
        data = {
            'value': self.value,
            'frame': self.frame.to_dict(),
            'graph_ok': self.graph_ok,
            'angle': self.angle,
        }
        if with_profile:
            data['per_angle_profile'] = [[a, v] for a, v in self.profile]
        return data


@dataclass(frozen=True)
class RoughnessConfig:
    c: float
    c_prime: float
    c_double_prime: float

    def __post_init__(self):
        for name in ('c', 'c_prime', 'c_double_prime'):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise InvalidArgumentError(f'roughness constant {name} must lie in (0, 1), got {value}')

    @classmethod
    def keystone(cls, cfg):
        """R(c1, c3, c2), the roughness keystone squares satisfy"""
        return cls(cfg.c1, cfg.c3, cfg.c2)


def _is_collinear(pts):
    if len(pts) <= 2:
        return True
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return s[1] <= 1e-12 * max(s[0], 1e-300)


def _principal_frame(pts):
    if len(pts) < 2:
        return Frame.from_angle(0.0)
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered)
    angle = math.atan2(vt[0, 1], vt[0, 0]) % math.pi
    return Frame.from_angle(angle)


def _diam(pts):
    if len(pts) < 2:
        return 0.0
    return float(np.max(np.ptp(pts, axis=0)) * math.sqrt(2.0))


def _profile(pts, thetas, p):
    """Seminorm (p-th power) at each angle; +inf where the set is not a graph"""
    c, s = np.cos(thetas), np.sin(thetas)
    U = np.outer(c, pts[:, 0]) + np.outer(s, pts[:, 1])
    V = np.outer(-s, pts[:, 0]) + np.outer(c, pts[:, 1])
    order = np.argsort(U, axis=1, kind='stable')
    U = np.take_along_axis(U, order, axis=1)
    V = np.take_along_axis(V, order, axis=1)
    gaps = np.diff(U, axis=1)
    ok = np.min(gaps, axis=1) > DEGENERATE_GAP * _diam(pts)
    out = np.full(len(thetas), np.inf)
    if np.any(ok):
        out[ok] = seminorm_batch(U[ok], V[ok], p)
    return out


def seminorm_at_frame(points, p, theta):
    """Seminorm of the set read as a graph over the axis at angle theta"""
    pts = points_array(points)
    if len(pts) < 2:
        return 0.0
    value = _profile(pts, np.array([float(theta)]), p)[0]
    return float(value) ** (1.0 / p) if math.isfinite(value) else math.inf


def set_seminorm(points, p, angles=None, tolerance=None):
    """
    Estimate the Besov seminorm of a finite set

    Args:
        points: list of Point2 or (n, 2) array
        p: exponent > 2
        angles: number of grid directions in [0, pi)
        tolerance: angle resolution of the refinement (radians)

    Returns:
        SetSeminormEstimate
    """
    if not (p > 2):
        raise InvalidArgumentError(f'p must exceed 2, got {p}')
    angles = config.ANGLE_COUNT if angles is None else int(angles)
    tolerance = config.ANGLE_TOLERANCE if tolerance is None else tolerance
    if angles < 8:
        raise InvalidArgumentError(f'angle count must be at least 8, got {angles}')
    pts = points_array(points)
    if _is_collinear(pts):
        frame = _principal_frame(pts)
        return SetSeminormEstimate(0.0, frame, True, math.atan2(frame.e1[1], frame.e1[0]))

    thetas = np.arange(angles) * (math.pi / angles)
    values = _profile(pts, thetas, p)
    best = int(np.argmin(values))
    best_theta, best_value = float(thetas[best]), float(values[best])

    if math.isfinite(best_value):
        step = math.pi / angles

        def objective(theta):
            v = _profile(pts, np.array([theta]), p)[0]
            return v if math.isfinite(v) else 1e300

        result = minimize_scalar(objective, bounds=(best_theta - step, best_theta + step),
                                 method='bounded', options={'xatol': tolerance})
        if result.fun < best_value:
            best_theta, best_value = float(result.x) % math.pi, float(result.fun)
        logger.debug('set seminorm: grid min %.6g at %.6f, refined %.6g at %.6f',
                     values[best], thetas[best], best_value, best_theta)

    value = best_value ** (1.0 / p) if math.isfinite(best_value) else math.inf
    profile = tuple((float(t), float(v) ** (1.0 / p) if math.isfinite(v) else math.inf)
                    for t, v in zip(thetas, values))
    return SetSeminormEstimate(value, Frame.from_angle(best_theta), math.isfinite(value), best_theta, profile)


def points_in(Q, E, dilation=1.0):
    """Points of E in the closed dilate of Q, with their indices"""
    pts = points_array(E)
    if len(pts) == 0:
        return pts, np.zeros(0, dtype=int)
    mask = dilate(Q, dilation).contains(pts)
    return pts[mask], np.flatnonzero(mask)


def is_OK(Q, E, p, c1, angles=None, angle_tolerance=None):
    """
    Whether 3Q meets E in a set that is flat at the scale of Q

    Args:
        Q: Square
        E: points
        p: exponent
        c1: threshold constant

    Returns:
        bool
    """
    local, _ = points_in(Q, E, 3.0)
    if len(local) <= 2 or _is_collinear(local):
        return True
    estimate = set_seminorm(local, p, angles, angle_tolerance)
    return estimate.value <= c1 * Q.side ** (2.0 / p - 1.0)


# ============================================================================
# Roughness
# ============================================================================

@dataclass(frozen=True)
class ChordPair:
    """Two chords x1 -> x2 and y1 -> y2 and their unit directions"""
    x1: Point2
    x2: Point2
    y1: Point2
    y2: Point2
    score: float

    @property
    def v1(self):
        return frame_from_chord(self.x1, self.x2).e1

    @property
    def v2(self):
        return frame_from_chord(self.y1, self.y2).e1


def _spread(d):
    """min(|v1 - v2|, |v1 + v2|) for unit vectors at angle difference d"""
    return 2.0 * np.minimum(np.abs(np.sin(d / 2.0)), np.abs(np.cos(d / 2.0)))


def _chords(pts):
    i, j = np.triu_indices(len(pts), k=1)
    diff = pts[j] - pts[i]
    return i, j, np.arctan2(diff[:, 1], diff[:, 0]) % math.pi


def best_chord_pair(points):
    """
    Pair of chords whose directions are closest to orthogonal

    Args:
        points: at least 3 points

    Returns:
        ChordPair or None when there are fewer than two chords
    """
    pts = points_array(points)
    if len(pts) < 3:
        return None
    i, j, theta = _chords(pts)
    if len(pts) <= EXHAUSTIVE_LIMIT:
        scores = _spread(theta[:, None] - theta[None, :])
        a, b = np.unravel_index(int(np.argmax(scores)), scores.shape)
        score = float(scores[a, b])
    else:
        a, b, score = _sweep(theta)
    P = as_points(pts)
    return ChordPair(P[i[a]], P[j[a]], P[i[b]], P[j[b]], score)


def _sweep(theta):
    """Best partner of each chord by binary search for the angle + pi/2 mod pi"""
    order = np.argsort(theta, kind='stable')
    sorted_theta = theta[order]
    target = (theta + math.pi / 2.0) % math.pi
    pos = np.searchsorted(sorted_theta, target)
    m = len(theta)
    best = (0, 0, -1.0)
    for offset in (-1, 0):
        cand = order[(pos + offset) % m]
        scores = _spread(theta - theta[cand])
        k = int(np.argmax(scores))
        if scores[k] > best[2]:
            best = (k, int(cand[k]), float(scores[k]))
    return best


def satisfies_R1(points, c_double_prime):
    pair = best_chord_pair(points)
    return pair is not None and pair.score > c_double_prime


def satisfies_R(Q, E0, cfg, p, angles=None, angle_tolerance=None):
    """
    Roughness of E0 at the scale of Q: two well separated chord
    directions, or a seminorm inside the band [c, c'] * delta^(2/p - 1)
    """
    local, _ = points_in(Q, E0)
    if satisfies_R1(local, cfg.c_double_prime):
        return True
    if len(local) <= 2:
        return False
    value = set_seminorm(local, p, angles, angle_tolerance).value
    scale = Q.side ** (2.0 / p - 1.0)
    return cfg.c * scale <= value <= cfg.c_prime * scale


def flatness_ratio(points, Q, p, angles=None, angle_tolerance=None):
    """||points|| / delta_Q^(2/p - 1)"""
    return set_seminorm(points, p, angles, angle_tolerance).value / Q.side ** (2.0 / p - 1.0)
