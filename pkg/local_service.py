"""
Local extension service
Straighten a flat point set onto a line, extend its data in one variable,
lift the result to the plane and pin the jet at a chosen point
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

import config
from errors import ConfigError, InvalidInputError, ToleranceNotMetError
from fields import (AffineField, AffineMap2D, ComposedField, Field2D, LinearCombination, Map2D, RadialBump,
                    zero_field)
from geometry import Frame, LinearFunctional, Point2, Square, as_points, dilate, frame_from_chord, points_array
from seminorm_service import set_seminorm
from trace1d_service import PiecewiseC11, Samples1D, extend_Tb, full_norm_terms

logger = logging.getLogger(__name__)

BUMP_INNER = 1.0 / 200.0
BUMP_OUTER = 1.0 / 150.0
MIN_SEPARATION = 1.0 / 100.0
CONTRACTION_LIMIT = 0.5
CHUNK = 256

# kernel moments of rho(t) = 15/16 (1 - t^2)^2
RHO_SECOND_MOMENT = 1.0 / 7.0
RHO_ABS_FIRST_MOMENT = 5.0 / 16.0


def rho(t):
    return 15.0 / 16.0 * (1.0 - t * t) ** 2


# ============================================================================
# Trace lift
# ============================================================================

class TraceLift(Field2D):
    """
    T1 g(x, y) = int g(x - |y| t) rho(t) dt

    Integrated exactly piece by piece: the t-interval is split where
    x - |y| t crosses a breakpoint of g, and each sub-interval carries a
    polynomial integrand.
    """

    def __init__(self, g, points=None):
        self.g = g
        n = config.TRACE_QUADRATURE_POINTS if points is None else points
        self.nodes, self.weights = leggauss(n)
        lo, hi = g.support
        self.small = 1e-9 * max(1.0, hi - lo)

    def evaluate(self, points):
        pts = points_array(points)
        n = len(pts)
        x, y = pts[:, 0], pts[:, 1]
        r = np.abs(y)
        sgn = np.sign(y)
        v = np.zeros(n)
        grad = np.zeros((n, 2))
        H = np.zeros((n, 2, 2))

        small = r < self.small
        if np.any(small):
            xs = x[small]
            d2 = self.g.evaluate(xs, 2)
            v[small] = self.g.evaluate(xs, 0)
            grad[small, 0] = self.g.evaluate(xs, 1)
            H[small, 0, 0] = d2
            H[small, 1, 1] = RHO_SECOND_MOMENT * d2

        rest = np.flatnonzero(~small)
        for chunk in np.array_split(rest, max(1, math.ceil(len(rest) / CHUNK))):
            if len(chunk) == 0:
                continue
            xc, rc = x[chunk], r[chunk]
            T = np.clip((xc[:, None] - self.g.breakpoints[None, :]) / rc[:, None], -1.0, 1.0)
            ones = np.ones((len(chunk), 1))
            edges = np.sort(np.concatenate([-ones, T, ones], axis=1), axis=1)
            half = (edges[:, 1:] - edges[:, :-1]) / 2
            mid = (edges[:, 1:] + edges[:, :-1]) / 2
            t = mid[..., None] + half[..., None] * self.nodes
            k0 = half[..., None] * self.weights * rho(t)
            k1 = k0 * t
            k2 = k1 * t
            w = xc[:, None, None] - rc[:, None, None] * t
            g0 = self.g.evaluate(w, 0)
            g1 = self.g.evaluate(w, 1)
            g2 = self.g.evaluate(w, 2)
            s = sgn[chunk]
            v[chunk] = np.sum(k0 * g0, axis=(1, 2))
            grad[chunk, 0] = np.sum(k0 * g1, axis=(1, 2))
            grad[chunk, 1] = -s * np.sum(k1 * g1, axis=(1, 2))
            H[chunk, 0, 0] = np.sum(k0 * g2, axis=(1, 2))
            H[chunk, 0, 1] = H[chunk, 1, 0] = -s * np.sum(k1 * g2, axis=(1, 2))
            H[chunk, 1, 1] = np.sum(k2 * g2, axis=(1, 2))
        return v, grad, H


def trace_extend_T1(g, points=None):
    """Lift a one-variable function to the plane with trace g on the x-axis"""
    return TraceLift(g, points)


# ============================================================================
# Straightening
# ============================================================================

class LocalChart:
    """World coordinates -> unit square of Q -> frame coordinates"""

    def __init__(self, Q, frame):
        self.Q = Q
        self.frame = frame
        self.to_unit = AffineMap2D.to_unit(Q)
        self.to_frame = self.to_unit.then(AffineMap2D.to_frame(frame))

    def frame_coords(self, points):
        return self.to_frame.apply(points_array(points))[0]


def chord_frame(unit_points, p, angles=None, angle_tolerance=None):
    """
    Frame through the two extreme points of the set along its best axis

    Args:
        unit_points: (n, 2) points in unit-square coordinates
        p: exponent

    Returns:
        Frame with both chord endpoints on its first axis
    """
    pts = points_array(unit_points)
    if len(pts) < 2:
        return Frame.from_angle(0.0, Point2(*pts[0]) if len(pts) else None)
    estimate = set_seminorm(pts, p, angles, angle_tolerance)
    u = pts @ np.asarray(estimate.frame.e1)
    a, b = int(np.argmin(u)), int(np.argmax(u))
    return frame_from_chord(Point2(*pts[a]), Point2(*pts[b]))


def _graph_coords(chart, E0):
    uv = chart.frame_coords(E0)
    order = np.argsort(uv[:, 0], kind='stable')
    u = uv[order, 0]
    if len(u) > 1 and np.min(np.diff(u)) <= 1e-12:
        raise ConfigError('point set is not a graph over its chord; use a smaller c4')
    return uv, order


class StraighteningMap(Map2D):
    """Phi(u, w) = (u, V) with V + phi_hat(u, V) = w, in frame coordinates"""

    def __init__(self, phi_hat, tol=None, max_iter=None):
        self.phi_hat = phi_hat
        self.tol = config.INVERSE_TOL if tol is None else tol
        self.max_iter = config.INVERSE_MAX_ITER if max_iter is None else max_iter

    def solve(self, uw):
        u, w = uw[:, 0], uw[:, 1]
        v = w.copy()
        for _ in range(self.max_iter):
            nxt = w - self.phi_hat.value(np.stack([u, v], axis=1))
            step = float(np.max(np.abs(nxt - v))) if len(v) else 0.0
            v = nxt
            if step <= self.tol:
                return v
        raise ToleranceNotMetError(f'straightening inverse did not converge in {self.max_iter} iterations',
                                   best_estimate=step)

    def apply(self, points):
        uw = points_array(points)
        n = len(uw)
        V = self.solve(uw)
        _, g, H = self.phi_hat.evaluate(np.stack([uw[:, 0], V], axis=1))
        pu, pv = g[:, 0], g[:, 1]
        puu, puv, pvv = H[:, 0, 0], H[:, 0, 1], H[:, 1, 1]
        D = 1.0 + pv
        Vu = -pu / D
        Vw = 1.0 / D
        J = np.zeros((n, 2, 2))
        J[:, 0, 0] = 1.0
        J[:, 1, 0] = Vu
        J[:, 1, 1] = Vw
        D2 = np.zeros((n, 2, 2, 2))
        D2[:, 1, 0, 0] = -(puu + 2.0 * puv * Vu + pvv * Vu ** 2) / D
        D2[:, 1, 0, 1] = D2[:, 1, 1, 0] = -(puv * Vw + pvv * Vu * Vw) / D
        D2[:, 1, 1, 1] = -pvv * Vw ** 2 / D
        return np.stack([uw[:, 0], V], axis=1), J, D2


@dataclass(eq=False)
class Straightening:
    chart: LocalChart
    phi: PiecewiseC11
    phi_hat: Field2D
    inverse_map: StraighteningMap
    contraction: float

    @property
    def frame(self):
        return self.chart.frame

    def forward(self, uv):
        """Psi(u, v) = (u, v + phi_hat(u, v)): the u-axis onto the curve"""
        uv = points_array(uv)
        return np.stack([uv[:, 0], uv[:, 1] + self.phi_hat.value(uv)], axis=1)

    def inverse(self, uw):
        """Phi = Psi^-1: the curve onto the u-axis"""
        uw = points_array(uw)
        return np.stack([uw[:, 0], self.inverse_map.solve(uw)], axis=1)

    def straighten_world(self, points):
        """Straightened frame coordinates of world points (unit scale)"""
        return self.inverse(self.chart.frame_coords(points))

    def max_gradient_deviation(self, samples=None):
        """sup |grad Psi - Id| over samples in frame coordinates"""
        if samples is None:
            t = np.linspace(-0.75, 0.75, 21)
            gx, gy = np.meshgrid(t, t)
            unit = np.stack([gx.ravel(), gy.ravel()], axis=1)
            samples = unit @ self.frame.matrix.T - self.frame.matrix @ self.frame.origin.as_array()
        g = self.phi_hat.gradient(samples)
        return float(np.max(np.hypot(g[:, 0], g[:, 1])))


def _slope_bound(phi, samples=64):
    if phi.n_pieces == 0:
        return max(abs(phi.left_tail[1]), abs(phi.right_tail[1]))
    t = np.linspace(0.0, 1.0, samples)
    b = phi.breakpoints
    xs = (b[:-1, None] + t[None, :] * (b[1:] - b[:-1])[:, None]).ravel()
    return float(np.max(np.abs(phi.derivative(xs))))


def straighten(Q, E0, p, angles=None, angle_tolerance=None):
    """
    Near-identity map flattening E0 onto the chord axis

    Args:
        Q: Square
        E0: points of a flat set
        p: exponent

    Returns:
        Straightening in the unit coordinates of Q
    """
    unit = AffineMap2D.to_unit(Q).apply(points_array(E0))[0]
    frame = chord_frame(unit, p, angles, angle_tolerance)
    chart = LocalChart(Q, frame)
    if len(unit) < 2:
        phi = PiecewiseC11.zero()
        return Straightening(chart, phi, zero_field(), StraighteningMap(zero_field()), 0.0)
    uv, order = _graph_coords(chart, E0)
    phi = extend_Tb(Samples1D.of(uv[order, 0], uv[order, 1], p), cutoff=True)
    contraction = (1.0 + RHO_ABS_FIRST_MOMENT) * _slope_bound(phi)
    if contraction > CONTRACTION_LIMIT:
        raise ConfigError(f'straightening is not a contraction (gradient bound {contraction:.3g}); '
                          f'use a smaller c4')
    phi_hat = trace_extend_T1(phi)
    logger.debug('straightening: %d points, contraction bound %.3g', len(unit), contraction)
    return Straightening(chart, phi, phi_hat, StraighteningMap(phi_hat), contraction)


# ============================================================================
# Local extension
# ============================================================================

@dataclass(eq=False)
class LocalSolution:
    field: Field2D
    functionals: List[LinearFunctional]
    Mhat_p: float
    square: Square
    x0: Point2
    p: float
    site_ids: Sequence[int] = ()
    straightening: Optional[Straightening] = None
    trace: Optional[PiecewiseC11] = None

    @property
    def count(self):
        return len(self.functionals)

    def evaluate_functionals(self, f_values, L0):
        """sum |lambda(f, L0)|^p for other data at the same sites"""
        return float(sum(abs(lam.apply(f_values, {0: L0})) ** self.p for lam in self.functionals))

    def to_dict(self):
        return {
            'square': self.square.to_dict(),
            'x0': self.x0.to_dict(),
            'p': self.p,
            'Mhat_p': self.Mhat_p,
            'functionals': [lam.to_dict() for lam in self.functionals],
        }


def _check_geometry(Q, E0, x0, p, flatness, angles, angle_tolerance):
    pts = points_array(E0)
    if len(pts) == 0:
        return
    if not np.all(dilate(Q, 0.9).contains(pts)):
        raise InvalidInputError('E0 must lie inside 0.9 Q')
    gap = float(np.min(np.hypot(*(pts - x0.as_array()).T)))
    if gap < MIN_SEPARATION * Q.side:
        raise InvalidInputError(f'd(x0, E0) = {gap:.3g} is below side/100 = {MIN_SEPARATION * Q.side:.3g}')
    if flatness is not None and len(pts) > 2:
        value = set_seminorm(pts, p, angles, angle_tolerance).value
        limit = flatness * Q.side ** (2.0 / p - 1.0)
        if value > limit:
            raise InvalidInputError(f'||E0|| = {value:.3g} exceeds c4 * side^(2/p - 1) = {limit:.3g}')


def local_functionals(Q, E0, x0, p, site_ids=None, jet_id=0, angles=None, chart=None, angle_tolerance=None):
    """
    Norm functionals of the local problem on Q, as functionals of the
    data at site_ids and of the jet jet_id pinned at x0

    Returns:
        list of LinearFunctional
    """
    E0 = as_points(E0)
    site_ids = list(range(len(E0))) if site_ids is None else [int(s) for s in site_ids]
    if not E0:
        return []
    if chart is None:
        unit = AffineMap2D.to_unit(Q).apply(points_array(E0))[0]
        chart = LocalChart(Q, chord_frame(unit, p, angles, angle_tolerance))
    uv, order = _graph_coords(chart, E0)
    norm = full_norm_terms(Samples1D.of(uv[order, 0], np.zeros(len(E0)), p))
    world = points_array(E0)[order] - x0.as_array()
    ids = [site_ids[k] for k in order]
    scale = Q.side ** ((2.0 - 2.0 * p) / p)
    rows = list(zip(norm.rows, norm.weights, norm.labels))
    rows += list(zip(norm.inhomogeneous_rows, norm.inhomogeneous_weights, norm.inhomogeneous_labels))
    result = []
    for row, weight, label in rows:
        coeffs_f = {ids[k]: float(row[k]) for k in np.flatnonzero(row)}
        coeffs_jet = {
            (jet_id, 'value'): -float(row.sum()),
            (jet_id, 'gx'): -float(row @ world[:, 0]),
            (jet_id, 'gy'): -float(row @ world[:, 1]),
        }
        coeffs_jet = {key: c for key, c in coeffs_jet.items() if c != 0.0}
        result.append(LinearFunctional(coeffs_f, coeffs_jet, float(weight) ** (1.0 / p) * scale, label))
    return result


def local_extend(Q, E0, x0, f0, L0, p, site_ids=None, flatness=None, check_flatness=True, angles=None,
                 angle_tolerance=None):
    """
    Local interpolant of f0 on E0 with prescribed jet L0 at x0

    Args:
        Q: Square
        E0: points
        x0: Point2 with d(x0, E0) >= side/100
        f0: values at E0
        L0: AffineJet based at x0
        p: exponent
        site_ids: global ids of E0 for the emitted functionals
        flatness: c4, defaults to the configured value
        check_flatness: enforce ||E0|| <= c4 side^(2/p - 1)
        angles, angle_tolerance: set seminorm search, default to the configured values

    Returns:
        LocalSolution
    """
    E0 = as_points(E0)
    f0 = np.asarray(f0, dtype=float)
    if len(f0) != len(E0):
        raise InvalidInputError(f'{len(E0)} points but {len(f0)} values')
    if L0.base != x0:
        L0 = L0.rebase(x0)
    flatness = (config.C4 if flatness is None else flatness) if check_flatness else None
    _check_geometry(Q, E0, x0, p, flatness, angles, angle_tolerance)
    site_ids = list(range(len(E0))) if site_ids is None else [int(s) for s in site_ids]
    if not E0:
        return LocalSolution(AffineField(L0), [], 0.0, Q, x0, p)

    shifted = f0 - L0.evaluate(E0)
    S = straighten(Q, E0, p, angles, angle_tolerance)
    uv, order = _graph_coords(S.chart, E0)
    g = extend_Tb(Samples1D.of(uv[order, 0], shifted[order], p), cutoff=True)
    F1 = trace_extend_T1(g)
    F2 = ComposedField(ComposedField(F1, S.inverse_map), S.chart.to_frame)
    J = F2.jet(x0)
    theta = RadialBump(x0, BUMP_INNER * Q.side, BUMP_OUTER * Q.side)
    F4 = LinearCombination([F2, theta * AffineField(J), AffineField(L0)], [1.0, -1.0, 1.0])

    functionals = local_functionals(Q, E0, x0, p, site_ids, 0, angles, S.chart)
    values = {sid: float(v) for sid, v in zip(site_ids, f0)}
    Mhat_p = float(sum(abs(lam.apply(values, {0: L0})) ** p for lam in functionals))
    logger.debug('local extension on side %.4g: %d points, %d functionals, Mhat_p %.6g',
                 Q.side, len(E0), len(functionals), Mhat_p)
    return LocalSolution(F4, functionals, Mhat_p, Q, x0, p, site_ids, S, g)


def hatM_zero_jet_bound(Q, E0, x0, L, p, c=None, angles=None, angle_tolerance=None):
    """
    Two-sided surrogate of the local norm of (0, L)

    Returns:
        (|L(x0)|^p side^(2-2p) + |grad L|^p side^(2-p), whether E0 is rough
        enough at the scale of Q for the bound to be an equivalence)
    """
    c = config.C1 if c is None else c
    delta = Q.side
    value = L(x0)
    upper = abs(value) ** p * delta ** (2.0 - 2.0 * p) + math.hypot(*L.grad) ** p * delta ** (2.0 - p)
    pts = points_array(E0)
    equivalent = len(pts) > 2 and set_seminorm(pts, p, angles, angle_tolerance).value >= c * delta ** (2.0 / p - 1.0)
    return upper, equivalent
