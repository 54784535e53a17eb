"""
One-dimensional Besov trace service
Trace seminorm and norm formulas for labeled points on a line, the
piecewise-polynomial extension operator built from them, and a quadrature
for the Besov seminorm of a piecewise C^{1,1} function
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

import config
from errors import InsufficientDataError, InvalidArgumentError, InvalidInputError, ToleranceNotMetError
from geometry import LinearFunctional

logger = logging.getLogger(__name__)

DEGREE = 6
BLEND_START = 0.1
BLEND_END = 0.9
SMOOTHSTEP = Polynomial([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])


@dataclass(frozen=True)
class Samples1D:
    xs: Tuple[float, ...]
    gs: Tuple[float, ...]
    p: float

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if len(self.xs) != len(self.gs):
            raise InvalidInputError(f'xs and gs differ in length ({len(self.xs)} vs {len(self.gs)})')
        if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(np.asarray(self.gs, dtype=float))):
            raise InvalidInputError('samples must be finite')
        if len(xs) > 1 and not np.all(np.diff(xs) > 0):
            raise InvalidInputError('xs must be strictly increasing')
        if not (self.p > 2):
            raise InvalidArgumentError(f'p must exceed 2, got {self.p}')

    @classmethod
    def of(cls, xs, gs, p):
        return cls(tuple(float(x) for x in xs), tuple(float(g) for g in gs), float(p))

    @property
    def n(self):
        return len(self.xs)

    @property
    def x(self):
        return np.asarray(self.xs, dtype=float)

    @property
    def g(self):
        return np.asarray(self.gs, dtype=float)

    @property
    def alpha(self):
        """Hoelder exponent 1 - 2/p of the first derivative"""
        return 1.0 - 2.0 / self.p

    @property
    def diam(self):
        return float(self.xs[-1] - self.xs[0]) if self.xs else 0.0

    def with_values(self, gs):
        return Samples1D.of(self.xs, gs, self.p)


@dataclass(frozen=True)
class SlopeData:
    nu: Tuple[int, ...]
    slopes: Tuple[float, ...]
    tangents: Tuple[Tuple[float, float, float], ...]  # (x_k, g(x_k), m_k)
    gaps: Tuple[float, ...]
    neighbor_gaps: Tuple[float, ...]

    def tangent_at(self, k, x):
        base, value, slope = self.tangents[k]
        return value + slope * (x - base)


@dataclass(frozen=True, eq=False)
class TraceNorm1D:
    """
    Mp = sum_i weights[i] * |rows[i] . g|^p over the seminorm rows;
    the two rows of the full norm are carried separately
    """
    Mp: float
    p: float
    rows: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)
    labels: Tuple[str, ...] = field(repr=False, default=())
    inhomogeneous_rows: np.ndarray = field(repr=False, default=None)
    inhomogeneous_weights: np.ndarray = field(repr=False, default=None)
    inhomogeneous_labels: Tuple[str, ...] = field(repr=False, default=())

    @property
    def inhomogeneous_p(self):
        if self.inhomogeneous_rows is None or len(self.inhomogeneous_rows) == 0:
            return 0.0
        return _lp_sum(self.inhomogeneous_rows, self.inhomogeneous_weights, self.data, self.p)

    @property
    def full_p(self):
        return self.Mp + self.inhomogeneous_p

    @property
    def count(self):
        extra = 0 if self.inhomogeneous_rows is None else len(self.inhomogeneous_rows)
        return len(self.rows) + extra

    def evaluate(self, gs, full=False):
        """Re-evaluate the same functionals on other data at the same sites"""
        g = np.asarray(gs, dtype=float)
        total = _lp_sum(self.rows, self.weights, g, self.p)
        if full and self.inhomogeneous_rows is not None:
            total += _lp_sum(self.inhomogeneous_rows, self.inhomogeneous_weights, g, self.p)
        return total

    @property
    def terms(self):
        """(LinearFunctional, weight) pairs of the seminorm part"""
        return [(_row_functional(r, lab), float(w)) for r, w, lab in zip(self.rows, self.weights, self.labels)]

    @property
    def inhomogeneous_terms(self):
        if self.inhomogeneous_rows is None:
            return []
        return [(_row_functional(r, lab), float(w)) for r, w, lab in
                zip(self.inhomogeneous_rows, self.inhomogeneous_weights, self.inhomogeneous_labels)]

    def functionals(self, full=False):
        """Functionals with the weight folded in, so that Mp = sum |lambda(g)|^p"""
        terms = self.terms + (self.inhomogeneous_terms if full else [])
        return [lam.scaled(w ** (1.0 / self.p)) for lam, w in terms]

    def to_dict(self, full=False):
        return {
            'p': self.p,
            'Mp': self.Mp,
            'full_norm_p': self.full_p,
            'functionals': [lam.to_dict() for lam in self.functionals(full=full)],
        }


def _lp_sum(rows, weights, g, p):
    if len(rows) == 0:
        return 0.0
    return float(np.sum(weights * np.abs(rows @ g) ** p))


def _row_functional(row, label):
    return LinearFunctional({int(k): float(row[k]) for k in np.flatnonzero(row)}, {}, 1.0, label)


# ============================================================================
# Slopes and the trace formula
# ============================================================================

def _nearest_neighbors(xs):
    """Index of a nearest neighbour of each site; ties go to the smaller index"""
    n = len(xs)
    dx = np.diff(xs)
    left_gap = np.concatenate([[np.inf], dx])
    right_gap = np.concatenate([dx, [np.inf]])
    use_left = left_gap <= right_gap
    idx = np.arange(n)
    return np.where(use_left, idx - 1, idx + 1)


def _slope_matrix(xs):
    """Rows S with m = S @ g"""
    n = len(xs)
    nu = _nearest_neighbors(xs)
    S = np.zeros((n, n))
    for k in range(n):
        d = xs[k] - xs[nu[k]]
        S[k, k] += 1.0 / d
        S[k, nu[k]] -= 1.0 / d
    return S, nu


def slope_data(s):
    """
    Nearest neighbours, slopes and tangent lines of the samples

    Args:
        s: Samples1D with at least two sites

    Returns:
        SlopeData
    """
    if s.n < 2:
        raise InsufficientDataError(f'slope data needs at least 2 sites, got {s.n}')
    xs, gs = s.x, s.g
    S, nu = _slope_matrix(xs)
    m = S @ gs
    gaps = np.diff(xs)
    return SlopeData(
        nu=tuple(int(v) for v in nu),
        slopes=tuple(float(v) for v in m),
        tangents=tuple((float(xs[k]), float(gs[k]), float(m[k])) for k in range(s.n)),
        gaps=tuple(float(v) for v in gaps),
        neighbor_gaps=tuple(float(abs(xs[k] - xs[nu[k]])) for k in range(s.n)),
    )


def _antiderivative(t, p):
    with np.errstate(divide='ignore'):
        return np.power(t, 2.0 - p) / ((p - 1.0) * (p - 2.0))


def interaction_weight(Ik, Il, p):
    """
    A_kl = int_Ik int_Il |x - y|^{-p} dy dx in closed form

    Args:
        Ik: (a, b) left interval, a may be -inf
        Il: (c, d) right interval, d may be +inf
        p: exponent > 2

    Returns:
        float, +inf when the intervals share an endpoint
    """
    a, b = float(Ik[0]), float(Ik[1])
    c, d = float(Il[0]), float(Il[1])
    if not (p > 2):
        raise InvalidArgumentError(f'p must exceed 2, got {p}')
    if a > b or c > d:
        raise InvalidArgumentError('interval endpoints out of order')
    if c < b:
        raise InvalidArgumentError(f'intervals overlap: [{a}, {b}] and [{c}, {d}]')
    if c == b:
        return math.inf
    G = lambda t: float(_antiderivative(np.float64(t), p))
    return G(c - b) - G(c - a) - G(d - b) + G(d - a)


def _interval_pairs(n):
    """Pairs 0 <= k < l <= n of the n + 1 intervals, adjacent pairs skipped"""
    K, L = np.triu_indices(n + 1, k=2)
    return K, L


def _cross_weights(xs, p, K, L):
    """A_kl for the non-adjacent interval pairs; xs has shape (..., n)"""
    shape = xs.shape[:-1]
    neg = np.full(shape + (1,), -np.inf)
    pos = np.full(shape + (1,), np.inf)
    left = np.concatenate([neg, xs], axis=-1)
    right = np.concatenate([xs, pos], axis=-1)
    G = lambda t: _antiderivative(t, p)
    return (G(left[..., L] - right[..., K]) - G(left[..., L] - left[..., K])
            - G(right[..., L] - right[..., K]) + G(right[..., L] - left[..., K]))


def seminorm_batch(xs, gs, p):
    """
    Trace seminorm Mp for a batch of datasets in one vectorised pass

    Args:
        xs: array (B, n), each row strictly increasing
        gs: array (B, n)
        p: exponent

    Returns:
        array (B,) of Mp values
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    gs = np.atleast_2d(np.asarray(gs, dtype=float))
    n = xs.shape[1]
    if n < 2:
        return np.zeros(xs.shape[0])
    dx = np.diff(xs, axis=1)
    chord = np.diff(gs, axis=1) / dx
    left_gap = np.concatenate([np.full((xs.shape[0], 1), np.inf), dx], axis=1)
    right_gap = np.concatenate([dx, np.full((xs.shape[0], 1), np.inf)], axis=1)
    chord_left = np.concatenate([np.zeros((xs.shape[0], 1)), chord], axis=1)
    chord_right = np.concatenate([chord, np.zeros((xs.shape[0], 1))], axis=1)
    m = np.where(left_gap <= right_gap, chord_left, chord_right)
    slope_term = np.abs(m[:, 1:] - m[:, :-1]) / dx
    tangent_term = np.abs(m[:, :-1] - chord) / dx
    total = np.sum((slope_term ** p + tangent_term ** p) * dx ** 2, axis=1)
    K, L = _interval_pairs(n)
    if len(K):
        A = _cross_weights(xs, p, K, L)
        total = total + np.sum(np.abs(m[:, K] - m[:, L - 1]) ** p * A, axis=1)
    return total


def _seminorm_rows(s):
    xs = s.x
    n = s.n
    S, _ = _slope_matrix(xs)
    rows, weights, labels = [], [], []
    eye = np.eye(n)
    for k in range(n - 1):
        delta = xs[k + 1] - xs[k]
        chord_row = (eye[k + 1] - eye[k]) / delta
        rows.append((S[k + 1] - S[k]) / delta)
        weights.append(delta ** 2)
        labels.append(f'slope_jump[{k}]')
        rows.append((S[k] - chord_row) / delta)
        weights.append(delta ** 2)
        labels.append(f'tangent_miss[{k}]')
    K, L = _interval_pairs(n)
    if len(K):
        A = _cross_weights(xs, s.p, K, L)
        for k, l, a in zip(K, L, A):
            rows.append(S[k] - S[l - 1])
            weights.append(float(a))
            labels.append(f'cross[{k},{l}]')
    keep = [i for i, row in enumerate(rows) if np.any(row)]
    return (np.array([rows[i] for i in keep]).reshape(-1, n),
            np.array([weights[i] for i in keep]),
            tuple(labels[i] for i in keep))


def _inhomogeneous_rows(s):
    n = s.n
    rows, weights, labels = [], [], []
    if n >= 2:
        row = np.zeros(n)
        d = abs(s.xs[0] - s.xs[1])
        row[0], row[1] = 1.0 / d, -1.0 / d
        rows.append(row)
        weights.append(1.0)
        labels.append('chord')
    if n >= 1:
        row = np.zeros(n)
        row[0] = 1.0
        rows.append(row)
        weights.append(1.0)
        labels.append('value')
    return np.array(rows).reshape(-1, n), np.array(weights), tuple(labels)


def trace_seminorm_p(s):
    """
    p-th power of the trace seminorm surrogate as an l^p sum of functionals

    Args:
        s: Samples1D with N >= 2

    Returns:
        TraceNorm1D
    """
    if s.n < 2:
        raise InsufficientDataError(f'trace seminorm needs at least 2 sites, got {s.n}')
    rows, weights, labels = _seminorm_rows(s)
    g = s.g
    return TraceNorm1D(_lp_sum(rows, weights, g, s.p), s.p, rows, weights, g, labels)


def trace_norm_full_p(s):
    """Seminorm terms plus the chord and value terms of the full norm"""
    if s.n < 2:
        raise InsufficientDataError(f'trace norm needs at least 2 sites, got {s.n}')
    return full_norm_terms(s)


def full_norm_terms(s):
    """Full-norm functionals for any N, including the degenerate N <= 1 cases"""
    n = s.n
    g = s.g
    if n >= 2:
        rows, weights, labels = _seminorm_rows(s)
    else:
        rows, weights, labels = np.zeros((0, n)), np.zeros(0), ()
    inh_rows, inh_weights, inh_labels = _inhomogeneous_rows(s)
    return TraceNorm1D(_lp_sum(rows, weights, g, s.p), s.p, rows, weights, g, labels,
                       inh_rows, inh_weights, inh_labels)


# ============================================================================
# Piecewise polynomial representation
# ============================================================================

@dataclass(frozen=True, eq=False)
class PiecewiseC11:
    """
    Polynomial pieces on [b_i, b_{i+1}] in the local variable x - b_i
    (ascending coefficients, degree <= 6) with affine tails outside
    """
    breakpoints: np.ndarray
    coeffs: np.ndarray
    left_tail: Tuple[float, float] = (0.0, 0.0)
    right_tail: Tuple[float, float] = (0.0, 0.0)

    @property
    def n_pieces(self):
        return len(self.coeffs)

    @property
    def support(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def _derivative_coeffs(self, order):
        c = np.asarray(self.coeffs, dtype=float)
        for _ in range(order):
            if c.shape[1] <= 1:
                return np.zeros((len(c), 1))
            c = c[:, 1:] * np.arange(1, c.shape[1])
        return c

    def evaluate(self, x, derivative=0):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros_like(flat)
        b = self.breakpoints
        left = flat < b[0]
        right = flat > b[-1]
        mid = ~(left | right)
        c0, c1 = self.left_tail
        d0, d1 = self.right_tail
        if derivative == 0:
            out[left] = c0 + c1 * (flat[left] - b[0])
            out[right] = d0 + d1 * (flat[right] - b[-1])
        elif derivative == 1:
            out[left] = c1
            out[right] = d1
        if self.n_pieces and np.any(mid):
            idx = np.clip(np.searchsorted(b, flat[mid], side='right') - 1, 0, self.n_pieces - 1)
            coeffs = self._derivative_coeffs(derivative)[idx]
            s = flat[mid] - b[idx]
            val = coeffs[:, -1].copy()
            for j in range(coeffs.shape[1] - 2, -1, -1):
                val = val * s + coeffs[:, j]
            out[mid] = val
        elif np.any(mid):
            # no pieces: the two tails meet at the single breakpoint
            out[mid] = c0 if derivative == 0 else (c1 if derivative == 1 else 0.0)
        return out.reshape(x.shape)

    def __call__(self, x):
        return self.evaluate(x, 0)

    def derivative(self, x):
        return self.evaluate(x, 1)

    def second_derivative(self, x):
        return self.evaluate(x, 2)

    def max_second_derivative(self, samples=64):
        if not self.n_pieces:
            return 0.0
        best = 0.0
        t = np.linspace(0.0, 1.0, samples)
        for i in range(self.n_pieces):
            xs = self.breakpoints[i] + t * (self.breakpoints[i + 1] - self.breakpoints[i])
            best = max(best, float(np.max(np.abs(self.second_derivative(xs)))))
        return best

    def c1_defect(self):
        """Largest mismatch of value or slope across the breakpoints"""
        b = self.breakpoints
        if len(b) == 0:
            return 0.0
        worst = 0.0
        for order in (0, 1):
            c = self._derivative_coeffs(order)
            for i, x in enumerate(b):
                left = self._piece_value(c, i - 1, x) if i > 0 else (self.left_tail[order] if order < 2 else 0.0)
                right = self._piece_value(c, i, x) if i < self.n_pieces else (self.right_tail[order] if order < 2 else 0.0)
                scale = max(1.0, abs(left), abs(right))
                worst = max(worst, abs(left - right) / scale)
        return worst

    def _piece_value(self, c, i, x):
        s = x - self.breakpoints[i]
        return float(np.polynomial.polynomial.polyval(s, c[i]))

    def rescaled(self, lam):
        """G(x) = F(x / lam)"""
        powers = float(lam) ** -np.arange(DEGREE + 1, dtype=float)
        return PiecewiseC11(
            np.asarray(self.breakpoints) * lam,
            np.asarray(self.coeffs) * powers,
            (self.left_tail[0], self.left_tail[1] / lam),
            (self.right_tail[0], self.right_tail[1] / lam),
        )

    def scaled(self, alpha):
        return PiecewiseC11(self.breakpoints, np.asarray(self.coeffs) * alpha,
                            (alpha * self.left_tail[0], alpha * self.left_tail[1]),
                            (alpha * self.right_tail[0], alpha * self.right_tail[1]))

    def to_dict(self):
        return {
            'breakpoints': [float(b) for b in self.breakpoints],
            'coeffs': [[float(c) for c in row] for row in self.coeffs],
            'left_tail': list(self.left_tail),
            'right_tail': list(self.right_tail),
        }

    @classmethod
    def from_dict(cls, data):
        coeffs = np.array(data['coeffs'], dtype=float).reshape(-1, DEGREE + 1)
        return cls(np.array(data['breakpoints'], dtype=float), coeffs,
                   tuple(data['left_tail']), tuple(data['right_tail']))

    @classmethod
    def from_hermite(cls, xs, gs, ds):
        """C^1 cubic Hermite interpolant with affine tails"""
        spline = CubicHermiteSpline(np.asarray(xs, float), np.asarray(gs, float), np.asarray(ds, float))
        c = spline.c  # (4, m), highest power first
        coeffs = np.zeros((c.shape[1], DEGREE + 1))
        coeffs[:, :4] = c[::-1].T
        return cls(np.asarray(xs, float), coeffs, (float(gs[0]), float(ds[0])), (float(gs[-1]), float(ds[-1])))

    @classmethod
    def zero(cls, at=0.0):
        return cls(np.array([float(at)]), np.zeros((0, DEGREE + 1)))


def _pad(poly):
    c = np.zeros(DEGREE + 1)
    coef = poly.coef[:DEGREE + 1]
    c[:len(coef)] = coef
    return c


def _line(value_at_base, slope):
    return Polynomial([value_at_base, slope])


class _PieceBuilder:
    def __init__(self):
        self.breaks = []
        self.rows = []

    def add(self, lo, hi, poly):
        if hi <= lo:
            return
        if self.breaks and self.breaks[-1] != lo:
            raise InvalidInputError('pieces must be contiguous')
        if not self.breaks:
            self.breaks.append(lo)
        self.breaks.append(hi)
        self.rows.append(_pad(poly))

    def build(self, left_tail, right_tail, at):
        if not self.rows:
            return PiecewiseC11(np.array([at]), np.zeros((0, DEGREE + 1)), left_tail, right_tail)
        return PiecewiseC11(np.array(self.breaks), np.array(self.rows), left_tail, right_tail)


def _tangent_poly(x_k, g_k, m_k, base):
    """L_k(base + s) as a polynomial in s"""
    return _line(g_k + m_k * (base - x_k), m_k)


def extend_Tb(s, cutoff=True):
    """
    Linear extension of 1D samples by blended tangent lines

    Args:
        s: Samples1D
        cutoff: multiply by the unit cutoff (compact support, zero tails)

    Returns:
        PiecewiseC11 interpolating s
    """
    xs, gs = s.x, s.g
    n = s.n
    if n == 0:
        return PiecewiseC11.zero()
    if n == 1:
        m = np.zeros(1)
    else:
        S, _ = _slope_matrix(xs)
        m = S @ gs
    builder = _PieceBuilder()
    diam = float(xs[-1] - xs[0])
    width = 0.5 * max(diam, 1.0)
    a1 = xs[0] - 0.1 * diam
    b1 = xs[-1] + 0.1 * diam
    if cutoff:
        a0 = a1 - width
        ramp = SMOOTHSTEP(Polynomial([0.0, 1.0 / width]))
        builder.add(a0, a1, _tangent_poly(xs[0], gs[0], m[0], a0) * ramp)
        builder.add(a1, xs[0], _tangent_poly(xs[0], gs[0], m[0], a1))
    for k in range(n - 1):
        delta = xs[k + 1] - xs[k]
        p1 = xs[k] + BLEND_START * delta
        p2 = xs[k] + BLEND_END * delta
        builder.add(xs[k], p1, _tangent_poly(xs[k], gs[k], m[k], xs[k]))
        lk = _tangent_poly(xs[k], gs[k], m[k], p1)
        lk1 = _tangent_poly(xs[k + 1], gs[k + 1], m[k + 1], p1)
        blend = SMOOTHSTEP(Polynomial([0.0, 1.0 / ((BLEND_END - BLEND_START) * delta)]))
        builder.add(p1, p2, lk + (lk1 - lk) * blend)
        builder.add(p2, xs[k + 1], _tangent_poly(xs[k + 1], gs[k + 1], m[k + 1], p2))
    if cutoff:
        builder.add(xs[-1], b1, _tangent_poly(xs[-1], gs[-1], m[-1], xs[-1]))
        ramp_down = SMOOTHSTEP(Polynomial([1.0, -1.0 / width]))
        builder.add(b1, b1 + width, _tangent_poly(xs[-1], gs[-1], m[-1], b1) * ramp_down)
        return builder.build((0.0, 0.0), (0.0, 0.0), float(xs[0]))
    return builder.build((float(gs[0]), float(m[0])), (float(gs[-1]), float(m[-1])), float(xs[0]))


# ============================================================================
# Besov seminorm quadrature
# ============================================================================

_GAUSS_ORDER = 8
_MAX_DEPTH = 48
_MAX_PANELS = 400000
_ATOL_FLOOR = 1e-28


def _horner(c, s):
    val = np.full_like(s, c[-1])
    for j in range(len(c) - 2, -1, -1):
        val = val * s + c[j]
    return val


def _difference_quotient(d, s, t):
    """(P(s) - P(t)) / (s - t) for P with ascending coefficients d"""
    h = np.ones_like(s * t)
    q = np.zeros_like(h)
    t_pow = np.ones_like(t)
    for j in range(1, len(d)):
        q = q + d[j] * h
        t_pow = t_pow * t
        h = s * h + t_pow
    return q


class _Piece:
    __slots__ = ('lo', 'hi', 'anchor', 'd')

    def __init__(self, lo, hi, anchor, d):
        self.lo, self.hi, self.anchor, self.d = lo, hi, anchor, d

    def slope(self, x):
        return _horner(self.d, x - self.anchor)


def _pieces(F, window):
    d = F._derivative_coeffs(1)
    pieces = []
    for i in range(F.n_pieces):
        lo, hi = float(F.breakpoints[i]), float(F.breakpoints[i + 1])
        if window is not None:
            lo, hi = max(lo, window[0]), min(hi, window[1])
        if hi > lo:
            pieces.append(_Piece(lo, hi, float(F.breakpoints[i]), d[i]))
    return pieces


def _pair_integrand(P, Q, p, kind):
    if kind == 'diagonal':
        def f(X, Y):
            return np.abs(_difference_quotient(P.d, X - P.anchor, Y - P.anchor)) ** p
    elif kind == 'adjacent':
        c = P.hi
        jump = float(P.slope(np.array([c]))[0] - Q.slope(np.array([c]))[0])

        def f(X, Y):
            left = (X - c) * _difference_quotient(P.d, X - P.anchor, np.full_like(X, c - P.anchor))
            right = (Y - c) * _difference_quotient(Q.d, Y - Q.anchor, np.full_like(Y, c - Q.anchor))
            return np.abs(left - right + jump) ** p / (Y - X) ** p
    else:
        def f(X, Y):
            return np.abs(P.slope(X) - Q.slope(Y)) ** p / np.abs(Y - X) ** p
    return f


class _Gauss:
    def __init__(self, order=_GAUSS_ORDER):
        self.nodes, self.weights = leggauss(order)
        self.w2 = np.outer(self.weights, self.weights)

    def panel(self, f, x0, x1, y0, y1):
        hx, hy = (x1 - x0) / 2, (y1 - y0) / 2
        X = (x0 + x1) / 2 + hx * self.nodes
        Y = (y0 + y1) / 2 + hy * self.nodes
        XX, YY = np.meshgrid(X, Y, indexing='ij')
        return float(np.sum(self.w2 * f(XX, YY)) * hx * hy)

    def segment(self, f, a, b):
        h = (b - a) / 2
        return float(np.sum(self.weights * f((a + b) / 2 + h * self.nodes)) * h)


def _adaptive_2d(gauss, f, box, atol, budget):
    total = 0.0
    stack = [(box, gauss.panel(f, *box), 0)]
    while stack:
        (x0, x1, y0, y1), coarse, depth = stack.pop()
        xm, ym = (x0 + x1) / 2, (y0 + y1) / 2
        kids = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
        values = [gauss.panel(f, *k) for k in kids]
        fine = sum(values)
        budget[0] += 4
        if not math.isfinite(fine):
            raise ToleranceNotMetError('Besov integrand is not finite', best_estimate=math.inf)
        if abs(fine - coarse) <= atol * 2.0 ** (-depth):
            total += fine
            continue
        if depth >= _MAX_DEPTH or budget[0] > _MAX_PANELS:
            pending = sum(item[1] for item in stack)
            raise ToleranceNotMetError(
                f'Besov quadrature did not converge near ({xm:.6g}, {ym:.6g})',
                best_estimate=total + fine + pending)
        stack.extend((k, v, depth + 1) for k, v in zip(kids, values))
    return total


def _adaptive_1d(gauss, f, a, b, atol, budget):
    total = 0.0
    stack = [((a, b), gauss.segment(f, a, b), 0)]
    while stack:
        (lo, hi), coarse, depth = stack.pop()
        mid = (lo + hi) / 2
        left, right = gauss.segment(f, lo, mid), gauss.segment(f, mid, hi)
        fine = left + right
        budget[0] += 2
        if abs(fine - coarse) <= atol * 2.0 ** (-depth):
            total += fine
            continue
        if depth >= _MAX_DEPTH or budget[0] > _MAX_PANELS or not math.isfinite(fine):
            raise ToleranceNotMetError(f'Besov tail integral did not converge near {mid:.6g}',
                                       best_estimate=total + (fine if math.isfinite(fine) else 0.0))
        stack.append(((lo, mid), left, depth + 1))
        stack.append(((mid, hi), right, depth + 1))
    return total


def _tail_integrand(piece, edge, tail_slope, p, side, touching):
    def f(x):
        if touching:
            dist = (x - edge) if side == 'left' else (edge - x)
            jump = float(piece.slope(np.array([edge]))[0] - tail_slope)
            diff = (x - edge) * _difference_quotient(piece.d, x - piece.anchor, np.full_like(x, edge - piece.anchor)) + jump
        else:
            dist = np.abs(x - edge)
            diff = piece.slope(x) - tail_slope
        return np.abs(diff) ** p * dist ** (1.0 - p) / (p - 1.0)
    return f


def besov_seminorm_quadrature(F, p, tol=None, window=None):
    """
    (int int |F'(x) - F'(y)|^p / |x - y|^p dx dy)^(1/p)

    Args:
        F: PiecewiseC11
        p: exponent > 2
        tol: relative error target
        window: optional (a, b); integrate over [a, b]^2 only

    Returns:
        float seminorm estimate
    """
    if not (p > 2):
        raise InvalidArgumentError(f'p must exceed 2, got {p}')
    tol = config.BESOV_QUADRATURE_TOL if tol is None else tol
    if tol <= 0:
        raise InvalidArgumentError('tolerance must be positive')
    pieces = _pieces(F, window)
    gauss = _Gauss()
    tails = window is None

    pairs = []
    for i, P in enumerate(pieces):
        pairs.append((1.0, _pair_integrand(P, P, p, 'diagonal'), (P.lo, P.hi, P.lo, P.hi)))
        for j in range(i + 1, len(pieces)):
            Q = pieces[j]
            kind = 'adjacent' if j == i + 1 and P.hi == Q.lo else 'separated'
            pairs.append((2.0, _pair_integrand(P, Q, p, kind), (P.lo, P.hi, Q.lo, Q.hi)))

    segments = []
    lr_term = 0.0
    if tails:
        b0, bM = F.support
        sL, sR = F.left_tail[1], F.right_tail[1]
        for i, P in enumerate(pieces):
            segments.append((2.0, _tail_integrand(P, b0, sL, p, 'left', P.lo == b0), P.lo, P.hi))
            segments.append((2.0, _tail_integrand(P, bM, sR, p, 'right', P.hi == bM), P.lo, P.hi))
        if sR != sL:
            if bM <= b0:
                raise ToleranceNotMetError('slope jump at a single breakpoint: Besov integral diverges',
                                           best_estimate=math.inf)
            lr_term = 2.0 * abs(sR - sL) ** p * float(_antiderivative(np.float64(bM - b0), p))

    coarse = lr_term
    for weight, f, box in pairs:
        coarse += weight * gauss.panel(f, *box)
    for weight, f, a, b in segments:
        coarse += weight * gauss.segment(f, a, b)
    if not math.isfinite(coarse):
        raise ToleranceNotMetError('Besov integrand is not finite', best_estimate=math.inf)
    atol = max(tol * abs(coarse), _ATOL_FLOOR)
    share = max(1, len(pairs) + len(segments))
    budget = [0]
    total = lr_term
    for weight, f, box in pairs:
        total += weight * _adaptive_2d(gauss, f, box, atol / share, budget)
    for weight, f, a, b in segments:
        total += weight * _adaptive_1d(gauss, f, a, b, atol / share, budget)
    logger.debug('besov quadrature: %d panels, integral %.6g', budget[0], total)
    return max(total, 0.0) ** (1.0 / p)


def one_sided_kernel_integral(F, a, b, p):
    """int_a^b |F'(x) - F'(a)|^p / |x - a|^(p-1) dx"""
    slope_a = float(F.derivative(np.array([a]))[0])
    inner = [float(x) for x in F.breakpoints if a < x < b]

    def f(x):
        if x == a:
            return 0.0
        return abs(float(F.derivative(np.array([x]))[0]) - slope_a) ** p / abs(x - a) ** (p - 1)
    value, _ = integrate.quad(f, a, b, points=inner or None, limit=200)
    return value
