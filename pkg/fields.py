"""
Evaluable planar fields
Value, gradient and Hessian of scalar fields built by composition: affine
jets, sums, products, quotients, coordinate changes and C^2 cutoffs
"""

import logging

import numpy as np

from errors import InternalError, InvalidArgumentError
from geometry import AffineJet, Point2, Square, points_array

logger = logging.getLogger(__name__)


def smoothstep(u):
    """
    Quintic smoothstep S(u) = u^3 (10 - 15u + 6u^2) clamped to [0, 1]

    Returns:
        (S, S', S'') arrays
    """
    u = np.asarray(u, dtype=float)
    c = np.clip(u, 0.0, 1.0)
    inside = (u > 0.0) & (u < 1.0)
    s = c ** 3 * (10.0 - 15.0 * c + 6.0 * c ** 2)
    ds = np.where(inside, 30.0 * c ** 2 * (1.0 - c) ** 2, 0.0)
    d2s = np.where(inside, 60.0 * c * (1.0 - c) * (1.0 - 2.0 * c), 0.0)
    return s, ds, d2s


class Field2D:
    """
    Scalar field on the plane. Subclasses implement `evaluate`, which maps
    an (n, 2) array to (values (n,), gradients (n, 2), hessians (n, 2, 2))
    """

    def evaluate(self, points):
        raise NotImplementedError

    def value(self, points):
        return self.evaluate(points_array(points))[0]

    def gradient(self, points):
        return self.evaluate(points_array(points))[1]

    def hessian(self, points):
        return self.evaluate(points_array(points))[2]

    def at(self, x):
        """Value at a single Point2"""
        return float(self.value([x])[0])

    def jet(self, x):
        """First-order Taylor polynomial at x"""
        v, g, _ = self.evaluate(points_array([x]))
        return AffineJet(x, float(v[0]), (float(g[0, 0]), float(g[0, 1])))

    def __add__(self, other):
        return LinearCombination([self, other], [1.0, 1.0])

    def __sub__(self, other):
        return LinearCombination([self, other], [1.0, -1.0])

    def __neg__(self):
        return LinearCombination([self], [-1.0])

    def __mul__(self, other):
        if isinstance(other, Field2D):
            return ProductField(self, other)
        return LinearCombination([self], [float(other)])

    __rmul__ = __mul__


def _empty(n):
    return np.zeros(n), np.zeros((n, 2)), np.zeros((n, 2, 2))


class AffineField(Field2D):
    def __init__(self, jet):
        self.jet_ = jet

    def evaluate(self, points):
        pts = points_array(points)
        n = len(pts)
        v = self.jet_.evaluate(pts)
        g = np.tile(np.asarray(self.jet_.grad, dtype=float), (n, 1))
        return v, g, np.zeros((n, 2, 2))


def constant_field(c):
    return AffineField(AffineJet(Point2(0.0, 0.0), float(c), (0.0, 0.0)))


def zero_field():
    return constant_field(0.0)


class AnalyticField(Field2D):
    """Field from closed-form callables on x, y arrays"""

    def __init__(self, value_fn, gradient_fn, hessian_fn):
        self.value_fn = value_fn
        self.gradient_fn = gradient_fn
        self.hessian_fn = hessian_fn

    def evaluate(self, points):
        pts = points_array(points)
        x, y = pts[:, 0], pts[:, 1]
        gx, gy = self.gradient_fn(x, y)
        hxx, hxy, hyy = self.hessian_fn(x, y)
        n = len(pts)
        g = np.stack([np.broadcast_to(gx, (n,)), np.broadcast_to(gy, (n,))], axis=1)
        H = np.empty((n, 2, 2))
        H[:, 0, 0] = hxx
        H[:, 0, 1] = H[:, 1, 0] = hxy
        H[:, 1, 1] = hyy
        return np.broadcast_to(self.value_fn(x, y), (n,)).astype(float), g, H


class LinearCombination(Field2D):
    def __init__(self, terms, coeffs):
        if len(terms) != len(coeffs):
            raise InvalidArgumentError('terms and coefficients differ in length')
        self.terms = list(terms)
        self.coeffs = [float(c) for c in coeffs]

    def evaluate(self, points):
        pts = points_array(points)
        v, g, H = _empty(len(pts))
        for term, c in zip(self.terms, self.coeffs):
            if c == 0.0:
                continue
            tv, tg, tH = term.evaluate(pts)
            v = v + c * tv
            g = g + c * tg
            H = H + c * tH
        return v, g, H


def _outer_sym(a, b):
    return a[:, :, None] * b[:, None, :] + b[:, :, None] * a[:, None, :]


class ProductField(Field2D):
    def __init__(self, a, b):
        self.a = a
        self.b = b

    def evaluate(self, points):
        pts = points_array(points)
        av, ag, aH = self.a.evaluate(pts)
        bv, bg, bH = self.b.evaluate(pts)
        v = av * bv
        g = ag * bv[:, None] + bg * av[:, None]
        H = aH * bv[:, None, None] + bH * av[:, None, None] + _outer_sym(ag, bg)
        return v, g, H


def quotient(nv, ng, nH, dv, dg, dH):
    """Value, gradient and Hessian of n / d from those of n and d"""
    q = nv / dv
    qg = (ng - q[:, None] * dg) / dv[:, None]
    qH = (nH - q[:, None, None] * dH - _outer_sym(qg, dg)) / dv[:, None, None]
    return q, qg, qH


class QuotientField(Field2D):
    def __init__(self, numerator, denominator):
        self.numerator = numerator
        self.denominator = denominator

    def evaluate(self, points):
        pts = points_array(points)
        return quotient(*self.numerator.evaluate(pts), *self.denominator.evaluate(pts))


# ============================================================================
# Coordinate changes
# ============================================================================

class Map2D:
    """
    Smooth map of the plane. `apply` returns (u (n, 2), J (n, 2, 2),
    D2 (n, 2, 2, 2)) with J[a, i] = du_a/dx_i and D2[a, i, j] = d2u_a/dx_i dx_j
    """

    def apply(self, points):
        raise NotImplementedError


class AffineMap2D(Map2D):
    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float).reshape(2, 2)
        self.b = np.asarray(b, dtype=float).reshape(2)

    def apply(self, points):
        pts = points_array(points)
        n = len(pts)
        u = pts @ self.A.T + self.b
        return u, np.broadcast_to(self.A, (n, 2, 2)), np.zeros((n, 2, 2, 2))

    def inverse(self):
        Ainv = np.linalg.inv(self.A)
        return AffineMap2D(Ainv, -Ainv @ self.b)

    def then(self, other):
        """other after self"""
        return AffineMap2D(other.A @ self.A, other.A @ self.b + other.b)

    @classmethod
    def to_frame(cls, frame):
        """World coordinates to frame coordinates"""
        M = frame.matrix
        return cls(M, -M @ frame.origin.as_array())

    @classmethod
    def to_unit(cls, Q):
        """Q onto the unit square centred at the origin"""
        return cls(np.eye(2) / Q.side, -Q.center.as_array() / Q.side)


class ComposedField(Field2D):
    """F o M"""

    def __init__(self, inner, mapping):
        self.inner = inner
        self.mapping = mapping

    def evaluate(self, points):
        pts = points_array(points)
        u, J, D2 = self.mapping.apply(pts)
        v, g, H = self.inner.evaluate(u)
        grad = np.einsum('nai,na->ni', J, g)
        hess = np.einsum('nai,nab,nbj->nij', J, H, J) + np.einsum('na,naij->nij', g, D2)
        return v, grad, hess


# ============================================================================
# Cutoffs
# ============================================================================

def _plateau_1d(x, lo, hi, w_lo, w_hi):
    """1 on [lo, hi], 0 outside [lo - w_lo, hi + w_hi], C^2 quintic ramps"""
    s_lo, ds_lo, d2s_lo = smoothstep((x - (lo - w_lo)) / w_lo)
    s_hi, ds_hi, d2s_hi = smoothstep(((hi + w_hi) - x) / w_hi)
    left = x < lo
    right = x > hi
    v = np.where(left, s_lo, np.where(right, s_hi, 1.0))
    d1 = np.where(left, ds_lo / w_lo, np.where(right, -ds_hi / w_hi, 0.0))
    d2 = np.where(left, d2s_lo / w_lo ** 2, np.where(right, d2s_hi / w_hi ** 2, 0.0))
    return v, d1, d2


class BoxPlateau(Field2D):
    """
    Product of per-axis plateaus: identically 1 on the box [lo, hi] and
    vanishing outside the box enlarged by `width` on every side
    """

    def __init__(self, lo, hi, width):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.width = np.broadcast_to(np.asarray(width, dtype=float), (2, 2)).copy()  # [axis, (low side, high side)]
        if np.any(self.width <= 0) or np.any(self.hi < self.lo):
            raise InvalidArgumentError('plateau box and widths must be well formed')

    @classmethod
    def around(cls, Q, plateau, support):
        """1 on plateau*Q, 0 outside support*Q"""
        half = Q.side / 2
        c = Q.center.as_array()
        return cls(c - plateau * half, c + plateau * half, (support - plateau) * half)

    @property
    def support(self):
        lo = self.lo - self.width[:, 0]
        hi = self.hi + self.width[:, 1]
        side = float(max(hi - lo))
        return Square(Point2(*((lo + hi) / 2)), side)

    def evaluate(self, points):
        pts = points_array(points)
        vx, dx, d2x = _plateau_1d(pts[:, 0], self.lo[0], self.hi[0], self.width[0, 0], self.width[0, 1])
        vy, dy, d2y = _plateau_1d(pts[:, 1], self.lo[1], self.hi[1], self.width[1, 0], self.width[1, 1])
        v = vx * vy
        g = np.stack([dx * vy, vx * dy], axis=1)
        H = np.empty((len(pts), 2, 2))
        H[:, 0, 0] = d2x * vy
        H[:, 0, 1] = H[:, 1, 0] = dx * dy
        H[:, 1, 1] = vx * d2y
        return v, g, H


class RadialBump(Field2D):
    """1 on the disc of radius r_in about center, 0 beyond r_out"""

    def __init__(self, center, r_in, r_out):
        if not (0 < r_in < r_out):
            raise InvalidArgumentError(f'bump radii must satisfy 0 < r_in < r_out, got {r_in}, {r_out}')
        self.center = center
        self.r_in = float(r_in)
        self.r_out = float(r_out)

    def evaluate(self, points):
        pts = points_array(points)
        d = pts - self.center.as_array()
        r = np.hypot(d[:, 0], d[:, 1])
        width = self.r_out - self.r_in
        s, ds, d2s = smoothstep((self.r_out - r) / width)
        dr = -ds / width
        d2r = d2s / width ** 2
        ramp = r > self.r_in
        safe_r = np.where(ramp, r, 1.0)
        e = d / safe_r[:, None]
        g = np.where(ramp[:, None], dr[:, None] * e, 0.0)
        eye = np.eye(2)[None, :, :]
        ee = e[:, :, None] * e[:, None, :]
        H = d2r[:, None, None] * ee + (dr / safe_r)[:, None, None] * (eye - ee)
        H = np.where(ramp[:, None, None], H, 0.0)
        return s, g, H


# ============================================================================
# Blending
# ============================================================================

class BlendedField(Field2D):
    """
    sum_k w_k F_k / sum_k w_k, where each weight w_k vanishes outside
    support_k; only the terms whose support holds a point are evaluated
    """

    def __init__(self, weights, fields, supports, floor=0.5):
        if not (len(weights) == len(fields) == len(supports)):
            raise InvalidArgumentError('weights, fields and supports differ in length')
        self.weights = list(weights)
        self.fields = list(fields)
        self.supports = list(supports)
        self.floor = floor

    def _accumulate(self, pts, with_fields):
        n = len(pts)
        den = _empty(n)
        num = _empty(n)
        for w, F, S in zip(self.weights, self.fields, self.supports):
            mask = S.contains(pts)
            if not np.any(mask):
                continue
            sub = pts[mask]
            wv, wg, wH = w.evaluate(sub)
            den[0][mask] += wv
            den[1][mask] += wg
            den[2][mask] += wH
            if with_fields:
                fv, fg, fH = F.evaluate(sub)
                num[0][mask] += wv * fv
                num[1][mask] += wg * fv[:, None] + fg * wv[:, None]
                num[2][mask] += wH * fv[:, None, None] + fH * wv[:, None, None] + _outer_sym(wg, fg)
        return num, den

    def denominator(self, points):
        return self._accumulate(points_array(points), False)[1]

    def evaluate(self, points):
        pts = points_array(points)
        num, den = self._accumulate(pts, True)
        if len(pts) and np.min(den[0]) < self.floor:
            worst = int(np.argmin(den[0]))
            raise InternalError(f'partition of unity denominator {den[0][worst]:.3g} below {self.floor} '
                                f'at ({pts[worst, 0]:.6g}, {pts[worst, 1]:.6g})')
        return quotient(*num, *den)
