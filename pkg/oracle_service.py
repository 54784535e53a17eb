"""
Oracle service
Brute-force references: discrete L^{2,p} energy minimisation on a grid,
discrete Besov trace minimisation on a line, and quadrature seminorms of
produced fields
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

import config
from errors import InvalidArgumentError, InvalidInputError, ToleranceNotMetError
from geometry import Point2, Square, as_points, bounding_square, points_array
from trace1d_service import Samples1D

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 50
RIDGE = 1e-12
MIN_GRID = 16
# weight floor eps = rel * max(s), lowered stage by stage
SMOOTHING = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
STAGE_TOL = 1e-3


# ============================================================================
# Convex energies
# ============================================================================

class _PowerEnergy:
    """
    sum_k c_k (s_k + eps)^(p/2) with s = sum_j m_j (op_j x)^2

    eps = 0 is the exact energy; a positive eps floors the IRLS weights
    (s + eps)^(p/2 - 1) away from zero
    """

    def __init__(self, ops, mult, coeff, p):
        self.ops = tuple(sp.csr_matrix(op) for op in ops)
        self.mult = tuple(float(m) for m in mult)
        self.coeff = coeff
        self.p = p

    def _parts(self, x):
        parts = [op @ x for op in self.ops]
        s = sum(m * a * a for m, a in zip(self.mult, parts))
        return parts, s

    def squares(self, x):
        return self._parts(x)[1]

    def value(self, x, eps=0.0):
        _, s = self._parts(x)
        return float(np.sum(self.coeff * (s + eps) ** (self.p / 2.0)))

    def gradient(self, x, eps=0.0):
        parts, s = self._parts(x)
        w = self.coeff * self.p * (s + eps) ** (self.p / 2.0 - 1.0)
        return sum(m * (op.T @ (w * a)) for m, op, a in zip(self.mult, self.ops, parts))

    def hessian(self, x, eps):
        parts, s = self._parts(x)
        p = self.p
        t = s + eps
        w = self.coeff * p * t ** (p / 2.0 - 1.0)
        H = sum(m * (op.T @ sp.diags(w) @ op) for m, op in zip(self.mult, self.ops))
        # curvature of t^(p/2) along the direction of its own gradient
        R = sum(sp.diags(m * a) @ op for m, op, a in zip(self.mult, self.ops, parts))
        safe = np.where(t > 0, t, 1.0)
        v = np.where(t > 0, self.coeff * p * (p - 2.0) * safe ** (p / 2.0 - 2.0), 0.0)
        return (H + R.T @ sp.diags(v) @ R).tocsr()

    def reference(self):
        c = np.broadcast_to(self.coeff, self.ops[0].shape[0])
        return sum(m * (op.T @ sp.diags(c) @ op) for m, op in zip(self.mult, self.ops)).tocsr()


def _kkt_solve(H, rhs, A, b):
    n = H.shape[0]
    scale = float(np.max(np.abs(H.diagonal()))) if n else 0.0
    ridge = RIDGE * max(scale, 1.0)
    top = H + ridge * sp.identity(n, format='csr')
    if A.shape[0] == 0:
        return spsolve(top.tocsc(), rhs), np.zeros(0)
    K = sp.bmat([[top, A.T], [A, -ridge * 1e-6 * sp.identity(A.shape[0])]], format='csc')
    sol = spsolve(K, np.concatenate([rhs, b]))
    return sol[:n], sol[n:]


class _Stationarity:
    """Relative KKT residual |g + A^T lam| / |g| with least-squares multipliers"""

    def __init__(self, A):
        self.A = A
        self.gram = (A @ A.T).toarray() if A.shape[0] else None

    def __call__(self, g):
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            return 0.0
        if self.gram is None:
            return 1.0
        lam = np.linalg.lstsq(self.gram, -(self.A @ g), rcond=None)[0]
        return float(np.linalg.norm(g + self.A.T @ lam)) / norm


def _minimize(energy, A, b, tol, max_iter):
    """
    Smoothed Newton-IRLS: start from the quadratic (p = 2) minimiser, then
    for each weight floor in SMOOTHING run Newton steps with Armijo
    backtracking on the smoothed energy until the relative KKT residual
    drops below the stage tolerance; every step keeps A x = b

    Returns:
        (x, exact energy value, iterations)
    """
    A = sp.csr_matrix(A)
    ref = energy.reference()
    x, _ = _kkt_solve(ref, np.zeros(ref.shape[0]), A, b)
    residual = _Stationarity(A)
    zero = np.zeros(A.shape[0])
    it = 0
    for stage, rel in enumerate(SMOOTHING):
        s_max = float(np.max(energy.squares(x), initial=0.0))
        if s_max == 0.0:
            break
        eps = rel * s_max
        stage_tol = tol if stage == len(SMOOTHING) - 1 else max(tol, STAGE_TOL)
        E = energy.value(x, eps)
        while True:
            g = energy.gradient(x, eps)
            r = residual(g)
            if r <= stage_tol:
                break
            if it >= max_iter:
                raise ToleranceNotMetError(f'oracle did not converge in {max_iter} iterations '
                                           f'(relative KKT residual {r:.3g})',
                                           best_estimate=energy.value(x) ** (1.0 / energy.p))
            it += 1
            dx, _ = _kkt_solve(energy.hessian(x, eps), -g, A, zero)
            slope = float(g @ dx)
            if not slope < 0:
                logger.debug('oracle stage %d: no descent direction at residual %.3g', stage, r)
                break
            t = 1.0
            for _ in range(MAX_HALVINGS):
                trial = energy.value(x + t * dx, eps)
                if trial <= E + ARMIJO * t * slope:
                    break
                t /= 2.0
            else:
                logger.debug('oracle stage %d: line search stalled at residual %.3g', stage, r)
                break
            x = x + t * dx
            E = trial
            logger.debug('oracle iteration %d (floor %.0e): energy %.10g, step %.3g, residual %.3g',
                          it, rel, E, t, r)
    return x, energy.value(x), it


# ============================================================================
# Grid oracle
# ============================================================================

@dataclass(frozen=True)
class GridProblem:
    box: Square
    n: int
    p: float
    constraints: Tuple[Tuple[Point2, float], ...] = ()
    jet_constraints: Tuple[Tuple[Point2, float, Tuple[float, float]], ...] = ()

    def __post_init__(self):
        if self.n < MIN_GRID:
            raise InvalidArgumentError(f'grid needs at least {MIN_GRID} nodes per side, got {self.n}')
        if not (self.p >= 2):
            raise InvalidArgumentError(f'p must be at least 2, got {self.p}')
        anchors = [c[0] for c in self.constraints] + [c[0] for c in self.jet_constraints]
        if anchors and not np.all(self.box.contains(points_array(anchors))):
            raise InvalidInputError('constraints must lie inside the box')

    @property
    def h(self):
        return self.box.side / (self.n - 1)

    def to_dict(self):
        return {
            'box': self.box.to_dict(),
            'n': self.n,
            'p': self.p,
            'constraints': [[pt.to_dict(), v] for pt, v in self.constraints],
            'jet_constraints': [[pt.to_dict(), v, list(g)] for pt, v, g in self.jet_constraints],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            Square.from_dict(data['box']),
            int(data['n']),
            float(data['p']),
            tuple((Point2.from_dict(pt), float(v)) for pt, v in data.get('constraints', [])),
            tuple((Point2.from_dict(pt), float(v), (float(g[0]), float(g[1])))
                  for pt, v, g in data.get('jet_constraints', [])),
        )


@dataclass(frozen=True, eq=False)
class GridField:
    box: Square
    values: np.ndarray = field(repr=False)  # [iy, ix]

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def axes(self):
        t = np.linspace(0.0, self.box.side, self.n)
        return self.box.lo[1] + t, self.box.lo[0] + t

    def value(self, points):
        ys, xs = self.axes
        pts = points_array(points)
        interp = RegularGridInterpolator((ys, xs), self.values, method='linear')
        return interp(pts[:, ::-1])


def _bilinear_row(prob, point):
    """Node indices and weights of bilinear interpolation at point"""
    n, h = prob.n, prob.h
    lo = prob.box.lo
    fx = (point.x - lo[0]) / h
    fy = (point.y - lo[1]) / h
    i = min(int(math.floor(fx)), n - 2)
    j = min(int(math.floor(fy)), n - 2)
    tx, ty = fx - i, fy - j
    idx = [j * n + i, j * n + i + 1, (j + 1) * n + i, (j + 1) * n + i + 1]
    w = [(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty]
    return idx, w


def _constraint_rows(prob):
    rows, cols, vals, rhs = [], [], [], []

    def add(entries, target):
        r = len(rhs)
        for idx, w, scale in entries:
            rows.extend([r] * len(idx))
            cols.extend(idx)
            vals.extend(scale * np.asarray(w))
        rhs.append(target)

    h = prob.h
    for pt, value in prob.constraints:
        idx, w = _bilinear_row(prob, pt)
        add([(idx, w, 1.0)], value)
    for pt, value, grad in prob.jet_constraints:
        idx, w = _bilinear_row(prob, pt)
        add([(idx, w, 1.0)], value)
        for axis in (0, 1):
            step = np.array([h, 0.0]) if axis == 0 else np.array([0.0, h])
            plus = Point2(*np.clip(pt.as_array() + step, prob.box.lo, prob.box.hi))
            minus = Point2(*np.clip(pt.as_array() - step, prob.box.lo, prob.box.hi))
            span = plus.distance(minus)
            ip, wp = _bilinear_row(prob, plus)
            im, wm = _bilinear_row(prob, minus)
            add([(ip, wp, 1.0 / span), (im, wm, -1.0 / span)], grad[axis])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(rhs), prob.n * prob.n))
    return A, np.asarray(rhs, dtype=float)


def _grid_operators(n, h):
    inner = n - 2
    ones = np.ones(inner)
    D2 = sp.diags([ones, -2.0 * ones, ones], [0, 1, 2], shape=(inner, n)) / h ** 2
    D1 = sp.diags([-ones, ones], [0, 2], shape=(inner, n)) / (2.0 * h)
    R = sp.diags([ones], [1], shape=(inner, n))
    return sp.kron(R, D2), sp.kron(D1, D1), sp.kron(D2, R)


def min_energy_2d(prob, tol=None, max_iter=None):
    """
    Least discrete energy sum_nodes |Hess u|_F^p h^2 under the constraints

    Args:
        prob: GridProblem
        tol: relative KKT residual that stops the iteration
        max_iter: iteration cap

    Returns:
        (energy^(1/p), GridField)
    """
    tol = config.ORACLE_TOL if tol is None else tol
    max_iter = config.ORACLE_MAX_ITER if max_iter is None else max_iter
    A, b = _constraint_rows(prob)
    if A.shape[0] >= (prob.n - 2) ** 2:
        raise InvalidArgumentError(f'{A.shape[0]} constraints leave no free nodes')
    energy = _PowerEnergy(_grid_operators(prob.n, prob.h), (1.0, 2.0, 1.0), prob.h ** 2, prob.p)
    x, E, iterations = _minimize(energy, A, b, tol, max_iter)
    logger.info('grid oracle: n=%d, %d constraints, %d iterations, energy^(1/p) %.6g',
                prob.n, A.shape[0], iterations, max(E, 0.0) ** (1.0 / prob.p))
    return max(E, 0.0) ** (1.0 / prob.p), GridField(prob.box, x.reshape(prob.n, prob.n))


def grid_problem_for(points, values, p, n, scale=1.5):
    """Interpolation problem for (points, values) on the bounding square of the data"""
    pts = as_points(points)
    return GridProblem(bounding_square(pts, scale), n, p, tuple(zip(pts, (float(v) for v in values))))


# ============================================================================
# Line oracle
# ============================================================================

def _line_nodes(xs, n):
    diam = xs[-1] - xs[0]
    pad = 0.25 * diam
    grid = np.linspace(xs[0] - pad, xs[-1] + pad, n)
    return np.unique(np.concatenate([grid, xs]))


def _trapezoid_weights(t):
    gaps = np.diff(t)
    w = np.zeros(len(t))
    w[:-1] += gaps / 2
    w[1:] += gaps / 2
    return w


def min_besov_1d(points, values, p, n=None, tol=None, max_iter=None):
    """
    Least discrete Besov energy of a C^1 interpolant of 1D data

    Slopes live on a node set containing the data; values follow by
    trapezoid accumulation and the slopes are constant past both ends.

    Returns:
        energy^(1/p)
    """
    n = config.ORACLE_GRID if n is None else n
    tol = config.ORACLE_TOL if tol is None else tol
    max_iter = config.ORACLE_MAX_ITER if max_iter is None else max_iter
    s = Samples1D.of(points, values, p)
    if s.n < 2:
        return 0.0
    xs = s.x
    t = _line_nodes(xs, n)
    m = len(t)
    w = _trapezoid_weights(t)

    i, j = np.triu_indices(m, k=1)
    coeff = 2.0 * w[i] * w[j] / (t[j] - t[i]) ** p
    rest = np.arange(1, m)
    left = 2.0 * w[rest] * (t[rest] - t[0]) ** (1.0 - p) / (p - 1.0)
    rest_r = np.arange(0, m - 1)
    right = 2.0 * w[rest_r] * (t[-1] - t[rest_r]) ** (1.0 - p) / (p - 1.0)
    span = t[-1] - t[0]
    tails = 2.0 * span ** (2.0 - p) / ((p - 1.0) * (p - 2.0))
    pi = np.concatenate([i, np.zeros(m - 1, dtype=int), rest_r, [0]])
    pj = np.concatenate([j, rest, np.full(m - 1, m - 1), [m - 1]])
    c = np.concatenate([coeff, left, right, [tails]])
    k = np.arange(len(c))
    D = sp.csr_matrix((np.concatenate([np.ones(len(c)), -np.ones(len(c))]),
                       (np.concatenate([k, k]), np.concatenate([pi, pj]))), shape=(len(c), m))

    # F(t_k) - F(t_0) = sum_(i<k) (s_i + s_(i+1)) gap_i / 2
    gaps = np.diff(t)
    cumulative = np.zeros((m, m))
    for q in range(1, m):
        cumulative[q] = cumulative[q - 1]
        cumulative[q, q - 1] += gaps[q - 1] / 2
        cumulative[q, q] += gaps[q - 1] / 2
    pos = np.searchsorted(t, xs)
    A = sp.csr_matrix(cumulative[pos[1:]] - cumulative[pos[0]])
    b = s.g[1:] - s.g[0]

    x, E, iterations = _minimize(_PowerEnergy((D,), (1.0,), c, p), A, b, tol, max_iter)
    logger.debug('line oracle: %d nodes, %d iterations', m, iterations)
    return max(E, 0.0) ** (1.0 / p)


# ============================================================================
# Quadrature of produced fields
# ============================================================================

def _cell_centres(box, n):
    t = (np.arange(n) + 0.5) / n * box.side
    gx, gy = np.meshgrid(box.lo[0] + t, box.lo[1] + t)
    return np.stack([gx.ravel(), gy.ravel()], axis=1), (box.side / n) ** 2


def sobolev_seminorm_quadrature(F, box, n, p):
    """Midpoint rule for ||Hess F||_(L^p(box)) with the Frobenius norm"""
    pts, area = _cell_centres(box, n)
    H = F.hessian(pts)
    frob = np.sqrt(np.sum(H ** 2, axis=(1, 2)))
    return float(np.sum(frob ** p) * area) ** (1.0 / p)


def sobolev_norm_quadrature(F, box, n, p):
    """Midpoint rule for the full W^{2,p}(box) norm"""
    pts, area = _cell_centres(box, n)
    v, g, H = F.evaluate(pts)
    frob = np.sqrt(np.sum(H ** 2, axis=(1, 2)))
    total = np.sum(np.abs(v) ** p + np.hypot(g[:, 0], g[:, 1]) ** p + frob ** p) * area
    return float(total) ** (1.0 / p)


def hoelder_ratio(F, box, p, samples=2000, rng=None):
    """
    Largest sampled |grad F(x) - grad F(y)| / |x - y|^(1 - 2/p) over box
    """
    rng = rng or np.random.default_rng(config.SEED)
    lo = np.asarray(box.lo)
    x = lo + rng.random((samples, 2)) * box.side
    y = lo + rng.random((samples, 2)) * box.side
    gx, gy = F.gradient(x), F.gradient(y)
    dist = np.hypot(*(x - y).T)
    keep = dist > 0
    num = np.hypot(*(gx - gy).T)[keep]
    return float(np.max(num / dist[keep] ** (1.0 - 2.0 / p))) if np.any(keep) else 0.0
