"""
Assembly service
Blend the leaf-local extensions with a partition of unity, compute the
norm surrogates and run the whole extension end to end
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

import config
from decomposition_service import build_decomposition
from errors import InvalidInputError
from fields import (AffineField, BlendedField, BoxPlateau, Field2D, QuotientField, constant_field,
                    zero_field)
from geometry import AffineJet, Point2, WhitneyField, dilate, points_array
from jet_service import constant_path_field, keystone_field, local_jet
from local_service import local_extend

logger = logging.getLogger(__name__)

LOCAL_DILATE = 1.3
PLATEAU_WIDTH = 0.05
OUTER_PLATEAU = 0.99


# ============================================================================
# Partition of unity
# ============================================================================

class _Denominator(Field2D):
    def __init__(self, blend):
        self.blend = blend

    def evaluate(self, points):
        return self.blend.denominator(points)


@dataclass(eq=False)
class PartitionOfUnity:
    """theta_nu = w_nu / sum_mu w_mu, each w_nu a box plateau on its leaf"""
    weights: List[BoxPlateau]
    leaves: list = field(repr=False)

    @property
    def supports(self):
        return [w.support for w in self.weights]

    def blend(self, fields):
        """sum_nu theta_nu F_nu"""
        return BlendedField(self.weights, fields, self.supports)

    def total(self):
        """sum_nu w_nu"""
        return _Denominator(self.blend([zero_field()] * len(self.weights)))

    def theta(self, nu):
        return QuotientField(self.weights[nu], self.total())


def build_pou(decomp):
    """
    Plateaus equal to 1 on each leaf with transition width 0.05 times the
    least side among the leaf and its neighbours

    Args:
        decomp: CZDecomposition

    Returns:
        PartitionOfUnity
    """
    sides = decomp.sides()
    weights = []
    for nu, Q in enumerate(decomp.leaves):
        width = PLATEAU_WIDTH * min(sides[k] for k in decomp.neighbors(nu))
        weights.append(BoxPlateau(Q.lo, Q.hi, width))
    return PartitionOfUnity(weights, decomp.leaves)


class PatchedField(Field2D):
    """
    theta (F - L) + L with theta the outer cutoff; F is only evaluated
    where theta does not vanish
    """

    def __init__(self, cutoff, inner, L):
        self.cutoff = cutoff
        self.inner = inner
        self.L = AffineField(L)

    def evaluate(self, points):
        pts = points_array(points)
        v, g, H = self.L.evaluate(pts)
        mask = self.cutoff.support.contains(pts)
        if np.any(mask):
            sub = pts[mask]
            tv, tg, tH = self.cutoff.evaluate(sub)
            fv, fg, fH = self.inner.evaluate(sub)
            lv, lg, _ = self.L.evaluate(sub)
            dv, dg = fv - lv, fg - lg
            v[mask] = lv + tv * dv
            g[mask] = lg + tg * dv[:, None] + tv[:, None] * dg
            H[mask] = (tH * dv[:, None, None] + tv[:, None, None] * fH
                       + tg[:, :, None] * dg[:, None, :] + dg[:, :, None] * tg[:, None, :])
        return v, g, H


# ============================================================================
# Norms
# ============================================================================

def _gradient_gap(a, b):
    return math.hypot(a.grad[0] - b.grad[0], a.grad[1] - b.grad[1])


def neighbor_terms(L, decomp, p):
    """
    Jet-compatibility terms over ordered neighbour pairs (nu, nu')

    Returns:
        list of (nu, nu', gradient term, value term), p-th powers
    """
    sides = decomp.sides()
    terms = []
    for nu, x in enumerate(decomp.x_nu):
        d = sides[nu]
        for other in decomp.adjacency[nu]:
            grad = _gradient_gap(L[nu], L[other]) ** p * d ** (2.0 - p)
            value = abs(L[nu](x) - L[other](x)) ** p * d ** (2.0 - 2.0 * p)
            terms.append((nu, other, grad, value))
    return terms


def keystone_terms(Lsharp, decomp, p):
    """
    Terms of the keystone field over witnessed keystone pairs

    Returns:
        list of (mu, mu', gradient term, value term), p-th powers
    """
    terms = []
    for (mu, other), delta in sorted(decomp.delta_pairs.items()):
        if mu == other:
            continue
        x = decomp.x_sharp[mu]
        grad = _gradient_gap(Lsharp[mu], Lsharp[other]) ** p * delta ** (2.0 - p)
        value = abs(Lsharp[mu](x) - Lsharp[other](x)) ** p * delta ** (2.0 - 2.0 * p)
        terms.append((mu, other, grad, value))
    return terms


def _local_report(nu, solution, f_values, L):
    return [{'origin': f'leaf {nu}', 'label': lam.label, 'value': lam.apply(f_values, {0: L})}
            for lam in solution.functionals]


def _pair_report(kind, terms, p):
    report = []
    for a, b, grad, value in terms:
        report.append({'origin': f'{kind} {a}-{b}', 'label': 'gradient', 'value': grad ** (1.0 / p)})
        report.append({'origin': f'{kind} {a}-{b}', 'label': 'value', 'value': value ** (1.0 / p)})
    return report


# ============================================================================
# Assembly
# ============================================================================

@dataclass(eq=False)
class Assembly:
    field: Field2D
    Mhat_p: float
    local_solutions: list = field(repr=False)
    jets: WhitneyField = field(repr=False, default=None)
    pou: Optional[PartitionOfUnity] = field(repr=False, default=None)
    origin_jet: Optional[AffineJet] = None


def _local_settings(cfg):
    if cfg is None:
        return {}
    return {'flatness': cfg.c4, 'angles': cfg.angle_count, 'angle_tolerance': cfg.angle_tolerance}


def _leaf_solutions(f, L, decomp, p, cfg):
    settings = _local_settings(cfg)
    solutions = []
    for nu, Q in enumerate(decomp.leaves):
        idx = decomp.E_nu[nu]
        solutions.append(local_extend(dilate(Q, LOCAL_DILATE), decomp.points[idx], decomp.x_nu[nu], f[idx],
                                      L[nu], p, site_ids=idx, **settings))
    return solutions


def assemble(f, Lsharp, decomp, p=None, cfg=None):
    """
    Patch leaf-local extensions driven by the constant-path field of Lsharp

    Args:
        f: data for all sites
        Lsharp: keystone WhitneyField
        decomp: CZDecomposition
        p: exponent
        cfg: Config supplying c4 and the set seminorm search

    Returns:
        Assembly with the global field and Mhat_p
    """
    p = decomp.p if p is None else p
    f = np.asarray(f, dtype=float)
    L = constant_path_field(Lsharp, decomp)
    solutions = _leaf_solutions(f, L, decomp, p, cfg)

    pou = build_pou(decomp)
    blended = pou.blend([s.field for s in solutions])
    origin = decomp.root.center
    origin_jet = blended.jet(origin)
    cutoff = BoxPlateau.around(decomp.root, OUTER_PLATEAU, 1.0)
    global_field = PatchedField(cutoff, blended, origin_jet)

    local_p = sum(s.Mhat_p for s in solutions)
    pair_p = sum(g + v for _, _, g, v in neighbor_terms(L, decomp, p))
    logger.debug('assembly: local %.6g, neighbour %.6g', local_p, pair_p)
    return Assembly(global_field, local_p + pair_p, solutions, L, pou, origin_jet)


def norm_surrogate_p(f, Lsharp, decomp, p=None, cfg=None):
    """Norm surrogate of (f, Lsharp) without building the blended field"""
    p = decomp.p if p is None else p
    f = np.asarray(f, dtype=float)
    L = constant_path_field(Lsharp, decomp)
    total = sum(s.Mhat_p for s in _leaf_solutions(f, L, decomp, p, cfg))
    return total + sum(g + v for _, _, g, v in neighbor_terms(L, decomp, p))


# ============================================================================
# Extension
# ============================================================================

@dataclass(eq=False)
class Extension:
    field: Field2D
    Mhat_p: float
    M_p: float
    p: float
    functional_report: List[Dict] = field(repr=False, default_factory=list)
    keystone_field: Optional[WhitneyField] = field(repr=False, default=None)
    decomposition: object = field(repr=False, default=None)
    assembly: Optional[Assembly] = field(repr=False, default=None)

    @property
    def M(self):
        return self.M_p ** (1.0 / self.p)

    @property
    def functional_count(self):
        return len(self.functional_report)

    def to_dict(self):
        data = {
            'p': self.p,
            'M_p': self.M_p,
            'M': self.M,
            'Mhat_p': self.Mhat_p,
            'functional_count': self.functional_count,
            'functional_report': self.functional_report,
        }
        if self.keystone_field is not None:
            data['keystone_field'] = self.keystone_field.to_dict()
        if self.decomposition is not None:
            data['decomposition'] = self.decomposition.summary()
        return data


def _degenerate(E, f, p):
    if len(E) == 0:
        return Extension(zero_field(), 0.0, 0.0, p)
    value = float(f[0])
    return Extension(constant_field(value), 0.0, 0.0, p,
                     keystone_field=WhitneyField({0: AffineJet(E[0], value, (0.0, 0.0))}, [E[0]]))


def _trivial(decomp, f, p, cfg):
    """Root square is OK: one local extension with the best jet at x_0"""
    Q = decomp.root
    idx = np.arange(len(decomp.points))
    x0 = decomp.x_nu[0]
    L1 = local_jet(Q, idx, x0, f, decomp.points, p, cfg)
    solution = local_extend(Q, decomp.points, x0, f, L1, p, site_ids=idx, **_local_settings(cfg))
    report = _local_report(0, solution, dict(enumerate(f)), L1)
    logger.info('extension: trivial decomposition, M_p %.6g', solution.Mhat_p)
    return Extension(solution.field, solution.Mhat_p, solution.Mhat_p, p, report,
                     WhitneyField({0: L1}, [x0]), decomp)


def extend(f, E, p=None, cfg=None):
    """
    Linear extension of data on a finite set with its norm surrogate

    Args:
        f: values at E
        E: distinct points
        p: exponent, defaults to cfg.p
        cfg: Config

    Returns:
        Extension
    """
    cfg = cfg or config.load_config()
    p = cfg.p if p is None else p
    E = [Point2(float(x), float(y)) for x, y in points_array(E)]
    f = np.asarray(f, dtype=float)
    if len(f) != len(E):
        raise InvalidInputError(f'{len(E)} points but {len(f)} values')
    if not np.all(np.isfinite(f)):
        raise InvalidInputError('values must be finite')
    if len(E) <= 1:
        return _degenerate(E, f, p)

    decomp = build_decomposition(E, p, cfg.c1, cfg.angle_count, cfg.angle_tolerance)
    if decomp.trivial:
        return _trivial(decomp, f, p, cfg)

    Lsharp = keystone_field(decomp, f, p, cfg)
    assembly = assemble(f, Lsharp, decomp, p, cfg)
    f_values = dict(enumerate(f))
    report = []
    for nu, solution in enumerate(assembly.local_solutions):
        report.extend(_local_report(nu, solution, f_values, assembly.jets[nu]))
    pairs = keystone_terms(Lsharp, decomp, p)
    report.extend(_pair_report('keystones', pairs, p))
    M_p = sum(s.Mhat_p for s in assembly.local_solutions) + sum(g + v for _, _, g, v in pairs)
    logger.info('extension: %d leaves, %d keystones, %d functionals, M_p %.6g',
                decomp.K, len(decomp.keystones), len(report), M_p)
    return Extension(assembly.field, assembly.Mhat_p, M_p, p, report, Lsharp, decomp, assembly)
