"""
Jet service
Choose the affine jet at every keystone representative, by chord slopes
when the local set is rough or by l^p elimination over the local norm
functionals when it is flat, and copy it down the keystone paths
"""

import logging
from dataclasses import dataclass, field

import numpy as np

import config
from errors import InternalError, InvalidInputError
from geometry import AffineJet, Point2, WhitneyField, as_points, dilate
from local_service import hatM_zero_jet_bound, local_functionals
from seminorm_service import best_chord_pair

logger = logging.getLogger(__name__)

LSTSQ_RCOND = 1e-10
KEYSTONE_DILATE = 10.0

# coordinate order of the elimination: gradient first, value last
COMPONENTS = ('gx', 'gy', 'value')


# ============================================================================
# l^p elimination
# ============================================================================

@dataclass(frozen=True, eq=False)
class ElimProblem:
    """
    lambda_i(a1, a2, b) = z_i - beta_i . (a1, a2, b) for the jet
    b + (a1, a2) . (x - base)
    """
    z: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    base: Point2 = None
    scale: float = 1.0

    def __post_init__(self):
        if np.asarray(self.beta).shape != (len(self.z), 3):
            raise InvalidInputError(f'beta must have shape ({len(self.z)}, 3)')

    @property
    def size(self):
        return len(self.z)

    def residuals(self, coeffs):
        return np.asarray(self.z) - np.asarray(self.beta) @ np.asarray(coeffs, dtype=float)

    def objective(self, coeffs, p):
        return float(np.sum(np.abs(self.residuals(coeffs)) ** p))

    def jet(self, coeffs):
        a1, a2, b = (float(c) for c in coeffs)
        return AffineJet(self.base, b, (a1, a2))

    @classmethod
    def from_functionals(cls, functionals, f_values, jet_id, base, scale):
        """
        Split each functional into its data part z_i and its jet part

        Args:
            functionals: LinearFunctional list that reads the jet jet_id
            f_values: data indexed by site id
            jet_id: jet the elimination solves for
            base: basepoint of that jet
            scale: length scale of the jet's square

        Returns:
            ElimProblem
        """
        n = len(functionals)
        z = np.zeros(n)
        beta = np.zeros((n, 3))
        for i, lam in enumerate(functionals):
            z[i] = lam.offset_weight * sum(c * f_values[s] for s, c in lam.coeffs_f.items())
            for (j, comp), c in lam.coeffs_jet.items():
                if j != jet_id:
                    raise InvalidInputError(f'functional {lam.label} reads jet {j}, expected {jet_id}')
                beta[i, COMPONENTS.index(comp)] = -lam.offset_weight * c
        return cls(z, beta, base, scale)


def _elimination_weights(beta, p):
    """c_i with S(z) = sum_i c_i z_i"""
    beta = np.asarray(beta, dtype=float)
    nonzero = beta != 0
    if not np.any(nonzero):
        return np.zeros_like(beta)
    mag = np.abs(beta) ** p
    safe = np.where(nonzero, beta, 1.0)
    return np.where(nonzero, mag / safe, 0.0) / np.sum(mag)


def lp_eliminate(z, beta, p):
    """
    Near-minimiser of sum_i |z_i - beta_i S|^p over S

    Args:
        z: data terms
        beta: coefficients of S
        p: exponent

    Returns:
        S, linear in z
    """
    z = np.asarray(z, dtype=float)
    if len(z) != len(beta):
        raise InvalidInputError(f'z and beta differ in length ({len(z)} vs {len(beta)})')
    return float(_elimination_weights(beta, p) @ z)


def _sweep(problem, x, p):
    z, beta = np.asarray(problem.z), np.asarray(problem.beta)
    x = x.copy()
    for k in (2, 1, 0):
        rest = z - beta @ x + beta[:, k] * x[k]
        x[k] = lp_eliminate(rest, beta[:, k], p)
    return x


def _log_sweeps(problem, p, tol, max_cycles):
    x = np.zeros(3)
    previous = problem.objective(x, p)
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        x = _sweep(problem, x, p)
        current = problem.objective(x, p)
        if previous - current <= tol * max(previous, 1e-300):
            break
        previous = current
    logger.debug('elimination: %d sweeps, objective %.6g', cycles, problem.objective(x, p))


def minimize_affine_lp(problem, p, tol=None, max_cycles=None):
    """
    Coefficients (a1, a2, b) of a near-minimiser of sum |lambda_i|^p

    The cyclic elimination of b, a2, a1 is a linear iteration; its fixed
    point solves C^T B x = C^T z, where column k of C holds the elimination
    weights of coordinate k. The fixed point is solved directly,
    minimum-norm in (a1 delta, a2 delta, b); with DEBUG logging the sweeps
    also run and report their objective.

    Args:
        problem: ElimProblem
        p: exponent
        tol: relative decrease that stops the logged sweeps
        max_cycles: sweep cap

    Returns:
        (3,) array (a1, a2, b)
    """
    if problem.size == 0:
        return np.zeros(3)
    z, beta = np.asarray(problem.z), np.asarray(problem.beta)
    if logger.isEnabledFor(logging.DEBUG):
        _log_sweeps(problem, p, config.ELIMINATION_TOL if tol is None else tol,
                    config.ELIMINATION_MAX_CYCLES if max_cycles is None else max_cycles)

    C = np.stack([_elimination_weights(beta[:, k], p) for k in range(3)], axis=1)
    D = np.diag([1.0 / problem.scale, 1.0 / problem.scale, 1.0])
    y = np.linalg.lstsq(C.T @ beta @ D, C.T @ z, rcond=LSTSQ_RCOND)[0]
    return D @ y


# ============================================================================
# Keystone jets
# ============================================================================

def _site_lookup(points):
    return {pt: k for k, pt in enumerate(as_points(points))}


def chord_jet(pair, f_values, lookup, base):
    """
    Affine jet through the chord slopes of two well separated chords

    Args:
        pair: ChordPair
        f_values: data indexed by site id
        lookup: Point2 -> site id
        base: basepoint of the result

    Returns:
        AffineJet
    """
    def slope(a, b):
        return (f_values[lookup[b]] - f_values[lookup[a]]) / a.distance(b)

    M1 = np.array([pair.v1, pair.v2], dtype=float)
    m = np.array([slope(pair.x1, pair.x2), slope(pair.y1, pair.y2)])
    grad = np.linalg.solve(M1, m)
    anchor = AffineJet(pair.x1, float(f_values[lookup[pair.x1]]), (float(grad[0]), float(grad[1])))
    return anchor.rebase(base)


def local_jet(Q, idx, x0, f, points, p, cfg=None):
    """
    Jet at x0 minimising the local norm functionals of Q over affine jets

    Args:
        Q: Square
        idx: site ids of the local points
        x0: basepoint
        f: data for all sites
        points: (n, 2) array of all sites
        p: exponent
        cfg: Config supplying the set seminorm search

    Returns:
        AffineJet based at x0
    """
    angles, tolerance = (None, None) if cfg is None else (cfg.angle_count, cfg.angle_tolerance)
    functionals = local_functionals(Q, points[idx], x0, p, site_ids=idx, angles=angles, angle_tolerance=tolerance)
    problem = ElimProblem.from_functionals(functionals, f, 0, x0, Q.side)
    return problem.jet(minimize_affine_lp(problem, p))


def keystone_jet(mu, decomp, f, p=None, cfg=None):
    """
    Jet of the keystone mu at its representative

    Args:
        mu: keystone index
        decomp: CZDecomposition
        f: data for all sites
        p: exponent
        cfg: Config supplying c2 and the set seminorm search

    Returns:
        AffineJet based at x#_mu, linear in f
    """
    p = decomp.p if p is None else p
    c2 = config.C2 if cfg is None else cfg.c2
    idx = np.asarray(decomp.E_sharp_mu[mu], dtype=int)
    if len(idx) == 0:
        raise InternalError(f'keystone {mu} has no data points in its 9-dilate')
    base = decomp.x_sharp[mu]
    local = decomp.points[idx]
    pair = best_chord_pair(local)
    if pair is not None and pair.score > c2:
        logger.debug('keystone %d: chord slopes (spread %.3g)', mu, pair.score)
        return chord_jet(pair, f, _site_lookup(decomp.points), base)
    logger.debug('keystone %d: l^p elimination over %d points', mu, len(idx))
    Q = dilate(decomp.keystone_leaf(mu), KEYSTONE_DILATE)
    jet = local_jet(Q, idx, base, f, decomp.points, p, cfg)
    if logger.isEnabledFor(logging.DEBUG):
        angles, tolerance = (None, None) if cfg is None else (cfg.angle_count, cfg.angle_tolerance)
        upper, two_sided = hatM_zero_jet_bound(Q, local, base, jet, p, angles=angles, angle_tolerance=tolerance)
        logger.debug('keystone %d: zero-data surrogate %.6g, two-sided %s', mu, upper, two_sided)
    return jet


def keystone_field(decomp, f, p=None, cfg=None):
    """Whitney field of keystone jets, keyed by keystone index"""
    f = np.asarray(f, dtype=float)
    jets = {mu: keystone_jet(mu, decomp, f, p, cfg) for mu in range(len(decomp.keystones))}
    return WhitneyField(jets, list(decomp.x_sharp))


def constant_path_field(Lsharp, decomp):
    """
    L_nu = L#_mu(nu) re-anchored at x_nu

    Args:
        Lsharp: WhitneyField keyed by keystone index
        decomp: CZDecomposition

    Returns:
        WhitneyField keyed by leaf index
    """
    entries = {}
    for nu, mu in enumerate(decomp.mu_of_nu):
        if mu not in Lsharp.entries:
            raise InvalidInputError(f'keystone {mu} has no jet (needed by leaf {nu})')
        entries[nu] = Lsharp[mu].rebase(decomp.x_nu[nu])
    return WhitneyField(entries, list(decomp.x_nu))


def random_keystone_field(decomp, rng, value_scale=1.0, gradient_scale=1.0):
    """Competitor keystone field with normal entries"""
    jets = {}
    for mu, x in enumerate(decomp.x_sharp):
        g = rng.normal(scale=gradient_scale, size=2)
        jets[mu] = AffineJet(x, float(rng.normal(scale=value_scale)), (float(g[0]), float(g[1])))
    return WhitneyField(jets, list(decomp.x_sharp))
