"""
Decomposition service
Calderon-Zygmund quadtree of OK squares, neighbour structure, keystone
squares with their descending paths, and representative points
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.spatial import cKDTree

import config
from errors import ConfigError, InternalError, InvalidInputError
from geometry import DyadicAddress, Point2, Square, children, dilate, points_array
from seminorm_service import RoughnessConfig, is_OK, satisfies_R

logger = logging.getLogger(__name__)

ROOT_FACTOR = 10.5
REPRESENTATIVE_GRID = 9
KEYSTONE_REACH = 100.0
PATH_DECAY = 0.25


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    root: Square
    points: np.ndarray = field(repr=False)
    leaves: List[Square] = field(repr=False)
    adjacency: List[Tuple[int, ...]] = field(repr=False)
    E_nu: List[np.ndarray] = field(repr=False)
    x_nu: List[Point2] = field(repr=False)
    keystones: List[int] = field(repr=False)
    mu_of_nu: List[int] = field(repr=False)
    paths: List[List[int]] = field(repr=False)
    x_sharp: List[Point2] = field(repr=False)
    E_sharp_mu: List[np.ndarray] = field(repr=False)
    delta_pairs: Dict[Tuple[int, int], float] = field(repr=False)
    refined: List[Square] = field(repr=False, default_factory=list)
    balance_splits: int = 0
    p: float = config.P
    c1: float = config.C1

    @property
    def trivial(self):
        """Single leaf: the root itself is OK"""
        return len(self.leaves) == 1

    @property
    def K(self):
        return len(self.leaves)

    def sides(self):
        return np.array([Q.side for Q in self.leaves])

    def neighbors(self, nu, include_self=True):
        return ((nu,) if include_self else ()) + self.adjacency[nu]

    def keystone_leaf(self, mu):
        return self.leaves[self.keystones[mu]]

    def summary(self):
        sides = self.sides()
        return {
            'root': self.root.to_dict(),
            'leaves': len(self.leaves),
            'keystones': len(self.keystones),
            'min_side': float(sides.min()),
            'max_side': float(sides.max()),
            'balance_splits': self.balance_splits,
            'longest_path': max(len(path) for path in self.paths),
        }

    def to_dict(self):
        return {
            'root': self.root.to_dict(),
            'leaves': [Q.to_dict() for Q in self.leaves],
            'adjacency': [list(a) for a in self.adjacency],
            'E_nu': [[int(i) for i in idx] for idx in self.E_nu],
            'x_nu': [x.to_dict() for x in self.x_nu],
            'keystones': list(self.keystones),
            'mu_of_nu': list(self.mu_of_nu),
            'paths': [list(path) for path in self.paths],
            'x_sharp': [x.to_dict() for x in self.x_sharp],
            'E_sharp_mu': [[int(i) for i in idx] for idx in self.E_sharp_mu],
            'delta_pairs': [[mu, mu2, d] for (mu, mu2), d in sorted(self.delta_pairs.items())],
            'balance_splits': self.balance_splits,
        }


# ============================================================================
# Root and cutting
# ============================================================================

def _check_distinct(pts):
    if len(pts) < 2:
        return
    tree = cKDTree(pts)
    pairs = tree.query_pairs(0.0)
    if pairs:
        i, j = sorted(next(iter(pairs)))
        raise InvalidInputError(f'duplicate points: #{i} and #{j} at ({pts[i, 0]}, {pts[i, 1]})')


def choose_root(E):
    """
    Square centred at the origin, power-of-two side, with E inside its
    inner tenth

    Args:
        E: points

    Returns:
        Square with address (0, 0, 0)
    """
    pts = points_array(E)
    _check_distinct(pts)
    if len(pts) == 0:
        return Square(Point2(0.0, 0.0), 1.0, DyadicAddress(0, 0, 0))
    reach = float(np.max(np.abs(pts)))
    raw = ROOT_FACTOR * max(1.0, 2.0 * reach)
    side = 2.0 ** math.ceil(math.log2(raw))
    return Square(Point2(0.0, 0.0), side, DyadicAddress(0, 0, 0))


def _min_gap(pts):
    if len(pts) < 2:
        return math.inf
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(np.min(d[:, 1]))


def depth_cap(root, E):
    eps = _min_gap(points_array(E)) / 100.0
    if not math.isfinite(eps):
        return 0
    return max(0, math.ceil(math.log2(root.side / eps))) + 4


class _Cutter:
    def __init__(self, root, E, p, c1, angles, angle_tolerance=None):
        self.root = root
        self.pts = points_array(E)
        self.tree = cKDTree(self.pts) if len(self.pts) else None
        self.p = p
        self.c1 = c1
        self.angles = angles
        self.angle_tolerance = angle_tolerance
        self.cap = depth_cap(root, self.pts)
        self.refined = []

    def local(self, Q, factor):
        if self.tree is None:
            return self.pts
        r = factor * Q.side / 2
        idx = self.tree.query_ball_point(Q.center.as_array(), r, p=np.inf)
        return self.pts[sorted(idx)]

    def ok(self, Q):
        return is_OK(Q, self.local(Q, 3.0), self.p, self.c1, self.angles, self.angle_tolerance)

    def cut(self, Q):
        if self.ok(Q):
            return [Q]
        if Q.address.level >= self.cap:
            raise InternalError(f'cutting exceeded depth {self.cap} at {Q.to_dict()}')
        self.refined.append(Q)
        leaves = []
        for child in children(Q):
            leaves.extend(self.cut(child))
        return leaves


def cut(root, E, p, c1, angles=None, angle_tolerance=None):
    """
    CZ cutting procedure: keep OK squares, bisect the rest

    Returns:
        list of leaf Squares in depth-first order
    """
    return _Cutter(root, E, p, c1, angles, angle_tolerance).cut(root)


# ============================================================================
# Adjacency
# ============================================================================

def _integer_boxes(leaves):
    top = max(Q.address.level for Q in leaves)
    if top > 60:
        raise InvalidInputError(f'decomposition depth {top} exceeds the exact integer range')
    box = np.empty((len(leaves), 4), dtype=np.int64)
    for k, Q in enumerate(leaves):
        a = Q.address
        s = 1 << (top - a.level)
        box[k] = (a.i * s, (a.i + 1) * s, a.j * s, (a.j + 1) * s)
    return box


def build_adjacency(leaves):
    """Neighbour lists (closed squares meet), self excluded, exact on addresses"""
    box = _integer_boxes(leaves)
    touch = ((box[:, None, 0] <= box[None, :, 1]) & (box[None, :, 0] <= box[:, None, 1])
             & (box[:, None, 2] <= box[None, :, 3]) & (box[None, :, 2] <= box[:, None, 3]))
    np.fill_diagonal(touch, False)
    return [tuple(int(j) for j in np.flatnonzero(row)) for row in touch]


def _balance(leaves, cutter):
    """Split leaves that are more than twice as large as a neighbour"""
    splits = 0
    while True:
        adjacency = build_adjacency(leaves)
        sides = np.array([Q.side for Q in leaves])
        offenders = {k for k, nbrs in enumerate(adjacency)
                     for j in nbrs if sides[k] > 2.0 * sides[j]}
        if not offenders:
            return leaves, adjacency, splits
        splits += len(offenders)
        logger.debug('balance pass splits %d leaves', len(offenders))
        new_leaves = []
        for k, Q in enumerate(leaves):
            if k in offenders:
                if Q.address.level >= cutter.cap:
                    raise InternalError('balancing exceeded the depth cap')
                for child in children(Q):
                    new_leaves.extend(cutter.cut(child))
            else:
                new_leaves.append(Q)
        leaves = new_leaves


# ============================================================================
# Keystones and paths
# ============================================================================

class LeafIndex:
    """Spatial lookups over the leaves"""

    def __init__(self, leaves, adjacency):
        self.leaves = leaves
        self.adjacency = adjacency
        self.adjacent = [set(a) for a in adjacency]
        self.centers = np.array([Q.center.as_array() for Q in leaves])
        self.sides = np.array([Q.side for Q in leaves])
        self.lo = self.centers - self.sides[:, None] / 2
        self.hi = self.centers + self.sides[:, None] / 2
        self.tree = cKDTree(self.centers)
        self.max_side = float(self.sides.max())

    def meeting(self, Q, factor):
        """Leaves whose closed square meets the closed factor-dilate of Q"""
        reach = factor * Q.side / 2
        idx = np.array(sorted(self.tree.query_ball_point(Q.center.as_array(), reach + self.max_side / 2, p=np.inf)),
                       dtype=int)
        if len(idx) == 0:
            return idx
        gap = np.abs(self.centers[idx] - Q.center.as_array()) - self.sides[idx, None] / 2
        return idx[np.all(gap <= reach * (1 + 1e-12), axis=1)]

    def distance(self, a, b):
        gap = np.maximum(np.maximum(self.lo[a] - self.hi[b], self.lo[b] - self.hi[a]), 0.0)
        return float(np.hypot(gap[0], gap[1]))


def find_keystones(leaves, adjacency=None):
    """
    Leaves Q# such that every leaf meeting 100 Q# is at least as large

    Returns:
        sorted list of leaf indices
    """
    index = LeafIndex(leaves, adjacency if adjacency is not None else build_adjacency(leaves))
    keystones = []
    for k, Q in enumerate(leaves):
        near = index.meeting(Q, KEYSTONE_REACH)
        if np.all(index.sides[near] >= Q.side):
            keystones.append(k)
    return keystones


def _closest_points(index, a, b):
    """Closest pair of points between the closed squares a and b"""
    pa, pb = np.empty(2), np.empty(2)
    for axis in (0, 1):
        lo = max(index.lo[a, axis], index.lo[b, axis])
        hi = min(index.hi[a, axis], index.hi[b, axis])
        if lo <= hi:
            pa[axis] = pb[axis] = (lo + hi) / 2
        elif index.hi[a, axis] < index.lo[b, axis]:
            pa[axis], pb[axis] = index.hi[a, axis], index.lo[b, axis]
        else:
            pa[axis], pb[axis] = index.lo[a, axis], index.hi[b, axis]
    return pa, pb


def _segment_hits(index, a, b):
    """Entry and exit parameters of the segment a -> b in every leaf"""
    d = b - a
    slack = 1e-12 * index.sides[:, None]
    lo = index.lo - slack
    hi = index.hi + slack
    t_in = np.zeros(len(lo))
    t_out = np.ones(len(lo))
    for axis in (0, 1):
        if d[axis] == 0.0:
            inside = (lo[:, axis] <= a[axis]) & (a[axis] <= hi[:, axis])
            t_out = np.where(inside, t_out, -1.0)
            continue
        t0 = (lo[:, axis] - a[axis]) / d[axis]
        t1 = (hi[:, axis] - a[axis]) / d[axis]
        t_in = np.maximum(t_in, np.minimum(t0, t1))
        t_out = np.minimum(t_out, np.maximum(t0, t1))
    return t_in, t_out


def _bridge(index, start, target):
    """Chain of leaves along the segment joining start and target"""
    if target in index.adjacent[start]:
        return []
    a, b = _closest_points(index, start, target)
    t_in, t_out = _segment_hits(index, a, b)
    crossing = np.flatnonzero(t_in <= t_out)
    chain = []
    current, t_cur = start, float(t_out[start])
    while target not in index.adjacent[current]:
        candidates = [int(k) for k in crossing
                      if k in index.adjacent[current] and t_out[k] > t_cur and k not in chain]
        if not candidates:
            raise InternalError(f'segment walk from leaf {start} to leaf {target} stalled at leaf {current}')
        current = max(candidates, key=lambda k: (t_out[k], -k))
        t_cur = float(t_out[current])
        chain.append(current)
    return chain


def keystone_path(start, index, keystone_set):
    """
    Path of neighbouring leaves from leaf `start` down to a keystone

    Args:
        start: leaf index
        index: LeafIndex
        keystone_set: set of keystone leaf indices

    Returns:
        list of leaf indices, first `start`, last a keystone
    """
    path = [start]
    marker = start
    seen = {start}
    while marker not in keystone_set:
        Q = index.leaves[marker]
        near = index.meeting(Q, KEYSTONE_REACH)
        smaller = [int(k) for k in near if index.sides[k] <= Q.side / 2]
        if not smaller:
            raise InternalError(f'leaf {marker} is not a keystone yet no smaller leaf meets its 100-dilate')
        nxt = min(smaller, key=lambda k: (index.distance(marker, k), k))
        if nxt in seen:
            raise InternalError(f'keystone path from leaf {start} revisits marker {nxt}')
        path.extend(_bridge(index, marker, nxt))
        path.append(nxt)
        seen.add(nxt)
        marker = nxt
    return path


def path_decay_constant(path, sides, c=PATH_DECAY):
    """Smallest C with delta_k2 <= C (1 - c)^(k2 - k1) delta_k1 along the path"""
    s = np.asarray([sides[k] for k in path])
    if len(s) < 2:
        return 1.0
    k = np.arange(len(s))
    ratio = (s[None, :] / s[:, None]) * (1.0 - c) ** (-(k[None, :] - k[:, None]).astype(float))
    upper = np.triu(ratio, 1)
    return float(max(1.0, upper.max()))


# ============================================================================
# Representative points
# ============================================================================

def representative_points(leaves, E, root=None):
    """
    For each leaf, a point of its half-dilate far from E

    Candidates form a 9 x 9 grid on Q/2; the distance to E is capped at the
    side of the leaf and ties go to the candidate nearest the centre.
    """
    pts = points_array(E)
    tree = cKDTree(pts) if len(pts) else None
    offsets = np.linspace(-0.25, 0.25, REPRESENTATIVE_GRID)
    gx, gy = np.meshgrid(offsets, offsets, indexing='xy')
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    centrality = np.hypot(grid[:, 0], grid[:, 1])
    reps = []
    for k, Q in enumerate(leaves):
        cand = Q.center.as_array() + Q.side * grid
        dist = tree.query(cand)[0] if tree is not None else np.full(len(cand), np.inf)
        score = np.minimum(dist, Q.side)
        best = np.lexsort((centrality, -score))[0]
        if dist[best] < Q.side / 5:
            raise ConfigError(f'leaf {k} (side {Q.side:.3g}) has no representative at distance >= side/5 '
                              f'from E (best {dist[best]:.3g}); use a smaller c1')
        reps.append(Point2(float(cand[best, 0]), float(cand[best, 1])))
    if root is not None and reps:
        inner = dilate(root, 0.99)
        if not np.all(inner.contains(points_array(reps))):
            raise InternalError('a representative point lies outside 0.99 of the root square')
    return reps


def delta_pairs(leaves, adjacency, mu_of_nu):
    """
    Delta_(mu, mu') = least side of a leaf in the fibre of mu that meets a
    leaf of the fibre of mu'; pairs without such a witness are absent
    """
    pairs = {}
    for nu, Q in enumerate(leaves):
        for other in (nu,) + tuple(adjacency[nu]):
            key = (mu_of_nu[nu], mu_of_nu[other])
            if key not in pairs or Q.side < pairs[key]:
                pairs[key] = Q.side
    return pairs


# ============================================================================
# Driver
# ============================================================================

def build_decomposition(E, p=None, c1=None, angles=None, angle_tolerance=None):
    """
    Full CZ decomposition of the plane relative to E

    Args:
        E: distinct points
        p: exponent
        c1: OK-square threshold
        angles: direction count of the set seminorm search
        angle_tolerance: refinement resolution of that search

    Returns:
        CZDecomposition
    """
    p = config.P if p is None else p
    c1 = config.C1 if c1 is None else c1
    pts = points_array(E)
    root = choose_root(pts)
    cutter = _Cutter(root, pts, p, c1, angles, angle_tolerance)
    leaves = cutter.cut(root)
    leaves, adjacency, splits = _balance(leaves, cutter)
    index = LeafIndex(leaves, adjacency)

    keystones = find_keystones(leaves, adjacency)
    keystone_set = set(keystones)
    mu_lookup = {k: mu for mu, k in enumerate(keystones)}
    paths = [keystone_path(nu, index, keystone_set) for nu in range(len(leaves))]
    mu_of_nu = [mu_lookup[path[-1]] for path in paths]

    x_nu = representative_points(leaves, pts, root)
    E_nu = [np.flatnonzero(dilate(Q, 1.1).contains(pts)) if len(pts) else np.zeros(0, dtype=int)
            for Q in leaves]
    E_sharp = [np.flatnonzero(dilate(leaves[k], 9.0).contains(pts)) if len(pts) else np.zeros(0, dtype=int)
               for k in keystones]

    decomp = CZDecomposition(
        root=root,
        points=pts,
        leaves=leaves,
        adjacency=adjacency,
        E_nu=E_nu,
        x_nu=x_nu,
        keystones=keystones,
        mu_of_nu=mu_of_nu,
        paths=paths,
        x_sharp=[x_nu[k] for k in keystones],
        E_sharp_mu=E_sharp,
        delta_pairs=delta_pairs(leaves, adjacency, mu_of_nu),
        refined=cutter.refined,
        balance_splits=splits,
        p=p,
        c1=c1,
    )
    logger.info('decomposition: %d leaves, %d keystones, %d balance splits',
                len(leaves), len(keystones), splits)
    return decomp


# ============================================================================
# Geometry report
# ============================================================================

def _overlap_depth(lo, hi, groups):
    """Largest number of closed boxes sharing a point, searched within groups"""
    best = 0
    for group in groups:
        g = np.asarray(group)
        cand = np.array([(lo[a, 0], lo[b, 1]) for a in g for b in g])
        inside = ((lo[None, g, :] <= cand[:, None, :]) & (cand[:, None, :] <= hi[None, g, :])).all(axis=2)
        best = max(best, int(inside.sum(axis=1).max()))
    return best


def check_good_geometry(decomp, cfg=None):
    """
    Measured geometry of a decomposition

    Args:
        decomp: CZDecomposition
        cfg: Config supplying the keystone roughness constants c1, c2, c3

    Returns:
        dict of ratios, counts and recorded constants
    """
    leaves = decomp.leaves
    sides = decomp.sides()
    centers = np.array([Q.center.as_array() for Q in leaves])
    K = len(leaves)
    report = {'leaves': K}

    area = float(np.sum(sides ** 2))
    report['area_ratio'] = area / decomp.root.area

    ratio = 1.0
    for k, nbrs in enumerate(decomp.adjacency):
        for j in nbrs:
            ratio = max(ratio, sides[k] / sides[j])
    report['max_neighbor_ratio'] = ratio
    report['max_neighbors'] = 1 + max((len(a) for a in decomp.adjacency), default=0)

    # separation of non-touching leaves, measured in the sup norm and the Euclidean norm
    sep = np.abs(centers[:, None, :] - centers[None, :, :]) - (sides[:, None, None] + sides[None, :, None]) / 2
    linf_gap = np.max(sep, axis=2)
    eucl_gap = np.hypot(np.maximum(sep[..., 0], 0.0), np.maximum(sep[..., 1], 0.0))
    touching = np.eye(K, dtype=bool)
    for k, nbrs in enumerate(decomp.adjacency):
        touching[k, list(nbrs)] = True
    apart = ~touching
    larger = np.maximum(sides[:, None], sides[None, :])
    summed = sides[:, None] + sides[None, :]
    if np.any(apart):
        report['min_dilate_clearance'] = float(np.min((linf_gap - 0.15 * summed)[apart] / larger[apart]))
        report['min_gap_ratio'] = float(np.min(eucl_gap[apart] / larger[apart]))
    else:
        report['min_dilate_clearance'] = math.inf
        report['min_gap_ratio'] = math.inf
    report['dilates_disjoint'] = report['min_dilate_clearance'] > 0
    report['gap_ok'] = report['min_gap_ratio'] >= 0.1

    lo13 = centers - 0.65 * sides[:, None]
    hi13 = centers + 0.65 * sides[:, None]
    report['max_dilate_overlap'] = _overlap_depth(lo13, hi13, [decomp.neighbors(k) for k in range(K)])

    ks = decomp.keystones
    if ks:
        kc, kside = centers[ks], sides[ks]
        sep_k = np.max(np.abs(kc[:, None, :] - kc[None, :, :]) - 5.0 * (kside[:, None, None] + kside[None, :, None]), axis=2)
        report['keystone_overlap'] = int(np.max(np.sum(sep_k <= 0, axis=1)))
    if ks and not decomp.trivial:
        cfg = config.Config() if cfg is None else cfg
        rough = RoughnessConfig.keystone(cfg)
        report['rough_keystones'] = sum(
            satisfies_R(dilate(leaves[k], 9.0), decomp.points, rough, decomp.p, cfg.angle_count, cfg.angle_tolerance)
            for k in ks)

    report['path_decay_constant'] = max(path_decay_constant(path, sides) for path in decomp.paths)
    report['longest_path'] = max(len(path) for path in decomp.paths)

    index = LeafIndex(leaves, decomp.adjacency)
    dist_ratio = size_ratio = 0.0
    for nu, mu in enumerate(decomp.mu_of_nu):
        k = ks[mu]
        dist_ratio = max(dist_ratio, index.distance(nu, k) / sides[nu])
        size_ratio = max(size_ratio, sides[k] / sides[nu])
    report['keystone_distance_ratio'] = dist_ratio
    report['keystone_size_ratio'] = size_ratio

    p = decomp.p
    for name, eps in (('fibre_sum_p_minus_2', p - 2.0), ('fibre_sum_2p_minus_2', 2.0 * p - 2.0)):
        worst = 0.0
        for mu, k in enumerate(ks):
            fibre = [nu for nu, m in enumerate(decomp.mu_of_nu) if m == mu]
            worst = max(worst, float(np.sum(sides[fibre] ** -eps) / sides[k] ** -eps))
        report[name] = worst

    report['min_representative_ratio'] = _representative_ratio(decomp)
    return report


def _representative_ratio(decomp):
    if len(decomp.points) == 0:
        return math.inf
    tree = cKDTree(decomp.points)
    dist = tree.query(points_array(decomp.x_nu))[0]
    return float(np.min(dist / decomp.sides()))


def keystone_gradient_sum(decomp, F, p=None):
    """sum_nu |grad F(x_nu) - grad F(x#_mu(nu))|^p delta_nu^(2 - p)"""
    p = decomp.p if p is None else p
    g = F.gradient(points_array(decomp.x_nu))
    gs = F.gradient(points_array(decomp.x_sharp))
    diff = g - gs[np.asarray(decomp.mu_of_nu)]
    return float(np.sum(np.hypot(diff[:, 0], diff[:, 1]) ** p * decomp.sides() ** (2.0 - p)))
