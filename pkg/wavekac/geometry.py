"""
Computational geometry on realized wave fields: the nodal set
by marching squares (n=2) or marching cubes (n=3), critical
points by a gradient sign scan followed by Newton refinement,
and the normalized local statistics

    Z_r(psi) = (1/vol B_r) int_{Z cap B_r} psi dH^{n-1}
    C_r(psi) = (1/vol B_r) sum_{crit u in B_r} psi(u)

for bounded weights psi of the location and jet.
"""
import csv
import itertools
import logging
import math

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from skimage import measure

from .ensembles import (
    EnsembleError, grid_gradients, grid_values, rescale_at, sample_rwm,
    sample_sphere, sample_torus,
)
from .kernel import ball_volume
from .util import WaveKacError, mean_and_se

logger = logging.getLogger(__name__)

# Relative size of the perturbation applied to exact zeros on the grid
NUDGE = 1e-14

# |det Hess| below this flags a critical point as degenerate
DEGENERATE_DET = 1e-10

# Largest grid spacing accepted by critical_points
MAX_CRIT_H = 0.25

# Largest number of refinement levels tried by critical_points
MAX_REFINE = 3


class GridError(WaveKacError):
    "Raised for grids too coarse for the requested region"
    pass


###
# Weights
###

def evaluate_weights(weight, field, locations, center, jets=None):
    """
    Evaluates a test function at the given locations. `weight` is
    None (constant 1), an object with a batched `weights(locations,
    jets, center)` method such as a JetFilter, or any callable
    weight(location, jet) with jet = (value, gradient, hessian).
    """
    if weight is None or len(locations) == 0:
        return np.ones(len(locations))
    if jets is None:
        jets = field.jet(locations)
    if hasattr(weight, "weights"):
        out = np.asarray(weight.weights(locations, jets, center), dtype=float)
    else:
        vals, grads, hess = jets
        out = np.array([float(weight(locations[i], (vals[i], grads[i], hess[i])))
                        for i in range(len(locations))])
    if not np.all(np.isfinite(out)):
        raise GridError("Weight returned a non-finite value")
    return out


###
# Grids
###

def ball_axes(center, r, h):
    "Grid axes covering B_r(center) with spacing h, centered on the center"
    N = int(math.ceil(r / h)) + 1
    offsets = h * np.arange(-N, N + 1)
    return [c + offsets for c in center]


def box_axes(n, h):
    "Grid axes of the unit cube with the spacing rounded down to 1/N"
    N = int(math.ceil(1.0 / h))
    return [np.linspace(0.0, 1.0, N + 1) for _ in range(n)], 1.0 / N


def _cell_centers(axes):
    return [0.5 * (ax[:-1] + ax[1:]) for ax in axes]


def _cell_distance(axes, center):
    "Distance of every cell center to `center`, shape of the cell grid"
    mids = _cell_centers(axes)
    grids = np.meshgrid(*[m - c for m, c in zip(mids, center)], indexing="ij")
    return np.sqrt(sum(g * g for g in grids))


def _nudge_zeros(V):
    "Moves exact zeros off the level set; returns the count moved"
    zero = V == 0
    count = int(zero.sum())
    if count:
        amp = ndimage.maximum_filter(np.abs(V), size=3)
        amp[amp == 0] = 1.0
        V[zero] = NUDGE * amp[zero]
        logger.debug("Nudged %d zero grid values", count)
    return count


###
# Nodal sets
###

class NodalResult(object):
    """
    The nodal set of a field restricted to a region: segments
    (n=2) or triangles (n=3), their measures, midpoints and weights.
    The region is a ball (center, r) or the unit cube (r is None).
    """
    def __init__(self, n, center, r, h, elements, measures, midpoints,
                 weights, cell_dist, nudged=0):
        self.n = n
        self.center = np.asarray(center, dtype=float)
        self.r = r
        self.h = h
        self.elements = elements
        self.measures = measures
        self.midpoints = midpoints
        self.weights = weights
        self.cell_dist = cell_dist
        self.nudged = nudged

    def __repr__(self):
        return "NodalResult(n=%d, r=%s, h=%g, elements=%d, measure=%g)" % (
            self.n, self.r, self.h, len(self.measures), self.total_measure)

    @property
    def volume(self):
        if self.r is None:
            return 1.0
        return ball_volume(self.n, self.r)

    @property
    def total_measure(self):
        return float(self.measures.sum())

    @property
    def weighted_total(self):
        return float(np.dot(self.measures, self.weights))

    @property
    def statistic(self):
        "Z_r(psi) = weighted_total / vol(B_r)"
        return self.weighted_total / self.volume

    def restrict(self, r):
        "The same nodal set restricted to cells centered in B_r, r <= self.r"
        if self.r is None or r > self.r:
            raise GridError("Can only restrict a ball result to a smaller radius")
        if r / self.h < 10:
            raise GridError("Grid spacing %g is too coarse for radius %g" % (self.h, r))
        keep = self.cell_dist <= r
        return NodalResult(self.n, self.center, r, self.h, self.elements[keep],
                           self.measures[keep], self.midpoints[keep],
                           self.weights[keep], self.cell_dist[keep], self.nudged)


def _edge_cross(va, vb, pa, pb, mask):
    denom = np.where(mask, va - vb, 1.0)
    t = np.where(mask, va / denom, np.nan)
    return pa + t[:, None] * (pb - pa)


def marching_squares(field, axes, V):
    """
    Zero level segments of the grid values V over the tensor grid
    `axes`. Saddle cells are resolved by the field value at the
    cell center. Returns (segments (K, 2, 2), cell indices (K, 2)).
    """
    x, y = axes
    s = V > 0
    e0 = s[:-1, :-1] != s[1:, :-1]
    e1 = s[1:, :-1] != s[1:, 1:]
    e2 = s[1:, 1:] != s[:-1, 1:]
    e3 = s[:-1, 1:] != s[:-1, :-1]
    I, J = np.nonzero(e0 | e1 | e2 | e3)
    if not len(I):
        return np.zeros((0, 2, 2)), np.zeros((0, 2), dtype=int)

    v00, v10, v11, v01 = V[I, J], V[I + 1, J], V[I + 1, J + 1], V[I, J + 1]
    p00 = np.stack([x[I], y[J]], axis=1)
    p10 = np.stack([x[I + 1], y[J]], axis=1)
    p11 = np.stack([x[I + 1], y[J + 1]], axis=1)
    p01 = np.stack([x[I], y[J + 1]], axis=1)
    mask = np.stack([e0[I, J], e1[I, J], e2[I, J], e3[I, J]], axis=1)
    P = np.stack([
        _edge_cross(v00, v10, p00, p10, mask[:, 0]),
        _edge_cross(v10, v11, p10, p11, mask[:, 1]),
        _edge_cross(v11, v01, p11, p01, mask[:, 2]),
        _edge_cross(v01, v00, p01, p00, mask[:, 3]),
    ], axis=1)

    count = mask.sum(axis=1)
    segs, cells = [], []

    two = np.flatnonzero(count == 2)
    if len(two):
        order = np.argsort(~mask[two], axis=1, kind="stable")
        segs.append(np.stack([P[two, order[:, 0]], P[two, order[:, 1]]], axis=1))
        cells.append(np.stack([I[two], J[two]], axis=1))

    four = np.flatnonzero(count == 4)
    if len(four):
        centers = 0.5 * (p00[four] + p11[four])
        sc = field.values(centers) > 0
        # each corner is cut off by the segment joining its two edges
        corners = [(s[I[four], J[four]], 0, 3), (s[I[four] + 1, J[four]], 0, 1),
                   (s[I[four] + 1, J[four] + 1], 1, 2), (s[I[four], J[four] + 1], 2, 3)]
        for sign, ea, eb in corners:
            sel = four[sign != sc]
            if len(sel):
                segs.append(np.stack([P[sel, ea], P[sel, eb]], axis=1))
                cells.append(np.stack([I[sel], J[sel]], axis=1))
        logger.debug("Resolved %d saddle cells", len(four))

    order = np.lexsort(np.concatenate(cells).T[::-1])
    return np.concatenate(segs)[order], np.concatenate(cells)[order]


def marching_cubes(axes, V):
    """
    Zero isosurface triangles of the 3-d grid values V. Returns
    (triangles (K, 3, 3), cell indices (K, 3)).
    """
    if V.min() > 0 or V.max() < 0:
        return np.zeros((0, 3, 3)), np.zeros((0, 3), dtype=int)
    spacing = tuple(float(ax[1] - ax[0]) for ax in axes)
    origin = np.array([ax[0] for ax in axes])
    verts, faces, _, _ = measure.marching_cubes(V, level=0.0, spacing=spacing,
                                                allow_degenerate=False)
    tri = verts[faces] + origin
    cent = tri.mean(axis=1)
    shape = np.array(V.shape) - 1
    cells = np.clip(np.floor((cent - origin) / np.array(spacing)).astype(int), 0, shape - 1)
    return tri, cells


def _nodal_from_grid(field, axes, V, center, r, h, weight):
    n = len(axes)
    nudged = _nudge_zeros(V)
    if n == 2:
        elements, cells = marching_squares(field, axes, V)
        measures = np.linalg.norm(elements[:, 1] - elements[:, 0], axis=1)
    elif n == 3:
        elements, cells = marching_cubes(axes, V)
        measures = 0.5 * np.linalg.norm(
            np.cross(elements[:, 1] - elements[:, 0], elements[:, 2] - elements[:, 0]), axis=1)
    else:
        raise GridError("Nodal sets are supported for n in {2, 3}")
    midpoints = elements.mean(axis=1)

    mids = _cell_centers(axes)
    cell_pos = np.stack([mids[d][cells[:, d]] for d in range(n)], axis=1) if len(cells) else \
        np.zeros((0, n))
    cell_dist = np.linalg.norm(cell_pos - center, axis=1)
    if r is not None:
        keep = cell_dist <= r
        elements, measures, midpoints, cell_dist = \
            elements[keep], measures[keep], midpoints[keep], cell_dist[keep]
    weights = evaluate_weights(weight, field, midpoints, center)
    return NodalResult(n, center, r, h, elements, measures, midpoints, weights, cell_dist, nudged)


def nodal_measure(f, center, r, h, weight=None):
    """
    The nodal set of f over the cells whose centers lie in B_r(center),
    with Z_r(psi) available as `.statistic`.
    """
    center = np.asarray(center, dtype=float)
    if h <= 0 or h > r / 10.0:
        raise GridError("Grid spacing %g is too coarse for radius %g (need h <= r/10)" % (h, r))
    axes = ball_axes(center, r, h)
    V = np.array(grid_values(f, axes), dtype=float)
    return _nodal_from_grid(f, axes, V, center, r, h, weight)


def nodal_measure_box(f, h, weight=None):
    "The nodal set of a torus field over its fundamental domain [0, 1)^n"
    axes, h = box_axes(f.n, h)
    V = np.array(grid_values(f, axes), dtype=float)
    return _nodal_from_grid(f, axes, V, np.zeros(f.n), None, h, weight)


###
# Critical points
###

class CritResult(object):
    """
    Critical points of a field in a region, each with its value,
    gradient norm at acceptance, Hessian index q (number of negative
    eigenvalues), degeneracy flag and weight. Degenerate points are
    kept in the table but excluded from counts and statistics.
    """
    def __init__(self, n, center, r, h, points, values, grad_norms, q, degenerate,
                 weights, dist, dropped=0, candidates=0, refinements=0):
        self.n = n
        self.center = np.asarray(center, dtype=float)
        self.r = r
        self.h = h
        self.points = points
        self.values = values
        self.grad_norms = grad_norms
        self.q = q
        self.degenerate = degenerate
        self.weights = weights
        self.dist = dist
        self.dropped = dropped
        self.candidates = candidates
        self.refinements = refinements

    def __repr__(self):
        return "CritResult(n=%d, r=%s, h=%g, count=%d, degenerate=%d)" % (
            self.n, self.r, self.h, self.count, self.degenerate_count)

    @property
    def volume(self):
        if self.r is None:
            return 1.0
        return ball_volume(self.n, self.r)

    @property
    def count(self):
        return int((~self.degenerate).sum())

    @property
    def degenerate_count(self):
        return int(self.degenerate.sum())

    def counts(self):
        "Number of non-degenerate critical points by Hessian index"
        ok = ~self.degenerate
        return dict((q, int(np.sum(self.q[ok] == q))) for q in range(self.n + 1))

    @property
    def weighted_total(self):
        return float(self.weights[~self.degenerate].sum())

    @property
    def statistic(self):
        "C_r(psi) = weighted count / vol(B_r)"
        return self.weighted_total / self.volume

    def restrict(self, r):
        if self.r is None or r > self.r:
            raise GridError("Can only restrict a ball result to a smaller radius")
        keep = self.dist < r
        return CritResult(self.n, self.center, r, self.h, self.points[keep], self.values[keep],
                          self.grad_norms[keep], self.q[keep], self.degenerate[keep],
                          self.weights[keep], self.dist[keep], self.dropped,
                          self.candidates, self.refinements)

    def same_counts(self, other):
        return self.count == other.count and self.counts() == other.counts()


def _candidate_cells(G):
    "Cells where each gradient component has min <= 0 <= max over the corners"
    n = G.shape[-1]
    shape = tuple(s - 1 for s in G.shape[:-1])
    lo = np.full(shape + (n,), np.inf)
    hi = np.full(shape + (n,), -np.inf)
    for offset in itertools.product((0, 1), repeat=n):
        corner = G[tuple(slice(o, o + s) for o, s in zip(offset, shape))]
        lo = np.minimum(lo, corner)
        hi = np.maximum(hi, corner)
    return np.all((lo <= 0) & (hi >= 0), axis=-1)


def newton_refine(field, starts, h, tol, max_iter):
    """
    Batched Newton iteration on the gradient from the given cell
    centers. A candidate is dropped when it leaves the 3x3 cell
    neighborhood or fails to converge. Returns (points, converged mask).
    """
    X = np.array(starts, dtype=float)
    home = X.copy()
    active = np.ones(len(X), dtype=bool)
    converged = np.zeros(len(X), dtype=bool)
    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        _, g, H = field.jet(X[idx])
        done = np.linalg.norm(g, axis=1) < tol
        converged[idx[done]] = True
        active[idx[done]] = False
        if it == max_iter:
            break
        go = ~done
        step = np.einsum("kij,kj->ki", np.linalg.pinv(H[go]), g[go])
        moving = idx[go]
        X[moving] -= step
        away = np.max(np.abs(X[moving] - home[moving]), axis=1) > 1.5 * h
        active[moving[away]] = False
    return X, converged


def _dedup(points, radius, boxsize=None):
    "Indices of points kept after greedy removal of near duplicates"
    if len(points) < 2:
        return np.arange(len(points))
    tree = cKDTree(points, boxsize=boxsize)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    dropped = np.zeros(len(points), dtype=bool)
    for i, j in sorted(map(tuple, pairs)):
        if not dropped[i]:
            dropped[j] = True
    return np.flatnonzero(~dropped)


def _classify(hess):
    eig = np.linalg.eigvalsh(hess)
    q = np.sum(eig < 0, axis=1)
    degenerate = np.abs(np.prod(eig, axis=1)) < DEGENERATE_DET
    return q, degenerate


def _crits_from_grid(field, axes, h, center, r, newton_tol, max_iter, weight, periodic=False):
    n = len(axes)
    G = np.array(grid_gradients(field, axes), dtype=float)
    cand = _candidate_cells(G)
    if r is not None:
        # keep a margin of one cell so boundary points are still found
        cand &= _cell_distance(axes, center) <= r + h
    idx = np.argwhere(cand)
    mids = _cell_centers(axes)
    starts = np.stack([mids[d][idx[:, d]] for d in range(n)], axis=1) if len(idx) else \
        np.zeros((0, n))

    X, ok = newton_refine(field, starts, h, newton_tol, max_iter)
    dropped = int((~ok).sum())
    if dropped:
        logger.debug("Dropped %d of %d Newton candidates", dropped, len(starts))
    X = X[ok]
    if periodic:
        X = np.mod(X, 1.0)
        X[X >= 1.0] = 0.0
        keep = _dedup(X, h / 2.0, boxsize=1.0)
    else:
        keep = _dedup(X, h / 2.0)
    X = X[keep]

    dist = np.linalg.norm(X - center, axis=1)
    if r is not None:
        inside = dist < r
        X, dist = X[inside], dist[inside]
    jets = field.jet(X) if len(X) else (np.zeros(0), np.zeros((0, n)), np.zeros((0, n, n)))
    vals, grads, hess = jets
    q, degenerate = _classify(hess) if len(X) else (np.zeros(0, dtype=int), np.zeros(0, dtype=bool))
    weights = evaluate_weights(weight, field, X, center, jets)
    return CritResult(n, center, r, h, X, vals, np.linalg.norm(grads, axis=1), q, degenerate,
                      weights, dist, dropped=dropped, candidates=len(starts))


def _check_crit_args(h, newton_tol):
    if h <= 0 or h > MAX_CRIT_H:
        raise GridError("Grid spacing %g must lie in (0, %g]" % (h, MAX_CRIT_H))
    if newton_tol > 1e-8:
        raise GridError("Newton tolerance %g must be <= 1e-8" % newton_tol)


def critical_points(f, center, r, h, newton_tol=1e-9, max_iter=30, weight=None, refine=False):
    """
    Critical points of f in B_r(center). With refine=True the scan
    is repeated at h/2 and halved again while the counts by index
    disagree, up to MAX_REFINE levels; the finest agreeing result
    is returned.
    """
    center = np.asarray(center, dtype=float)
    _check_crit_args(h, newton_tol)

    def scan(step):
        return _crits_from_grid(f, ball_axes(center, r, step), step, center, r,
                                newton_tol, max_iter, weight)

    result = scan(h)
    if not refine:
        return result
    for level in range(1, MAX_REFINE + 1):
        finer = scan(h / 2.0 ** level)
        finer.refinements = level
        if finer.same_counts(result):
            return finer
        logger.info("Critical counts changed at h=%g, refining", finer.h)
        result = finer
    return result


def critical_points_box(f, h, newton_tol=1e-9, max_iter=30, weight=None):
    "Critical points of a torus field over its fundamental domain [0, 1)^n"
    axes, h = box_axes(f.n, h)
    if newton_tol > 1e-8:
        raise GridError("Newton tolerance %g must be <= 1e-8" % newton_tol)
    return _crits_from_grid(f, axes, h, np.zeros(f.n), None, newton_tol, max_iter, weight,
                            periodic=True)


###
# Local statistic suite
###

def sample_local_field(kind, param, rng, x=None, n=2, direction_mode="iid-uniform"):
    """
    Draws one field of the ensemble and returns it in rescaled
    coordinates centered at the origin: the plane wave itself, or
    the torus/sphere wave pulled back by u -> exp_x(u / lambda).
    """
    if kind == "plane":
        return sample_rwm(n, int(param), direction_mode, rng)
    elif kind == "torus":
        f = sample_torus(param, rng, n)
        center = np.zeros(n) if x is None else x
        return rescale_at(f, center, param)
    elif kind == "sphere":
        f = sample_sphere(int(param), rng)
        center = np.array([0.0, 0.0, 1.0]) if x is None else x
        return rescale_at(f, center, math.sqrt(param * (param + 1.0)))
    raise EnsembleError("Unknown ensemble kind %r" % (kind,))


STATISTICS = ("zeros", "crits")


def _filter_table(filters, field, locations, center):
    n = field.n
    if len(locations):
        jets = field.jet(locations)
    else:
        jets = (np.zeros(0), np.zeros((0, n)), np.zeros((0, n, n)))
    return filters.weight_table(locations, jets, center)


def replica_statistics(field, r_schedule, h=0.02, crit_h=0.15, statistics=STATISTICS,
                       weight=None, newton_tol=1e-9, filters=None):
    """
    Z_r(psi) and C_r(psi) of one field for every r of the schedule,
    computed once at the largest radius and restricted. Returns a
    dict of arrays indexed like r_schedule; crit counts by index are
    given per unit volume.

    `filters` is an optional FilterSet; each of its filters is then
    evaluated as a further test function on the same nodal set and
    critical points, under "filtered_zeros" and "filtered_crits".
    """
    r_schedule = [float(r) for r in r_schedule]
    if sorted(r_schedule) != r_schedule:
        raise GridError("Radius schedule must be increasing")
    n = field.n
    center = np.zeros(n)
    rmax = r_schedule[-1]
    out = {}
    if "zeros" in statistics:
        nodal = nodal_measure(field, center, rmax, h, weight)
        parts = [nodal.restrict(r) if r < rmax else nodal for r in r_schedule]
        out["zeros"] = np.array([p.statistic for p in parts])
        out["lengths"] = np.array([p.total_measure for p in parts])
        if filters:
            table = _filter_table(filters, field, nodal.midpoints, center)
            out["filtered_zeros"] = dict(
                (text, np.array([np.dot(nodal.measures, w * (nodal.cell_dist <= r)) / ball_volume(n, r)
                                 for r in r_schedule]))
                for text, w in table.items())
    if "crits" in statistics:
        crits = critical_points(field, center, rmax, crit_h, newton_tol, weight=weight)
        parts = [crits.restrict(r) if r < rmax else crits for r in r_schedule]
        out["crits"] = np.array([p.statistic for p in parts])
        out["crits_by_index"] = np.array(
            [[p.counts()[q] / p.volume for q in range(n + 1)] for p in parts])
        out["crit_counts"] = np.array([p.count for p in parts])
        if filters:
            table = _filter_table(filters, field, crits.points, center)
            ok = ~crits.degenerate
            out["filtered_crits"] = dict(
                (text, np.array([np.sum(w * ok * (crits.dist < r)) / ball_volume(n, r)
                                 for r in r_schedule]))
                for text, w in table.items())
    return out


class LocalSuiteResult(object):
    "Per-replica local statistics and their per-radius summaries"
    def __init__(self, r_schedule, replicas):
        self.r_schedule = list(r_schedule)
        self.replicas = replicas

    def values(self, name):
        "(replicas, len(r_schedule)) array of one statistic"
        return np.array([rep[name] for rep in self.replicas])

    def summary(self, name):
        "One dict per radius with mean, var and se of the statistic"
        table = self.values(name)
        rows = []
        for i, r in enumerate(self.r_schedule):
            mean, var, se = mean_and_se(table[:, i])
            rows.append({"r": r, "mean": mean, "var": var, "se": se})
        return rows


def local_statistic_suite(kind, param, x=None, r_schedule=(10.0, 40.0), replicas=200, rng=None,
                          h=0.02, crit_h=0.15, statistics=STATISTICS, weight=None,
                          n=2, direction_mode="iid-uniform", filters=None):
    """
    Runs replica_statistics over independent fields of one ensemble.
    `param` is M for the plane wave model, lambda for the torus and
    the degree l for the sphere.
    """
    if rng is None:
        rng = np.random.default_rng()
    if replicas < 50:
        logger.warning("Only %d replicas; variance estimates will be rough", replicas)
    rows = []
    for i in range(replicas):
        field = sample_local_field(kind, param, rng, x, n, direction_mode)
        rows.append(replica_statistics(field, r_schedule, h, crit_h, statistics, weight,
                                       filters=filters))
    return LocalSuiteResult(r_schedule, rows)


###
# Export
###

def write_nodal_csv(result, path):
    "Writes one row per nodal element: vertex coordinates and measure"
    n = result.n
    coords = ["x", "y", "z"][:n]
    per = 2 if n == 2 else 3
    header = ["%s%d" % (c, k) for k in range(per) for c in coords] + ["measure", "weight"]
    with open(path, "w") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for el, m, w in zip(result.elements, result.measures, result.weights):
            writer.writerow([repr(float(v)) for v in el.ravel()] + [repr(float(m)), repr(float(w))])


def write_crit_csv(result, path):
    "Writes one row per critical point: x, y[, z], value, q, grad_norm, degenerate"
    coords = ["x", "y", "z"][:result.n]
    with open(path, "w") as fh:
        writer = csv.writer(fh)
        writer.writerow(coords + ["value", "q", "grad_norm", "degenerate"])
        for i in range(len(result.points)):
            writer.writerow([repr(float(v)) for v in result.points[i]] +
                            [repr(float(result.values[i])), int(result.q[i]),
                             repr(float(result.grad_norms[i])), int(result.degenerate[i])])
