"""
Samplers for the wave ensembles and their exact covariance
kernels:

 * frequency 1 random waves on R^n as finite plane wave sums
 * monochromatic waves on the flat torus R^n / Z^n with
   frequencies 2 pi |k| in the window [lambda, lambda + 1]
 * degree l spherical harmonics on the round sphere S^2

together with the rescaled pullback u -> f(exp_x(u / lambda)) and
the two covariance diagnostics: convergence of rescaled kernels
to the Bessel kernel, and short-range correlations.

Every field exposes the same evaluation interface:
values(points), jet(points) -> (values, gradients, hessians) and
grid_values(axes) for tensor grids.
"""
import logging
import math

import numpy as np
from scipy import special

from .kernel import IsotropicKernel, kernel_derivative, normalized_bessel
from .util import WaveKacError, multi_index_to_list, set_partitions

logger = logging.getLogger(__name__)

DIRECTION_MODES = ("iid-uniform", "equispaced")
KINDS = ("plane", "torus", "sphere")

# Default number of directions of the plane wave model
DEFAULT_M = 256

# Maximum number of (point, frequency) pairs evaluated at once
CHUNK = 1 << 22

# Margin kept between a lattice frequency and the edge of an adjusted window
EDGE = 1e-9


class EnsembleError(WaveKacError):
    "Raised for invalid ensemble parameters"
    pass


class EmptyAnnulusError(EnsembleError):
    "Raised when the spectral window contains no lattice point"
    def __init__(self, msg, nearest):
        EnsembleError.__init__(self, msg)
        self.nearest = nearest

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.nearest))


class ChartError(EnsembleError):
    "Raised when a point leaves the domain of a chart"
    pass


###
# Trigonometric fields: plane waves and torus waves
###

def _cos_derivative(theta, m):
    "m-th derivative of cos evaluated at theta"
    m = m % 4
    if m == 0:
        return np.cos(theta)
    elif m == 1:
        return -np.sin(theta)
    elif m == 2:
        return -np.cos(theta)
    return np.sin(theta)


class TrigKernel(object):
    """
    Stationary kernel K(x, y) = sum_j weights_j cos<x - y, nu_j>.
    Covers both the plane wave model (nu_j = omega_j, weights 1/M)
    and the torus projector (nu_j = 2 pi k, weights 1/dim).
    """
    def __init__(self, frequencies, weights):
        self.frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))
        self.weights = np.broadcast_to(np.asarray(weights, dtype=float),
                                       (len(self.frequencies),)).copy()
        self.n = self.frequencies.shape[1]

    def stationary_derivative(self, gamma, d):
        "d^gamma of d -> K(d) at displacements d of shape (N, n) or (n,)"
        d = np.asarray(d, dtype=float)
        scalar = d.ndim == 1
        d = np.atleast_2d(d)
        gamma = tuple(int(g) for g in gamma)
        coeff = self.weights * np.prod(self.frequencies ** np.array(gamma), axis=1)
        out = np.empty(len(d))
        step = max(1, CHUNK // max(1, len(self.frequencies)))
        for start in range(0, len(d), step):
            theta = d[start:start + step].dot(self.frequencies.T)
            out[start:start + step] = _cos_derivative(theta, sum(gamma)).dot(coeff)
        if scalar:
            return float(out[0])
        return out

    def value(self, x, y):
        n = self.n
        w = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return self.stationary_derivative((0,) * n, w)

    def derivative(self, a, b, x, y):
        "Mixed partial d_x^a d_y^b K(x, y)"
        gamma = tuple(int(p) + int(q) for p, q in zip(a, b))
        w = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return (-1) ** sum(b) * self.stationary_derivative(gamma, w)


class TrigField(object):
    """
    Real field scale * sum_j a_j cos<x, nu_j> + b_j sin<x, nu_j>
    with analytic jets and separable evaluation on tensor grids.
    """
    kind = "trig"

    def __init__(self, frequencies, cos_coeffs, sin_coeffs, scale):
        self.frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))
        self.a = np.asarray(cos_coeffs, dtype=float)
        self.b = np.asarray(sin_coeffs, dtype=float)
        self.scale = float(scale)
        self.n = self.frequencies.shape[1]
        if self.a.shape != (len(self.frequencies),) or self.b.shape != self.a.shape:
            raise EnsembleError("Need one (a, b) pair per frequency")

    def kernel(self):
        "The covariance kernel of the law this field was drawn from"
        return TrigKernel(self.frequencies, self.scale ** 2)

    def scaled(self, c):
        "The same field with every coefficient multiplied by c"
        out = TrigField(self.frequencies, self.a * c, self.b * c, self.scale)
        out.kind = self.kind
        return out

    def _points(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.n:
            raise EnsembleError("Points must have %d coordinates" % self.n)
        return pts

    def values(self, points):
        pts = self._points(points)
        out = np.empty(len(pts))
        step = max(1, CHUNK // max(1, len(self.frequencies)))
        for start in range(0, len(pts), step):
            theta = pts[start:start + step].dot(self.frequencies.T)
            out[start:start + step] = np.cos(theta).dot(self.a) + np.sin(theta).dot(self.b)
        return self.scale * out

    def jet(self, points):
        """
        Returns (values (N,), gradients (N, n), hessians (N, n, n))
        from the analytic derivatives of the trigonometric sum.
        """
        pts = self._points(points)
        N, n = pts.shape
        vals = np.empty(N)
        grads = np.empty((N, n))
        hess = np.empty((N, n, n))
        nu = self.frequencies
        outer = nu[:, :, None] * nu[:, None, :]
        step = max(1, CHUNK // max(1, len(nu)))
        for start in range(0, N, step):
            theta = pts[start:start + step].dot(nu.T)
            c, s = np.cos(theta), np.sin(theta)
            even = c * self.a + s * self.b
            odd = -s * self.a + c * self.b
            vals[start:start + step] = even.sum(axis=1)
            grads[start:start + step] = odd.dot(nu)
            hess[start:start + step] = -np.einsum("pm,mij->pij", even, outer)
        return self.scale * vals, self.scale * grads, self.scale * hess

    def laplacian(self, points):
        "Trace of the Hessian"
        _, _, hess = self.jet(points)
        return np.trace(hess, axis1=1, axis2=2)

    def _grid(self, axes, gamma):
        axes = [np.asarray(ax, dtype=float) for ax in axes]
        if len(axes) != self.n:
            raise EnsembleError("Need %d grid axes" % self.n)
        nu = self.frequencies
        coeff = self.scale * (self.a - 1j * self.b)
        for d, g in enumerate(gamma):
            coeff = coeff * (1j * nu[:, d]) ** g
        factors = [np.exp(1j * np.outer(ax, nu[:, d])) for d, ax in enumerate(axes)]
        if self.n == 2:
            return np.real(factors[0].dot(coeff[:, None] * factors[1].T))
        elif self.n == 3:
            out = np.empty(tuple(len(ax) for ax in axes))
            tail = factors[2].T
            for i in range(len(axes[0])):
                out[i] = np.real((factors[1] * (coeff * factors[0][i])).dot(tail))
            return out
        raise EnsembleError("Grid evaluation supports n in {2, 3}")

    def grid_values(self, axes):
        "Values on the tensor grid axes[0] x axes[1] (x axes[2])"
        return self._grid(axes, (0,) * self.n)

    def grid_gradients(self, axes):
        "Gradients on a tensor grid, shape grid + (n,)"
        comps = []
        for d in range(self.n):
            gamma = [0] * self.n
            gamma[d] = 1
            comps.append(self._grid(axes, gamma))
        return np.stack(comps, axis=-1)

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "scale": self.scale,
            "frequencies": self.frequencies.tolist(),
            "cos_coeffs": self.a.tolist(),
            "sin_coeffs": self.b.tolist(),
        }


class PlaneWaveField(TrigField):
    """
    Finite rank frequency 1 random wave on R^n: M unit directions
    with standard normal cos/sin amplitudes scaled by M^{-1/2}.
    """
    kind = "plane"

    def __init__(self, directions, cos_coeffs, sin_coeffs, direction_mode="iid-uniform"):
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        TrigField.__init__(self, directions, cos_coeffs, sin_coeffs, 1.0 / math.sqrt(len(directions)))
        self.M = len(directions)
        self.direction_mode = direction_mode

    @property
    def directions(self):
        return self.frequencies

    def to_dict(self):
        d = TrigField.to_dict(self)
        d["M"] = self.M
        d["direction_mode"] = self.direction_mode
        return d


def uniform_directions(n, M, rng):
    "M i.i.d. uniform unit vectors in R^n"
    g = rng.standard_normal((M, n))
    return g / np.linalg.norm(g, axis=1)[:, None]


def equispaced_directions(M, offset=0.0):
    """
    M unit vectors of R^2 at angles offset + pi j / M. Directions
    on a half circle suffice since cos<x, w> = cos<x, -w>.
    """
    angles = offset + math.pi * np.arange(M) / M
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def sample_rwm(n, M=DEFAULT_M, direction_mode="iid-uniform", rng=None):
    """
    Draws a PlaneWaveField. Conditional on its directions the
    field is centered Gaussian with covariance (1/M) sum_j cos<x-y, w_j>.
    """
    if rng is None:
        rng = np.random.default_rng()
    if M < 1:
        raise EnsembleError("Need at least one direction")
    if direction_mode not in DIRECTION_MODES:
        raise EnsembleError("Unknown direction mode %r" % (direction_mode,))
    if direction_mode == "equispaced":
        if n != 2:
            raise EnsembleError("Equispaced directions are only defined for n = 2")
        directions = equispaced_directions(M)
    else:
        directions = uniform_directions(n, M, rng)
    a = rng.standard_normal(M)
    b = rng.standard_normal(M)
    return PlaneWaveField(directions, a, b, direction_mode)


def plane_wave(directions, amplitudes=None):
    """
    Deterministic field sum_j amp_j cos<x, w_j> (without the M^{-1/2}
    scaling), handy for designed inputs.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if amplitudes is None:
        amplitudes = np.ones(len(directions))
    field = TrigField(directions, amplitudes, np.zeros(len(directions)), 1.0)
    field.kind = "plane"
    return field


###
# Flat torus R^n / Z^n
###

def _lattice_ball(kmax, n):
    "All k in Z^n with max |k_i| <= kmax"
    rng = np.arange(-kmax, kmax + 1)
    grids = np.meshgrid(*([rng] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def torus_annulus(lam, n=2):
    "All k in Z^n with 2 pi |k| in [lam, lam + 1], sorted"
    if lam <= 0:
        raise EnsembleError("Spectral parameter must be positive")
    kmax = int(math.floor((lam + 1) / (2 * math.pi))) + 1
    pts = _lattice_ball(kmax, n)
    norm = 2 * math.pi * np.linalg.norm(pts, axis=1)
    keep = (norm >= lam) & (norm <= lam + 1)
    return pts[keep]


def half_orbit(lattice):
    "One representative of each +-k pair (first nonzero coordinate positive)"
    keep = []
    for k in lattice:
        nz = np.flatnonzero(k)
        if len(nz) and k[nz[0]] > 0:
            keep.append(k)
    return np.array(keep, dtype=float).reshape(-1, lattice.shape[1])


def nearest_nonempty_lambda(lam, n=2):
    """
    The spectral parameter closest to lam whose window
    [lam, lam + 1] contains lattice frequencies.
    """
    kmax = int(math.floor((lam + 2) / (2 * math.pi))) + 2
    pts = _lattice_ball(kmax, n)
    norms = np.unique(2 * math.pi * np.linalg.norm(pts, axis=1))
    norms = norms[norms > 0]
    best, best_dist = None, float("inf")
    for f in norms:
        # window [l, l+1] contains f iff l in [f - 1, f]; stay off the edges
        low = max(f - 1.0 + EDGE, 1e-12)
        cand = min(max(lam, low), f - EDGE)
        dist = abs(cand - lam)
        if dist < best_dist:
            best, best_dist = float(cand), dist
    return best


def adjust_lambda(lam, n=2):
    "lam itself when its window is nonempty, otherwise the nearest good value"
    if len(torus_annulus(lam, n)):
        return float(lam)
    return nearest_nonempty_lambda(lam, n)


class TorusWave(TrigField):
    """
    Monochromatic random wave on R^n / Z^n with frequencies
    2 pi |k| in [lam, lam + 1]: one standard normal (a_k, b_k) pair
    per +-k orbit against the real orthonormal basis
    sqrt(2) cos(2 pi <k, x>), sqrt(2) sin(2 pi <k, x>).
    """
    kind = "torus"

    def __init__(self, lam, lattice, cos_coeffs, sin_coeffs):
        self.lam = float(lam)
        self.lattice = np.asarray(lattice)
        self.reps = half_orbit(self.lattice)
        self.dim = len(self.lattice)
        TrigField.__init__(self, 2 * math.pi * self.reps, cos_coeffs, sin_coeffs,
                           math.sqrt(2.0 / self.dim))

    def mode_eigenvalues(self):
        "Laplace eigenvalue 4 pi^2 |k|^2 of each mode"
        return (2 * math.pi) ** 2 * np.sum(self.reps ** 2, axis=1)

    def to_dict(self):
        d = TrigField.to_dict(self)
        d["lambda"] = self.lam
        d["dim"] = self.dim
        d["reps"] = self.reps.astype(int).tolist()
        return d


def _annulus_or_raise(lam, n):
    lattice = torus_annulus(lam, n)
    if not len(lattice):
        nearest = nearest_nonempty_lambda(lam, n)
        raise EmptyAnnulusError(
            "No lattice frequency in [%g, %g]; nearest usable lambda is %g" % (lam, lam + 1, nearest),
            nearest)
    return lattice


def sample_torus(lam, rng=None, n=2):
    "Draws a TorusWave of frequency window [lam, lam + 1]"
    if rng is None:
        rng = np.random.default_rng()
    lattice = _annulus_or_raise(lam, n)
    half = len(lattice) // 2
    return TorusWave(lam, lattice, rng.standard_normal(half), rng.standard_normal(half))


def torus_kernel_object(lam, n=2):
    "TrigKernel of the normalized projector Pi_lambda on the torus"
    lattice = _annulus_or_raise(lam, n)
    return TrigKernel(2 * math.pi * lattice, 1.0 / len(lattice))


def torus_kernel(lam, d, n=2):
    "Pi_lambda(x, x + d) = dim^{-1} sum_k cos(2 pi <k, d>)"
    d = np.asarray(d, dtype=float)
    return torus_kernel_object(lam, n).stationary_derivative((0,) * n, d)


###
# Round sphere S^2
###

def _legendre_table(ell, x):
    """
    Orthonormalized associated Legendre values p_l^m(x) for l = ell
    and l = ell - 1, all m in 0..ell. Returns two (ell+1, N) arrays.
    Y_l0 = p_l^0 and Y_lm = sqrt(2) p_l^m {cos, sin}(m phi) are
    orthonormal on S^2.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    top = np.zeros((ell + 1, len(x)))
    below = np.zeros((ell + 1, len(x)))
    pmm = np.full(len(x), math.sqrt(1.0 / (4 * math.pi)))
    for m in range(ell + 1):
        if m > 0:
            pmm = pmm * math.sqrt((2 * m + 1) / (2.0 * m)) * s
        if m == ell:
            top[m] = pmm
            continue
        prev2, prev = pmm, math.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, ell + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            prev2, prev = prev, a * (x * prev - b * prev2)
        top[m] = prev
        below[m] = prev2
    return top, below


def random_rotation(rng):
    "Uniform random rotation of R^3"
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class SphereKernel(object):
    "Unit normalized kernel P_l(<x, y>) of degree l harmonics on S^2"
    def __init__(self, ell):
        self.ell = int(ell)
        self.lam = math.sqrt(self.ell * (self.ell + 1))

    def legendre_derivative(self, m, x):
        "m-th derivative of P_l at x"
        x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        if m == 0:
            return special.eval_legendre(self.ell, x)
        if m > self.ell:
            return np.zeros_like(x)
        double_fact = float(np.prod(np.arange(2 * m - 1, 0, -2))) if m > 0 else 1.0
        return double_fact * special.eval_gegenbauer(self.ell - m, m + 0.5, x)

    def value(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.legendre_derivative(0, np.sum(x * y, axis=-1))

    def chart_derivative(self, a, b, U, V, center_x, center_y, lam):
        """
        d_u^a d_v^b of P_l(<exp_x(u/lam), exp_y(v/lam)>) for |a|, |b| <= 2,
        u, v in the normal charts at x and y. U, V are (N, 2) arrays.
        """
        Ex = SphereChart(center_x, lam).jets(U)
        Ey = SphereChart(center_y, lam).jets(V)
        return self.jet_derivative(a, b, Ex, Ey)

    def jet_derivative(self, a, b, Ex, Ey):
        """
        Same as chart_derivative from precomputed, row aligned chart
        jets (E, dE, d2E) of both arguments. Composite derivatives
        of P_l(s(u, v)) follow from a sum over set partitions.
        """
        a = tuple(int(p) for p in a)
        b = tuple(int(q) for q in b)
        if sum(a) > 2 or sum(b) > 2:
            raise EnsembleError("Sphere kernel derivatives support orders <= 2 per point")
        s = np.sum(Ex[0] * Ey[0], axis=-1)

        def part_of(jets, coords):
            if len(coords) == 0:
                return jets[0]
            elif len(coords) == 1:
                return jets[1][:, coords[0]]
            return jets[2][:, coords[0], coords[1]]

        items = tuple(("u", pos, i) for pos, i in enumerate(multi_index_to_list(a))) + \
            tuple(("v", pos, j) for pos, j in enumerate(multi_index_to_list(b)))
        derivs = {}
        total = np.zeros(len(s))
        for part in set_partitions(items):
            m = len(part)
            if m not in derivs:
                derivs[m] = self.legendre_derivative(m, s)
            term = derivs[m].copy()
            for block in part:
                cu = [c for side, _, c in block if side == "u"]
                cv = [c for side, _, c in block if side == "v"]
                term *= np.sum(part_of(Ex, cu) * part_of(Ey, cv), axis=-1)
            total += term
        return total


def tangent_frame(x):
    "Orthonormal basis (t1, t2) of the tangent plane of S^2 at x"
    t1, t2 = tangent_frames(np.asarray(x, dtype=float)[None, :])
    return t1[0], t2[0]


def tangent_frames(X):
    "Row-wise tangent_frame for an (N, 3) array of unit vectors"
    X = np.atleast_2d(np.asarray(X, dtype=float))
    axis = np.zeros_like(X)
    axis[np.arange(len(X)), np.argmin(np.abs(X), axis=1)] = 1.0
    t1 = axis - np.sum(axis * X, axis=1)[:, None] * X
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(X, t1)
    return t1, t2


def origin_jets(X, lam):
    "Chart jets (E, dE, d2E) of exp_x(u / lam) at u = 0 for many centers x"
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t1, t2 = tangent_frames(X)
    dE = np.stack([t1, t2], axis=1) / lam
    d2E = -np.eye(2)[None, :, :, None] * X[:, None, None, :] / lam ** 2
    return X, dE, d2E


class SphereChart(object):
    """
    Normal coordinates u -> exp_x(u / lam) at a point x of S^2,
    with first and second derivatives. Uses cos s = Lambda_{-1/2}(s)
    and sin s / s = Lambda_{1/2}(s) so the origin is not special.
    """
    def __init__(self, center, lam):
        center = np.asarray(center, dtype=float)
        self.center = center / np.linalg.norm(center)
        self.lam = float(lam)
        self.t1, self.t2 = tangent_frame(self.center)
        self.frame = np.stack([self.t1, self.t2])

    def jets(self, U):
        "Returns (E (N,3), dE (N,2,3), d2E (N,2,2,3)) with respect to u"
        U = np.atleast_2d(np.asarray(U, dtype=float))
        v = U / self.lam
        s = np.linalg.norm(v, axis=1)
        if np.any(s >= math.pi):
            raise ChartError("Chart point beyond the cut locus (|u|/lambda >= pi)")
        C = normalized_bessel(-0.5, s)
        S = normalized_bessel(0.5, s)
        L3 = normalized_bessel(1.5, s)
        L5 = normalized_bessel(2.5, s)
        C1, C2 = -S, L3 / 3.0
        S1, S2 = -L3 / 3.0, L5 / 15.0

        x = self.center
        T = v.dot(self.frame)
        E = C[:, None] * x + S[:, None] * T
        dE = (C1[:, None, None] * v[:, :, None] * x
              + S1[:, None, None] * v[:, :, None] * T[:, None, :]
              + S[:, None, None] * self.frame[None, :, :])
        eye = np.eye(2)
        vv = v[:, :, None] * v[:, None, :]
        d2E = (C2[:, None, None, None] * vv[..., None] * x
               + C1[:, None, None, None] * eye[None, :, :, None] * x
               + S2[:, None, None, None] * vv[..., None] * T[:, None, None, :]
               + S1[:, None, None, None] * (eye[None, :, :, None] * T[:, None, None, :]
                                            + v[:, :, None, None] * self.frame[None, None, :, :]
                                            + v[:, None, :, None] * self.frame[None, :, None, :]))
        return E, dE / self.lam, d2E / self.lam ** 2


class SphereWave(object):
    """
    Random degree l spherical harmonic, unit normalized so that
    its covariance is P_l(cos d(x, y)). Coefficients are ordered
    m = 0, then (cos, sin) for m = 1..l. `frame` is a rotation
    applied before evaluating the basis.
    """
    kind = "sphere"
    n = 3

    def __init__(self, ell, coeffs, frame=None):
        self.ell = int(ell)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (2 * self.ell + 1,):
            raise EnsembleError("Need 2l+1 coefficients")
        self.frame = np.eye(3) if frame is None else np.asarray(frame, dtype=float)
        self.scale = math.sqrt(4 * math.pi / (2 * self.ell + 1))
        self.c0 = self.coeffs[0]
        self.cc = np.concatenate([[0.0], self.coeffs[1::2]])
        self.cs = np.concatenate([[0.0], self.coeffs[2::2]])

    def kernel(self):
        return SphereKernel(self.ell)

    def scaled(self, c):
        return SphereWave(self.ell, self.coeffs * c, self.frame)

    def _local(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != 3:
            raise EnsembleError("Sphere points must be unit vectors in R^3")
        pts = pts / np.linalg.norm(pts, axis=1)[:, None]
        y = pts.dot(self.frame.T)
        z = np.clip(y[:, 2], -1.0, 1.0)
        phi = np.arctan2(y[:, 1], y[:, 0])
        return y, z, phi

    def _angular(self, phi):
        m = np.arange(self.ell + 1)[:, None]
        root2 = math.sqrt(2.0)
        cos_m = np.cos(m * phi)
        sin_m = np.sin(m * phi)
        T = root2 * (self.cc[:, None] * cos_m + self.cs[:, None] * sin_m)
        dT = root2 * m * (-self.cc[:, None] * sin_m + self.cs[:, None] * cos_m)
        T[0] = self.c0
        dT[0] = 0.0
        return T, dT, m

    def values(self, points):
        _, z, phi = self._local(points)
        top, _ = _legendre_table(self.ell, z)
        T, _, _ = self._angular(phi)
        return self.scale * np.sum(top * T, axis=0)

    def jet(self, points):
        """
        Returns (values, tangent gradients (N, 3), covariant Hessians
        (N, 3, 3)) in ambient coordinates.
        """
        y, z, phi = self._local(points)
        s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        if np.any(s < 1e-10):
            raise ChartError("Point on the polar axis of the sphere frame")
        ell = self.ell
        top, below = _legendre_table(ell, z)
        T, dT, m = self._angular(phi)
        c_lm = np.sqrt((2 * ell + 1.0) * (ell * ell - m * m) / max(2 * ell - 1.0, 1.0))
        p_theta = (ell * z * top - c_lm * below) / s
        cot = z / s
        p_tt = -cot * p_theta - (ell * (ell + 1) - m * m / s ** 2) * top

        F = np.sum(top * T, axis=0)
        F_t = np.sum(p_theta * T, axis=0)
        F_p = np.sum(top * dT, axis=0)
        F_tt = np.sum(p_tt * T, axis=0)
        F_tp = np.sum(p_theta * dT, axis=0)
        F_pp = -np.sum(m * m * top * T, axis=0)

        g_t = F_t
        g_p = F_p / s
        H_tt = F_tt
        H_tp = (F_tp - cot * F_p) / s
        H_pp = F_pp / s ** 2 + cot * F_t

        cp, sp = np.cos(phi), np.sin(phi)
        e_t = np.stack([z * cp, z * sp, -s], axis=1)
        e_p = np.stack([-sp, cp, np.zeros_like(sp)], axis=1)
        grad = g_t[:, None] * e_t + g_p[:, None] * e_p
        hess = (H_tt[:, None, None] * e_t[:, :, None] * e_t[:, None, :]
                + H_tp[:, None, None] * (e_t[:, :, None] * e_p[:, None, :] + e_p[:, :, None] * e_t[:, None, :])
                + H_pp[:, None, None] * e_p[:, :, None] * e_p[:, None, :])
        # back from the frame coordinates
        grad = grad.dot(self.frame)
        hess = np.einsum("ai,nab,bj->nij", self.frame, hess, self.frame)
        return self.scale * F, self.scale * grad, self.scale * hess

    def to_dict(self):
        return {
            "kind": self.kind,
            "ell": self.ell,
            "coeffs": self.coeffs.tolist(),
            "frame": self.frame.tolist(),
        }


def sample_sphere(ell, rng=None, random_frame=True):
    "Draws a SphereWave of degree ell"
    if rng is None:
        rng = np.random.default_rng()
    if ell < 1:
        raise EnsembleError("Degree must be >= 1")
    coeffs = rng.standard_normal(2 * ell + 1)
    frame = random_rotation(rng) if random_frame else None
    return SphereWave(ell, coeffs, frame)


def sphere_kernel(ell, theta):
    "P_l(cos theta), the unit normalized sphere kernel at angle theta"
    return SphereKernel(ell).legendre_derivative(0, np.cos(theta))


###
# Rescaled pullback
###

class RescaledField(object):
    """
    The field u -> f(exp_x(u / lam)). On the plane and torus the
    exponential map is x + u / lam; on the sphere it is the geodesic
    exponential in a fixed orthonormal tangent frame at x.
    """
    def __init__(self, base, center, lam):
        if lam <= 0:
            raise EnsembleError("Scale must be positive")
        self.base = base
        self.lam = float(lam)
        self.center = np.asarray(center, dtype=float)
        self.kind = base.kind
        if base.kind == "sphere":
            self.chart = SphereChart(self.center, self.lam)
            self.n = 2
        else:
            self.chart = None
            self.n = base.n

    def _points(self, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            U = U[None, :]
        if U.shape[1] != self.n:
            raise EnsembleError("Chart points must have %d coordinates" % self.n)
        return U

    def values(self, U):
        U = self._points(U)
        if self.chart is None:
            return self.base.values(self.center + U / self.lam)
        E, _, _ = self.chart.jets(U)
        return self.base.values(E)

    def jet(self, U):
        U = self._points(U)
        if self.chart is None:
            vals, grads, hess = self.base.jet(self.center + U / self.lam)
            return vals, grads / self.lam, hess / self.lam ** 2

        E, dE, d2E = self.chart.jets(U)
        vals, g, H = self.base.jet(E)
        # ambient Hessian of the 0-homogeneous extension at |X| = 1
        amb = H - E[:, :, None] * g[:, None, :] - g[:, :, None] * E[:, None, :]
        grads = np.einsum("nia,na->ni", dE, g)
        hess = np.einsum("nia,nab,njb->nij", dE, amb, dE) + np.einsum("nija,na->nij", d2E, g)
        return vals, grads, hess

    def grid_values(self, axes):
        if self.chart is None and hasattr(self.base, "grid_values"):
            shifted = [self.center[d] + np.asarray(ax) / self.lam for d, ax in enumerate(axes)]
            return self.base.grid_values(shifted)
        return generic_grid_values(self, axes)

    def grid_gradients(self, axes):
        if self.chart is None and hasattr(self.base, "grid_gradients"):
            shifted = [self.center[d] + np.asarray(ax) / self.lam for d, ax in enumerate(axes)]
            return self.base.grid_gradients(shifted) / self.lam
        return generic_grid_gradients(self, axes)

    def scaled(self, c):
        return RescaledField(self.base.scaled(c), self.center, self.lam)


def rescale_at(f, x, lam):
    "Returns the RescaledField u -> f(exp_x(u / lam))"
    return RescaledField(f, x, lam)


def eval_jet(f, u):
    "(value, gradient, hessian) of any wave field at a single point"
    vals, grads, hess = f.jet(np.asarray(u, dtype=float)[None, :])
    return float(vals[0]), grads[0], hess[0]


def _mesh(axes):
    grids = np.meshgrid(*[np.asarray(ax, dtype=float) for ax in axes], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1), grids[0].shape


def generic_grid_values(field, axes):
    "Grid values for fields without a separable fast path"
    pts, shape = _mesh(axes)
    return field.values(pts).reshape(shape)


def generic_grid_gradients(field, axes):
    pts, shape = _mesh(axes)
    _, grads, _ = field.jet(pts)
    return grads.reshape(shape + (field.n,))


def grid_values(field, axes):
    if hasattr(field, "grid_values"):
        return field.grid_values(axes)
    return generic_grid_values(field, axes)


def grid_gradients(field, axes):
    if hasattr(field, "grid_gradients"):
        return field.grid_gradients(axes)
    return generic_grid_gradients(field, axes)


###
# Covariance diagnostics
###

def _multi_indices(n, max_order):
    "All multi-indices of R^n with total order <= max_order"
    out = [()]
    for _ in range(n):
        out = [alpha + (k,) for alpha in out for k in range(max_order + 1)]
    return [alpha for alpha in out if sum(alpha) <= max_order]


def _ball_grid(n, R, resolution):
    "Points of a square grid of spacing R / resolution inside B_R"
    ax = np.linspace(-R, R, 2 * resolution + 1)
    pts, _ = _mesh([ax] * n)
    return pts[np.linalg.norm(pts, axis=1) <= R + 1e-12]


def ensemble_kernel(kind, lam=None, n=2, M=DEFAULT_M, direction_mode="equispaced", rng=None):
    "The exact covariance kernel of an ensemble"
    if kind == "torus":
        return torus_kernel_object(lam, n)
    elif kind == "plane":
        if direction_mode == "equispaced":
            directions = equispaced_directions(M)
        else:
            directions = uniform_directions(n, M, rng if rng is not None else np.random.default_rng(0))
        return TrigKernel(directions, 1.0 / M)
    elif kind == "sphere":
        return SphereKernel(lam)
    raise EnsembleError("Unknown ensemble kind %r" % (kind,))


def covariance_convergence_sup(kind, lam, x=None, R=5.0, max_order=0, resolution=20,
                               n=2, M=DEFAULT_M, direction_mode="equispaced", scale=None):
    """
    sup over a grid of (u, v) in B_R x B_R of |d_u^a d_v^b (Pi^x(u,v) - Pi_infty(u,v))|
    for |a|, |b| <= max_order, with exact kernels in unit normalization.

    kind "torus": lam is the spectral parameter; kind "plane": the
    plane wave kernel with M directions (lam is the rescaling, 1 by
    default); kind "sphere": lam is the degree l and the rescaling is
    sqrt(l(l+1)) unless `scale` is given.
    """
    if max_order > 2:
        raise EnsembleError("max_order must be <= 2")
    if kind == "sphere":
        n = 2
    limit = IsotropicKernel(n, "unit")

    if kind in ("torus", "plane"):
        kern = ensemble_kernel(kind, lam, n=n, M=M, direction_mode=direction_mode)
        if scale:
            rescale = float(scale)
        else:
            rescale = float(lam) if kind == "torus" else 1.0
        # stationary: only the difference w = u - v in B_2R matters
        W = _ball_grid(n, 2 * R, 2 * resolution)
        best = 0.0
        for gamma in _multi_indices(n, 2 * max_order):
            exact = rescale ** -sum(gamma) * kern.stationary_derivative(gamma, W / rescale)
            lim = kernel_derivative(limit, gamma, (0,) * n, W, np.zeros_like(W))
            best = max(best, float(np.max(np.abs(exact - lim))))
        return best

    elif kind == "sphere":
        kern = SphereKernel(lam)
        rescale = float(scale or kern.lam)
        center = np.array([0.0, 0.0, 1.0]) if x is None else np.asarray(x, dtype=float)
        P = _ball_grid(2, R, resolution)
        E, dE, d2E = SphereChart(center, rescale).jets(P)
        indices = _multi_indices(2, max_order)
        best = 0.0
        step = max(1, (1 << 16) // len(P))
        for start in range(0, len(P), step):
            rows = np.repeat(np.arange(start, min(start + step, len(P))), len(P))
            cols = np.tile(np.arange(len(P)), min(step, len(P) - start))
            Ex = (E[rows], dE[rows], d2E[rows])
            Ey = (E[cols], dE[cols], d2E[cols])
            for a in indices:
                for b in indices:
                    exact = kern.jet_derivative(a, b, Ex, Ey)
                    lim = kernel_derivative(limit, a, b, P[rows], P[cols])
                    best = max(best, float(np.max(np.abs(exact - lim))))
        return best
    raise EnsembleError("Unknown ensemble kind %r" % (kind,))


def _random_sphere_points(rng, count):
    g = rng.standard_normal((count, 3))
    return g / np.linalg.norm(g, axis=1)[:, None]


def src_sup(kind, lam, eps, max_order=0, pair_budget=2000, rng=None, n=2, witness=False):
    """
    max over sampled pairs with d(x, y) >= lam^{-1+eps} of
    lam^{-|a|-|b|} |grad_x^a grad_y^b Pi_lam(x, y)| for |a|, |b| <= max_order,
    using exact kernels. For the sphere lam is the degree l, the
    frequency is sqrt(l(l+1)) and the antipodal pair is always tried.
    With witness=True returns (value, witness dict).
    """
    if not 0 < eps < 1:
        raise EnsembleError("eps must lie in (0, 1)")
    if max_order > 2:
        raise EnsembleError("max_order must be <= 2")
    if rng is None:
        rng = np.random.default_rng(0)

    if kind == "torus":
        kern = torus_kernel_object(lam, n)
        freq = float(lam)
        min_dist = freq ** (-1.0 + eps)
        d = rng.uniform(-0.5, 0.5, size=(pair_budget, n))
        d = d[np.linalg.norm(d, axis=1) >= min_dist]
        # the half period is the arithmetic worst case candidate
        d = np.vstack([d, np.full((1, n), 0.5), min_dist * np.eye(n)[:1] * (1 + 1e-12)])
        best, where = -1.0, None
        for gamma in _multi_indices(n, 2 * max_order):
            vals = np.abs(freq ** -sum(gamma) * kern.stationary_derivative(gamma, d))
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, where = float(vals[i]), {"x": [0.0] * n, "y": d[i].tolist(), "gamma": list(gamma)}
        return (best, where) if witness else best

    elif kind == "sphere":
        kern = SphereKernel(lam)
        freq = kern.lam
        min_dist = freq ** (-1.0 + eps)
        x = _random_sphere_points(rng, pair_budget)
        y = _random_sphere_points(rng, pair_budget)
        keep = np.arccos(np.clip(np.sum(x * y, axis=1), -1, 1)) >= min_dist
        x, y = x[keep], y[keep]
        pole = np.array([[0.0, 0.0, 1.0]])
        x = np.vstack([pole, x])
        y = np.vstack([-pole, y])
        Ex = origin_jets(x, freq)
        Ey = origin_jets(y, freq)
        best, where = -1.0, None
        for a in _multi_indices(2, max_order):
            for b in _multi_indices(2, max_order):
                vals = np.abs(kern.jet_derivative(a, b, Ex, Ey))
                i = int(np.argmax(vals))
                if vals[i] > best:
                    best = float(vals[i])
                    where = {"x": x[i].tolist(), "y": y[i].tolist(), "a": list(a), "b": list(b)}
        return (best, where) if witness else best
    raise EnsembleError("Unknown ensemble kind %r" % (kind,))
