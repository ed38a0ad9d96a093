"""
Finite dimensional centered Gaussian algebra: jet covariances
assembled from a kernel, regularized factorization, conditioning,
densities at zero, sampling and spectral diagnostics.
"""
import logging

import numpy as np
from scipy import linalg

from .kernel import kernel_derivative
from .util import WaveKacError

logger = logging.getLogger(__name__)

ORDERS = ("value", "gradient", "hessian")

# Largest jet dimension assemble_jet_covariance accepts
MAX_JET_DIM = 10000

# Relative thresholds shared by factorization, conditioning and densities
JITTER_START = 1e-12
JITTER_STOP = 1e-8
SINGULAR_RTOL = 1e-12
SYMMETRY_RTOL = 1e-12
NEGATIVE_RTOL = 1e-10


class DegenerateLawError(WaveKacError):
    "Raised when a law is degenerate where a density is required"
    pass


class SingularConditioningError(WaveKacError):
    "Raised when the observed block cannot be inverted"
    def __init__(self, msg, eigenvalue):
        WaveKacError.__init__(self, msg)
        self.eigenvalue = eigenvalue

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.eigenvalue))


class JetSpecError(WaveKacError):
    "Raised for an invalid jet specification"
    pass


class DuplicatePointError(JetSpecError):
    "Raised when a jet specification repeats a point"
    pass


def hessian_pairs(n):
    "Symmetric unique Hessian order (1,1),(1,2),...,(1,n),(2,2),..."
    return [(i, j) for i in range(n) for j in range(i, n)]


def order_multi_indices(n, order):
    "Returns the multi-indices making up one jet order in storage order"
    if order == "value":
        return [tuple([0] * n)]
    elif order == "gradient":
        out = []
        for i in range(n):
            alpha = [0] * n
            alpha[i] = 1
            out.append(tuple(alpha))
        return out
    elif order == "hessian":
        out = []
        for i, j in hessian_pairs(n):
            alpha = [0] * n
            alpha[i] += 1
            alpha[j] += 1
            out.append(tuple(alpha))
        return out
    raise JetSpecError("Unknown jet order %r" % (order,))


def hessian_from_vector(vec, n):
    "Rebuilds symmetric (..., n, n) matrices from symmetric-unique storage"
    vec = np.asarray(vec)
    out = np.empty(vec.shape[:-1] + (n, n), dtype=vec.dtype)
    for pos, (i, j) in enumerate(hessian_pairs(n)):
        out[..., i, j] = vec[..., pos]
        out[..., j, i] = vec[..., pos]
    return out


class JetSpec(object):
    """
    A list of distinct points in R^n together with the jet orders
    observed at each point. `orders` is either one collection used
    for every point or one collection per point.
    """
    def __init__(self, points, orders=("value",)):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise JetSpecError("Points must be a non-empty (m, n) array")
        self.points = pts
        self.n = pts.shape[1]

        if orders and isinstance(next(iter(orders)), str):
            per_point = [tuple(orders)] * len(pts)
        else:
            per_point = [tuple(o) for o in orders]
        if len(per_point) != len(pts):
            raise JetSpecError("Got %d order sets for %d points" % (len(per_point), len(pts)))
        for o in per_point:
            for name in o:
                if name not in ORDERS:
                    raise JetSpecError("Unknown jet order %r" % (name,))
        # Keep the canonical order value, gradient, hessian
        self.orders = [tuple(name for name in ORDERS if name in o) for o in per_point]

        if len(pts) > 1:
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.linalg.norm(diff, axis=-1)
            dist[np.diag_indices(len(pts))] = np.inf
            self.min_separation = float(dist.min())
            if self.min_separation == 0.0:
                raise DuplicatePointError("Jet specification repeats a point")
        else:
            self.min_separation = float("inf")

        self.layout = []
        for p, o in enumerate(self.orders):
            for name in o:
                for alpha in order_multi_indices(self.n, name):
                    self.layout.append((p, name, alpha))
        self.dim = len(self.layout)

    def labels(self):
        "Human readable coordinate labels such as p0:d12"
        out = []
        for p, name, alpha in self.layout:
            if name == "value":
                out.append("p%d:value" % p)
            else:
                digits = "".join(str(i + 1) for i, c in enumerate(alpha) for _ in range(c))
                out.append("p%d:d%s" % (p, digits))
        return out

    def indices(self, point=None, order=None):
        "Positions in the layout matching a point and/or order name"
        return [idx for idx, (p, name, _) in enumerate(self.layout)
                if (point is None or p == point) and (order is None or name == order)]


class GaussianLaw(object):
    """
    A finite dimensional Gaussian with covariance `cov` and
    optional mean. The factorization used for sampling is built
    once at construction: Cholesky, then Cholesky with escalating
    jitter, then an eigendecomposition with clamped eigenvalues.
    """
    def __init__(self, cov, mean=None, labels=None):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise DegenerateLawError("Covariance must be a square matrix")
        scale = max(float(np.abs(cov).max()), 1e-300)
        if np.abs(cov - cov.T).max() > SYMMETRY_RTOL * scale:
            raise DegenerateLawError("Covariance is not symmetric")
        self.cov = 0.5 * (cov + cov.T)
        self.dim = cov.shape[0]
        if mean is None:
            self.mean = np.zeros(self.dim)
        else:
            self.mean = np.asarray(mean, dtype=float).reshape(self.dim)
        self.labels = list(labels) if labels is not None else None

        self._eigenvalues = None
        eig = self.eigenvalues()
        if eig[0] < -NEGATIVE_RTOL * max(eig[-1], 0.0):
            raise DegenerateLawError("Covariance has negative eigenvalue %g" % eig[0])

        self.jitter_used = 0.0
        self.factor_method = None
        self.factor = self._factorize()

    def __repr__(self):
        return "GaussianLaw(dim=%d, method=%s, jitter=%g)" % (
            self.dim, self.factor_method, self.jitter_used)

    def eigenvalues(self):
        "Ascending eigenvalues of the covariance"
        if self._eigenvalues is None:
            self._eigenvalues = linalg.eigvalsh(self.cov)
        return self._eigenvalues

    def trace(self):
        return float(np.trace(self.cov))

    def _factorize(self):
        try:
            self.factor_method = "cholesky"
            return linalg.cholesky(self.cov, lower=True)
        except linalg.LinAlgError:
            pass

        tr = max(self.trace(), 1e-300)
        jitter = JITTER_START * tr
        while jitter <= JITTER_STOP * tr * (1 + 1e-9):
            try:
                factor = linalg.cholesky(self.cov + jitter * np.eye(self.dim), lower=True)
                self.jitter_used = jitter
                self.factor_method = "cholesky+jitter"
                logger.debug("Cholesky needed jitter %g", jitter)
                return factor
            except linalg.LinAlgError:
                jitter *= 10.0

        w, v = linalg.eigh(self.cov)
        self.factor_method = "eigen"
        logger.debug("Falling back to eigendecomposition, min eigenvalue %g", w[0])
        return v * np.sqrt(np.clip(w, 0.0, None))

    def min_eigenvalue(self):
        "Smallest eigenvalue by a symmetric eigensolve"
        return float(self.eigenvalues()[0])

    def is_degenerate(self):
        return self.min_eigenvalue() <= SINGULAR_RTOL * self.trace()

    def marginal(self, indices):
        "The law of the coordinates listed in `indices`"
        idx = list(indices)
        labels = [self.labels[i] for i in idx] if self.labels else None
        return GaussianLaw(self.cov[np.ix_(idx, idx)], self.mean[idx], labels)

    def condition(self, observed, values=None):
        """
        Returns the law of the remaining coordinates given that the
        coordinates `observed` equal `values` (zeros by default).
        """
        obs = list(observed)
        if not obs:
            return self
        if len(set(obs)) != len(obs) or min(obs) < 0 or max(obs) >= self.dim:
            raise JetSpecError("Observed indices %r are not valid" % (obs,))
        rest = [i for i in range(self.dim) if i not in set(obs)]
        if not rest:
            raise JetSpecError("Conditioning on every coordinate leaves no law")
        if values is None:
            values = np.zeros(len(obs))
        values = np.asarray(values, dtype=float).reshape(len(obs))

        s_oo = self.cov[np.ix_(obs, obs)]
        eig = linalg.eigvalsh(s_oo)
        if eig[0] < SINGULAR_RTOL * max(np.trace(s_oo), 1e-300):
            raise SingularConditioningError(
                "Observed block is singular (smallest eigenvalue %g)" % eig[0], float(eig[0]))

        s_ro = self.cov[np.ix_(rest, obs)]
        s_rr = self.cov[np.ix_(rest, rest)]
        chol = linalg.cho_factor(s_oo, lower=True)
        sol = linalg.cho_solve(chol, np.hstack([(values - self.mean[obs])[:, None], s_ro.T]))
        mean = self.mean[rest] + s_ro.dot(sol[:, 0])
        cov = s_rr - s_ro.dot(sol[:, 1:])
        labels = [self.labels[i] for i in rest] if self.labels else None
        return GaussianLaw(0.5 * (cov + cov.T), mean, labels)

    def density_at_zero(self):
        """
        Density of the law evaluated at the origin. Refuses
        degenerate laws rather than regularizing them.
        """
        if self.is_degenerate():
            raise DegenerateLawError(
                "Density requested for degenerate law (smallest eigenvalue %g)" % self.min_eigenvalue())
        try:
            chol = linalg.cho_factor(self.cov, lower=True)
        except linalg.LinAlgError:
            raise DegenerateLawError("Covariance is not positive definite")
        logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
        quad = float(self.mean.dot(linalg.cho_solve(chol, self.mean)))
        return float(np.exp(-0.5 * self.dim * np.log(2 * np.pi) - 0.5 * logdet - 0.5 * quad))

    def sample(self, rng, count):
        "Returns a (count, dim) matrix of draws using the generator rng"
        z = rng.standard_normal((int(count), self.dim))
        return self.mean + z.dot(self.factor.T)


def assemble_jet_covariance(k, spec):
    """
    Builds the GaussianLaw of the jets listed in `spec` for the
    field with covariance kernel `k`. Entry ((p, a), (q, b)) is
    the mixed partial d_u^a d_v^b k(u_p, u_q).
    """
    if spec.n != k.n:
        raise JetSpecError("Jet points live in R^%d, kernel in R^%d" % (spec.n, k.n))
    if spec.dim > MAX_JET_DIM:
        raise JetSpecError("Jet dimension %d exceeds %d" % (spec.dim, MAX_JET_DIM))

    # Group layout positions by multi-index so each derivative is evaluated
    # once over all point pairs
    groups = {}
    for idx, (p, _, alpha) in enumerate(spec.layout):
        groups.setdefault(alpha, []).append((idx, p))

    cov = np.zeros((spec.dim, spec.dim))
    for alpha, rows in groups.items():
        row_idx = np.array([i for i, _ in rows])
        row_pts = spec.points[[p for _, p in rows]]
        for beta, cols in groups.items():
            col_idx = np.array([j for j, _ in cols])
            col_pts = spec.points[[q for _, q in cols]]
            u = np.repeat(row_pts, len(cols), axis=0)
            v = np.tile(col_pts, (len(rows), 1))
            block = kernel_derivative(k, alpha, beta, u, v).reshape(len(rows), len(cols))
            cov[np.ix_(row_idx, col_idx)] = block
    return GaussianLaw(cov, labels=spec.labels())
