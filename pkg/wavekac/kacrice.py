"""
Kac-Rice engine for the frequency 1 random wave: one-point zero
and critical point intensities, the two-point critical density
with its near-diagonal exponents, decorrelation profiles and the
Gram certificates of the non-degeneracy hypotheses.

Intensities are computed in unit normalization, Gram matrices in
"paper" normalization (value vol(S^{n-1}) at coincidence).
"""
import logging
import math

import numpy as np
from scipy import integrate, linalg, special

from .gaussian import (
    DegenerateLawError, JetSpec, SingularConditioningError,
    assemble_jet_covariance, hessian_from_vector,
)
from .kernel import IsotropicKernel
from .util import WaveKacError, loglog_slope, upper_envelope

logger = logging.getLogger(__name__)

METHODS = ("closed-form", "semi-analytic", "conditional-MC")

# Stated in the literature for the n=2 critical point density
PUBLISHED_CRIT_INTENSITY = 1.0 / (4.0 * math.pi * math.sqrt(6.0))

# Spherical decomposition of the n=2 one-point Hessian law
ORACLE_CRIT_INTENSITY = 1.0 / (2.0 * math.sqrt(3.0) * math.pi)

# Number of batches used for Monte Carlo standard errors
MC_BATCHES = 20

# Smallest separation accepted by the Gram certificates
MIN_SEPARATION = 1e-8


class KacRiceError(WaveKacError):
    "Raised for unsupported Kac-Rice computations and singular configurations"
    pass


class IntensityResult(object):
    """
    A one-point Kac-Rice intensity (density per unit volume) of
    zeros or critical points, with the method that produced it.
    For critical points `by_index` holds the density of points of
    each Hessian index q when available.
    """
    def __init__(self, n, kind, value, method, mc_samples=0, standard_error=0.0,
                 by_index=None, by_index_se=None):
        self.n = n
        self.kind = kind
        self.value = float(value)
        self.method = method
        self.mc_samples = int(mc_samples)
        self.standard_error = float(standard_error)
        self.by_index = by_index
        self.by_index_se = by_index_se

    def __repr__(self):
        return "IntensityResult(n=%d, kind=%s, method=%s, value=%.8g, se=%.3g)" % (
            self.n, self.kind, self.method, self.value, self.standard_error)

    def agrees_with(self, other, n_se=3.0):
        "Whether two estimates agree within n_se combined standard errors"
        se = math.hypot(self.standard_error, other.standard_error)
        if se == 0:
            return abs(self.value - other.value) <= 1e-12 * abs(other.value)
        return abs(self.value - other.value) <= n_se * se

    def to_dict(self):
        d = {
            "n": self.n,
            "kind": self.kind,
            "value": self.value,
            "method": self.method,
            "mc_samples": self.mc_samples,
            "standard_error": self.standard_error,
        }
        if self.by_index is not None:
            d["by_index"] = dict((str(q), v) for q, v in self.by_index.items())
        if self.by_index_se is not None:
            d["by_index_se"] = dict((str(q), v) for q, v in self.by_index_se.items())
        return d


class TwoPointResult(object):
    """
    The two-point critical density K2(r) = Den(r) Y(r) on a grid
    of separations, the points dropped for singular conditioning
    and, once fitted, the near-diagonal log-log slopes.
    """
    def __init__(self, n, r, den, y, y_se, dropped=None, factor_methods=None):
        self.n = n
        self.r = np.asarray(r, dtype=float)
        self.den = np.asarray(den, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.y_se = np.asarray(y_se, dtype=float)
        self.dropped = list(dropped or [])
        self.factor_methods = list(factor_methods or [])
        self.slope_den = None
        self.slope_y = None

    @property
    def k2(self):
        return self.den * self.y

    def as_tuple(self):
        "(Den, Y, K2) at the first separation"
        return float(self.den[0]), float(self.y[0]), float(self.k2[0])

    def fit_slopes(self):
        self.slope_den = loglog_slope(self.r, self.den)
        self.slope_y = loglog_slope(self.r, self.y)
        return self.slope_den, self.slope_y

    def to_dict(self):
        return {
            "n": self.n,
            "r": self.r.tolist(),
            "den": self.den.tolist(),
            "y": self.y.tolist(),
            "y_se": self.y_se.tolist(),
            "k2": self.k2.tolist(),
            "slope_den": self.slope_den,
            "slope_y": self.slope_y,
            "dropped": self.dropped,
        }


def _batched_means(draw, samples, rng, batches=MC_BATCHES):
    """
    Calls draw(rng, count) -> (count, k) array for equal sized
    batches and returns (mean (k,), standard error (k,)).
    """
    if samples < batches:
        raise KacRiceError("Need at least %d Monte Carlo samples" % batches)
    size = samples // batches
    means = np.array([draw(rng, size).mean(axis=0) for _ in range(batches)])
    return means.mean(axis=0), means.std(axis=0, ddof=1) / math.sqrt(batches)


###
# One-point intensities
###

def one_point_law(n, orders=("value", "gradient", "hessian")):
    "Jet law of the unit frequency 1 wave at a single point"
    return assemble_jet_covariance(IsotropicKernel(n, "unit"), JetSpec(np.zeros((1, n)), orders))


def zero_intensity(n, method="closed-form", mc_samples=10 ** 6, rng=None):
    """
    Expected nodal measure per unit volume,
    Gamma((n+1)/2) / (sqrt(pi n) Gamma(n/2)), or its conditional
    Monte Carlo estimate (2 pi)^{-1/2} E[|grad phi| | phi = 0].
    """
    if n < 2:
        raise KacRiceError("Dimension must be >= 2")
    if method == "closed-form":
        value = math.exp(special.gammaln((n + 1) / 2.0) - special.gammaln(n / 2.0)) / math.sqrt(math.pi * n)
        return IntensityResult(n, "zero", value, method)
    elif method != "conditional-MC":
        raise KacRiceError("zero_intensity supports closed-form and conditional-MC")

    if rng is None:
        rng = np.random.default_rng()
    spec = JetSpec(np.zeros((1, n)), ("value", "gradient"))
    law = assemble_jet_covariance(IsotropicKernel(n, "unit"), spec)
    value_idx = spec.indices(order="value")
    den = law.marginal(value_idx).density_at_zero()
    grad_law = law.condition(value_idx)

    def draw(rng, count):
        return np.linalg.norm(grad_law.sample(rng, count), axis=1)[:, None]

    mean, se = _batched_means(draw, mc_samples, rng)
    return IntensityResult(n, "zero", den * mean[0], method, mc_samples, den * se[0])


def _abs_three_u_squared_minus_one():
    "E|3U^2 - 1| for U uniform on [-1, 1], by adaptive quadrature"
    value, _ = integrate.quad(lambda u: abs(3.0 * u * u - 1.0), 0.0, 1.0, points=[1.0 / math.sqrt(3.0)])
    positive, _ = integrate.quad(lambda u: 3.0 * u * u - 1.0, 1.0 / math.sqrt(3.0), 1.0)
    return value, positive


def crit_intensity(n=2, method="conditional-MC", mc_samples=10 ** 6, rng=None):
    """
    Expected number of critical points per unit volume,
    Den_{grad phi}(0) E[|det Hess phi| | grad phi = 0].

    closed-form: the published n=2 value 1/(4 pi sqrt 6).
    semi-analytic (n=2): with y1 = x1 + x2, y2 = sqrt2 (x1 - x2),
    y3 = sqrt8 x3 the determinant is (2 Y1^2 - Y2^2 - Y3^2)/8 for iid
    standard normals; the spherical decomposition R^2 (3U^2 - 1) with
    R^2 ~ chi2(3) and U uniform on [-1, 1] leaves a 1-d integral.
    conditional-MC (n in {2, 3}): sampling of the conditional Hessian.
    """
    if method == "closed-form":
        if n != 2:
            raise KacRiceError("The closed form critical intensity is only known for n = 2")
        return IntensityResult(n, "crit", PUBLISHED_CRIT_INTENSITY, method)

    elif method == "semi-analytic":
        if n != 2:
            raise KacRiceError("The semi-analytic reduction is implemented for n = 2")
        abs_mean, positive = _abs_three_u_squared_minus_one()
        den = 1.0 / math.pi
        # E[chi2(3)] = 3
        value = den * 3.0 * abs_mean / 8.0
        extrema = den * 3.0 * positive / 8.0
        by_index = {0: extrema / 2.0, 1: value - extrema, 2: extrema / 2.0}
        return IntensityResult(n, "crit", value, method, by_index=by_index)

    elif method != "conditional-MC":
        raise KacRiceError("Unknown method %r" % (method,))
    if n not in (2, 3):
        raise KacRiceError("Conditional Monte Carlo critical intensity needs n in {2, 3}")

    if rng is None:
        rng = np.random.default_rng()
    spec = JetSpec(np.zeros((1, n)), ("gradient", "hessian"))
    law = assemble_jet_covariance(IsotropicKernel(n, "unit"), spec)
    grad_idx = spec.indices(order="gradient")
    den = law.marginal(grad_idx).density_at_zero()
    hess_law = law.condition(grad_idx)

    def draw(rng, count):
        hess = hessian_from_vector(hess_law.sample(rng, count), n)
        eig = np.linalg.eigvalsh(hess)
        absdet = np.abs(np.prod(eig, axis=1))
        q = np.sum(eig < 0, axis=1)
        cols = [absdet] + [absdet * (q == k) for k in range(n + 1)]
        return np.stack(cols, axis=1)

    mean, se = _batched_means(draw, mc_samples, rng)
    by_index = dict((k, den * float(mean[k + 1])) for k in range(n + 1))
    by_index_se = dict((k, den * float(se[k + 1])) for k in range(n + 1))
    return IntensityResult(n, "crit", den * mean[0], method, mc_samples, den * se[0],
                           by_index, by_index_se)


###
# Two-point critical density
###

def crit_two_point(r, mc_samples=10 ** 5, rng=None, n=2):
    """
    Den(r), the density at 0 of (grad phi(u), grad phi(v)) with
    |u - v| = r, and Y(r) = E[|det H_u| |det H_v| | both gradients 0]
    by Monte Carlo. Raises KacRiceError when the configuration is
    singular (expected as r -> 0).
    """
    if r <= 0:
        raise KacRiceError("Separation must be positive")
    if rng is None:
        rng = np.random.default_rng()
    points = np.zeros((2, n))
    points[1, 0] = r
    spec = JetSpec(points, ("gradient", "hessian"))
    law = assemble_jet_covariance(IsotropicKernel(n, "unit"), spec)
    grad_idx = spec.indices(order="gradient")
    try:
        den = law.marginal(grad_idx).density_at_zero()
        cond = law.condition(grad_idx)
    except (DegenerateLawError, SingularConditioningError) as e:
        raise KacRiceError("Two-point law is singular at r=%g: %s" % (r, e))

    half = len(cond.mean) // 2

    def draw(rng, count):
        draws = cond.sample(rng, count)
        hu = hessian_from_vector(draws[:, :half], n)
        hv = hessian_from_vector(draws[:, half:], n)
        return (np.abs(np.linalg.det(hu)) * np.abs(np.linalg.det(hv)))[:, None]

    mean, se = _batched_means(draw, mc_samples, rng)
    return TwoPointResult(n, [r], [den], [mean[0]], [se[0]], factor_methods=[cond.factor_method])


def two_point_profile(r_grid, mc_samples=10 ** 5, rng=None, n=2):
    """
    crit_two_point over a grid of separations; singular points are
    dropped and listed in `dropped`.
    """
    if rng is None:
        rng = np.random.default_rng()
    rows, dropped, methods = [], [], []
    for r in r_grid:
        try:
            res = crit_two_point(float(r), mc_samples, rng, n)
        except KacRiceError as e:
            logger.info("Dropping r=%g: %s", r, e)
            dropped.append(float(r))
            continue
        den, y, _ = res.as_tuple()
        if not y > 0:
            logger.info("Dropping r=%g: non-positive Y estimate", r)
            dropped.append(float(r))
            continue
        rows.append((float(r), den, y, float(res.y_se[0])))
        methods.extend(res.factor_methods)
    if not rows:
        return TwoPointResult(n, [], [], [], [], dropped, methods)
    r, den, y, se = zip(*rows)
    return TwoPointResult(n, r, den, y, se, dropped, methods)


def near_diagonal_exponents(r_grid=None, mc_samples=10 ** 5, rng=None, n=2):
    """
    Fits the log-log slopes of Den(r) and Y(r) on a log-spaced grid
    near the diagonal (default 10 points in [1e-2, 1e-1]). Returns
    the TwoPointResult with slope_den and slope_y set.
    """
    if r_grid is None:
        r_grid = np.logspace(-2, -1, 10)
    if len(r_grid) < 8:
        raise KacRiceError("Need at least 8 separations for the exponent fit")
    res = two_point_profile(r_grid, mc_samples, rng, n)
    if len(res.r) < 2:
        raise KacRiceError("Too few usable separations after dropping singular points")
    res.fit_slopes()
    return res


###
# Gram certificates
###

def _check_points(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) > 1:
        diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        diff[np.diag_indices(len(pts))] = np.inf
        if diff.min() <= MIN_SEPARATION:
            raise KacRiceError("Points must be separated by more than %g" % MIN_SEPARATION)
    return pts


def gram_jets(points, orders):
    """
    Smallest eigenvalue of the Gram matrix of the jets `orders`
    at the given points, in "paper" normalization.
    """
    pts = _check_points(points)
    spec = JetSpec(pts, orders)
    law = assemble_jet_covariance(IsotropicKernel(pts.shape[1], "paper"), spec)
    return law.min_eigenvalue()


def gram_zeros(points):
    "Smallest eigenvalue of [Pi(u_i, u_j)], the Gram matrix of e^{i<u_l, w>}"
    return gram_jets(points, ("value",))


def gram_crits(points):
    "Smallest eigenvalue of the gradient Gram matrix, the Gram matrix of w_k e^{i<u_l, w>}"
    return gram_jets(points, ("gradient",))


###
# Decorrelation
###

def decorrelation_profile(n, r_grid, orders=("value", "gradient", "hessian")):
    """
    Spectral norm of the cross block Cov(jets(0), jets(r e_1)) for
    every r of the grid. At r = 0 the cross block is the one-point
    covariance itself.
    """
    k = IsotropicKernel(n, "unit")
    out = []
    for r in r_grid:
        r = float(r)
        if r < 0:
            raise KacRiceError("Separations must be non-negative")
        if r == 0:
            block = one_point_law(n, orders).cov
        else:
            points = np.zeros((2, n))
            points[1, 0] = r
            spec = JetSpec(points, orders)
            cov = assemble_jet_covariance(k, spec).cov
            block = cov[np.ix_(spec.indices(point=0), spec.indices(point=1))]
        out.append(float(linalg.norm(block, 2)))
    return np.array(out)


def envelope_fit(r_grid, norms):
    """
    Fits norm <= C r^slope on the monotone upper envelope of a
    decorrelation profile. Returns (C, slope).
    """
    r = np.asarray(r_grid, dtype=float)
    env = upper_envelope(norms)
    slope = loglog_slope(r, env)
    C = float(np.max(np.asarray(norms) * r ** (-slope)))
    return C, slope


###
# Factorial moments
###

def factorial_to_variance(mean, second_factorial):
    "Var[N] = E[N(N-1)] + E[N] - E[N]^2"
    return second_factorial + mean - mean * mean


def disk_pair_density(s, R):
    "Density of the distance between two uniform points of a disk of radius R"
    s = np.asarray(s, dtype=float)
    d = np.clip(s / (2.0 * R), 0.0, 1.0)
    return 4.0 * s / (math.pi * R * R) * (np.arccos(d) - d * np.sqrt(1.0 - d * d))


def predicted_ball_variance(R, two_point, intensity, points=2000):
    """
    Predicted Var[N] for the number of critical points in a disk
    of radius R (n=2): E[N(N-1)] integrates K2 against the pair
    distance density, then the factorial moment is converted.
    `two_point` is a TwoPointResult covering [0, 2R]; K2 is
    linearly interpolated and held constant outside its grid.
    """
    if two_point.n != 2:
        raise KacRiceError("Ball variance prediction is implemented for n = 2")
    area = math.pi * R * R
    s = np.linspace(0.0, 2.0 * R, points)
    k2 = np.interp(s, two_point.r, two_point.k2)
    second = area * area * integrate.trapezoid(k2 * disk_pair_density(s, R), s)
    mean = intensity * area
    return {"mean": mean, "second_factorial": second,
            "variance": factorial_to_variance(mean, second)}
