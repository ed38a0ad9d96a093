"""
This module provides exact evaluation of the frequency 1
isotropic covariance kernel on R^n, its mixed derivatives,
the spectral moments of the uniform measure on the sphere,
normalized Bessel functions, zonal harmonics and the plane
wave expansion.

The kernel is radial, rho(r) = Lambda_alpha(r) with
alpha = (n-2)/2 and the normalized Bessel function

    Lambda_nu(t) = Gamma(nu+1) (t/2)^-nu J_nu(t).

Writing f(w) = H(|w|^2 / 2) we have H^(m) = D^m Lambda_alpha with
D = (1/r) d/dr, and D Lambda_nu = -Lambda_{nu+1} / (2(nu+1)). Every
mixed partial is then a finite Faa di Bruno sum that never
divides by r.
"""
import logging
import math
from collections import namedtuple

import numpy as np
from scipy import special

from .util import WaveKacError, multi_index_to_list, small_block_partitions

logger = logging.getLogger(__name__)

# Largest total derivative order supported by kernel_derivative
MAX_ORDER = 4

# Largest moment order supported by spectral_moment
MAX_MOMENT = 8

# Below this argument Lambda_nu is summed from its power series
SERIES_CUTOFF = 2.0

# "surface" is an alias of "paper"; both give vol(S^{n-1}) at coincidence
NORMALIZATIONS = ("unit", "paper", "surface")

BesselEval = namedtuple("BesselEval", ["nu", "t", "value"])


class DomainError(WaveKacError):
    "Raised for arguments outside the domain of a kernel function"
    pass


class UnsupportedOrderError(WaveKacError):
    "Raised when a derivative or moment order is not supported"
    pass


def sphere_volume(n):
    "Surface measure of the unit sphere S^{n-1} in R^n"
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n, r):
    "Volume of the ball of radius r in R^n"
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * r ** n


def _check_dimension(n):
    if int(n) != n or n < 2:
        raise DomainError("Dimension must be an integer >= 2! Got: %r" % (n,))


def _check_separation(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("Separation must be finite!")
    if np.any(t < 0):
        raise DomainError("Separation must be non-negative! Got: %r" % (t.min(),))
    return t


def _series(nu, t):
    "Power series of Lambda_nu, accurate for t <= SERIES_CUTOFF"
    x = -0.25 * t * t
    term = np.ones_like(t)
    total = np.ones_like(t)
    for k in range(1, 40):
        term = term * x / (k * (nu + k))
        total = total + term
    return total


def normalized_bessel(nu, t):
    """
    Evaluates Lambda_nu(t) = Gamma(nu+1) (t/2)^-nu J_nu(t) for
    nu >= -1/2 and t >= 0. Lambda_nu(0) = 1. Accepts scalars or
    arrays for t and returns the same shape.
    """
    if nu < -0.5:
        raise DomainError("Order must be >= -1/2! Got: %r" % (nu,))
    t = _check_separation(t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)

    small = t <= SERIES_CUTOFF
    if np.any(small):
        out[small] = _series(nu, t[small])
    large = ~small
    if np.any(large):
        tl = t[large]
        log_scale = special.gammaln(nu + 1.0) - nu * np.log(tl / 2.0)
        out[large] = np.exp(log_scale) * special.jv(nu, tl)

    if scalar:
        return float(out[0])
    return out


def bessel_eval(nu, t):
    "Returns the BesselEval record of the normalized Bessel function"
    return BesselEval(nu, t, normalized_bessel(nu, t))


def bessel_j(nu, t):
    "Bessel function of the first kind rebuilt from Lambda_nu"
    t = _check_separation(t)
    return (t / 2.0) ** nu * normalized_bessel(nu, t) / math.gamma(nu + 1.0)


def profile_derivative(n, m, r):
    """
    Returns H^(m)(t) at t = r^2/2, where H(|w|^2/2) is the unit
    kernel. Equals (-1)^m Lambda_{alpha+m}(r) / (2^m (alpha+1)_m).
    """
    alpha = (n - 2) / 2.0
    pochhammer = 1.0
    for j in range(1, m + 1):
        pochhammer *= alpha + j
    return (-1) ** m * normalized_bessel(alpha + m, r) / (2.0 ** m * pochhammer)


def _normalization_scale(n, normalization):
    if normalization not in NORMALIZATIONS:
        raise DomainError("Unknown normalization %r" % (normalization,))
    if normalization == "unit":
        return 1.0
    return sphere_volume(n)


def rho(n, r, normalization="unit"):
    """
    Radial profile of the frequency 1 kernel. In the "paper"
    normalization returns (2 pi)^{n/2} J_alpha(r) / r^alpha, which is
    vol(S^{n-1}) at r=0; the unit normalization divides by vol(S^{n-1}).
    """
    _check_dimension(n)
    scale = _normalization_scale(n, normalization)
    return scale * normalized_bessel((n - 2) / 2.0, r)


class IsotropicKernel(object):
    """
    The dimension-n limit covariance Pi_infty ("paper" normalization)
    or rho (unit normalization) with analytic mixed derivatives
    up to total order 4. Immutable after construction.
    """
    def __init__(self, n, normalization="unit"):
        _check_dimension(n)
        self.n = int(n)
        self.normalization = normalization
        self.alpha = (self.n - 2) / 2.0
        self.scale = _normalization_scale(self.n, normalization)

    def __repr__(self):
        return "IsotropicKernel(n=%d, normalization=%r)" % (self.n, self.normalization)

    def profile(self, r):
        "Returns the kernel at separation r"
        return self.scale * normalized_bessel(self.alpha, r)

    def value(self, u, v):
        "Returns Pi(u, v) for points (or stacks of points) u, v"
        w = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
        return self.profile(np.linalg.norm(w, axis=-1))

    def derivative(self, a, b, u, v):
        "Mixed partial d_u^a d_v^b of the kernel; see kernel_derivative"
        return kernel_derivative(self, a, b, u, v)


def _check_multi_index(alpha, n, name):
    alpha = tuple(int(x) for x in alpha)
    if len(alpha) != n or any(x < 0 for x in alpha):
        raise DomainError("Multi-index %s=%r is not valid in dimension %d" % (name, alpha, n))
    return alpha


def kernel_derivative(k, a, b, u, v):
    """
    Exact mixed partial d_u^a d_v^b Pi(u, v) for |a| + |b| <= 4.
    u and v may be single points of shape (n,) or stacks of
    shape (N, n); the result is a float or an (N,) array.
    """
    a = _check_multi_index(a, k.n, "a")
    b = _check_multi_index(b, k.n, "b")
    order = sum(a) + sum(b)
    if order > MAX_ORDER:
        raise UnsupportedOrderError("Derivative order %d exceeds %d" % (order, MAX_ORDER))

    w = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    scalar = w.ndim == 1
    w = np.atleast_2d(w)
    if w.shape[-1] != k.n:
        raise DomainError("Points must have %d coordinates" % k.n)
    r = np.linalg.norm(w, axis=1)

    gamma = tuple(x + y for x, y in zip(a, b))
    indices = multi_index_to_list(gamma)
    derivs = {}
    total = np.zeros(len(w))
    for part in small_block_partitions(indices):
        m = len(part)
        if m not in derivs:
            derivs[m] = profile_derivative(k.n, m, r)
        term = derivs[m].copy()
        for block in part:
            if len(block) == 1:
                term *= w[:, block[0]]
            elif block[0] != block[1]:
                term = term * 0.0
                break
        total += term

    # d/dv = -d/dw on a function of u - v
    total *= (-1) ** sum(b) * k.scale
    if scalar:
        return float(total[0])
    return total


def spectral_moment(n, g):
    """
    Returns the moment E[omega^g] of the uniform probability
    measure on S^{n-1}. Zero when any component of g is odd.
    """
    _check_dimension(n)
    g = _check_multi_index(g, n, "g")
    if sum(g) > MAX_MOMENT:
        raise UnsupportedOrderError("Moment order %d exceeds %d" % (sum(g), MAX_MOMENT))
    if any(x % 2 for x in g):
        return 0.0
    log_value = special.gammaln(n / 2.0) - special.gammaln((n + sum(g)) / 2.0)
    for x in g:
        log_value += special.gammaln((x + 1) / 2.0) - special.gammaln(0.5)
    return float(math.exp(log_value))


def zonal_harmonic(n, k, cos_angle):
    """
    Degree k zonal harmonic normalized to 1 on its axis, as a
    function of the cosine of the angle to the axis. Supported
    for n = 2 (cos k theta) and n = 3 (Legendre P_k).
    """
    if n == 2:
        return special.eval_chebyt(k, cos_angle)
    elif n == 3:
        return special.eval_legendre(k, cos_angle)
    raise DomainError("Zonal harmonics are implemented for n in {2, 3}, got %r" % (n,))


def plane_wave_coefficient(n, k):
    """
    Returns C_k such that
        e^{i<u,w>} = sum_k C_k (i|u|/2)^k Lambda_{k+alpha}(|u|) Z_k(u/|u|, w)
    with zonal harmonics normalized by Z_k(w, w) = 1.
    """
    _check_dimension(n)
    if n == 2:
        return (1.0 if k == 0 else 2.0) / math.factorial(k)
    alpha = (n - 2) / 2.0
    # Gegenbauer C_k^alpha(1) = (2 alpha)_k / k!
    log_axis = special.gammaln(k + 2 * alpha) - special.gammaln(k + 1) - special.gammaln(2 * alpha)
    log_coeff = special.gammaln(alpha) + math.log(k + alpha) - special.gammaln(k + alpha + 1)
    return float(math.exp(log_coeff + log_axis))


def plane_wave_partial_sum(n, u, w, K):
    """
    Truncation of the plane wave expansion of e^{i<u,w>} at order K,
    for n in {2, 3} and a unit vector w.
    """
    if n not in (2, 3):
        raise DomainError("Zonal harmonics are implemented for n in {2, 3}, got %r" % (n,))
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != (n,) or w.shape != (n,):
        raise DomainError("u and w must have %d coordinates" % n)
    if abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise DomainError("Direction w must be a unit vector")
    if K < 0:
        raise DomainError("Truncation order must be >= 0")

    radius = float(np.linalg.norm(u))
    if radius == 0.0:
        cos_angle = 1.0
    else:
        cos_angle = float(np.dot(u, w) / radius)
    alpha = (n - 2) / 2.0

    total = 0.0 + 0.0j
    for k in range(K + 1):
        radial = (0.5j * radius) ** k * normalized_bessel(k + alpha, radius)
        total += plane_wave_coefficient(n, k) * radial * zonal_harmonic(n, k, cos_angle)
    return complex(total)
