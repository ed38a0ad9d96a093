import time

import numpy as np

from wavekac.ensembles import sample_rwm
from wavekac.geometry import ball_axes, critical_points, nodal_measure
from wavekac.kacrice import crit_intensity
from wavekac.kernel import IsotropicKernel, kernel_derivative
from wavekac.predicate import FilterSet


def timed(f):
    def wrapper(*args, **kwargs):
        s = time.time()
        r = f(*args, **kwargs)
        e = time.time()
        print("Spent %0.3f sec invoking %s" % (e-s, f.__name__))
        return r
    return wrapper


@timed
def kernel_jet(num):
    k = IsotropicKernel(2)
    rng = np.random.default_rng(1)
    u = rng.uniform(-20, 20, (num, 2))
    v = rng.uniform(-20, 20, (num, 2))
    total = 0.0
    for a in ((0, 0), (1, 0), (1, 1), (2, 0)):
        for b in ((0, 0), (0, 1), (0, 2)):
            total += float(np.sum(kernel_derivative(k, a, b, u, v)))
    return total


@timed
def grid_values(field, r, h):
    return field.grid_values(ball_axes(np.zeros(2), r, h))


@timed
def nodal(field, r, h):
    return nodal_measure(field, np.zeros(2), r, h)


@timed
def crits(field, r, h):
    return critical_points(field, np.zeros(2), r, h)


@timed
def filter_table(filters, field, res):
    return filters.weight_table(res.points, field.jet(res.points))


@timed
def intensity(samples):
    return crit_intensity(2, "conditional-MC", samples, np.random.default_rng(2))


def main(M=256, r=20.0, h=0.05, crit_h=0.15, samples=10 ** 5):
    field = sample_rwm(2, M, "iid-uniform", np.random.default_rng(0))
    kernel_jet(10000)
    grid_values(field, r, h)

    res = nodal(field, r, h)
    area = np.pi * r * r
    print("Nodal length %0.3f in a ball of area %0.1f, ratio %0.5f (expect %0.5f)" % (
        res.total_measure, area, res.total_measure / area, 1 / (2 * np.sqrt(2))))

    cp = crits(field, r, crit_h)
    print("Found %d critical points, counts by index %r" % (cp.count, cp.counts()))

    filters = FilterSet(["value > 0 and q is 2", "q is 1", "value < 0 and q is 0"])
    table = filter_table(filters, field, cp)
    for text in sorted(table):
        print("\t%-24s %d" % (text, int(table[text].sum())))

    est = intensity(samples)
    print("Critical intensity %0.5f +- %0.5f, field estimate %0.5f" % (
        est.value, est.standard_error, cp.count / area))

    if cp.degenerate_count:
        print("Degenerate critical points skipped: %d" % cp.degenerate_count)


if __name__ == "__main__":
    main()
