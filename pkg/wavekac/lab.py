"""
The experiment runner. Each experiment of the catalog turns an
ExperimentConfig into an ExperimentReport: it fans independent
replicas out over a process pool, reduces them in replica order,
and records acceptance checks against the Kac-Rice targets.

Every replica draws from its own stream derived from
(master seed, experiment id, cell index, replica index), so the
numbers never depend on the number of workers.
"""
import itertools
import logging
import math
import multiprocessing
import os
import time

import numpy as np

from . import __version__
from .ensembles import (
    EmptyAnnulusError, adjust_lambda, covariance_convergence_sup, nearest_nonempty_lambda,
    sample_torus, src_sup, torus_annulus, torus_kernel,
)
from .geometry import (
    LocalSuiteResult, critical_points, critical_points_box, nodal_measure,
    nodal_measure_box, replica_statistics, sample_local_field, write_crit_csv,
    write_nodal_csv,
)
from .kacrice import (
    ORACLE_CRIT_INTENSITY, PUBLISHED_CRIT_INTENSITY, crit_intensity, decorrelation_profile,
    envelope_fit, factorial_to_variance, gram_crits, gram_jets, gram_zeros,
    near_diagonal_exponents, predicted_ball_variance, two_point_profile, zero_intensity,
)
from .kernel import (
    IsotropicKernel, ball_volume, kernel_derivative, plane_wave_partial_sum,
    profile_derivative,
)
from .predicate import FilterSet
from .report import ExperimentReport
from .util import WaveKacError, mean_and_se, relative_error, stream_rng

logger = logging.getLogger(__name__)

# Errors that abort a single cell; anything else aborts the run
CELL_ERRORS = (WaveKacError, np.linalg.LinAlgError)

# Step of the central differences in the kernel suite
FD_STEP = 1e-5

# Floor of the denominator of the finite difference relative error
FD_FLOOR = 1e-2


###
# Plumbing
###

def parallel_map(func, tasks, workers=1):
    """
    Maps func over tasks, in a process pool when workers > 1.
    Results come back in task order either way.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with multiprocessing.Pool(min(workers, len(tasks))) as pool:
        return pool.map(func, tasks, chunksize=1)


def _run_cell(report, label, func, *args, **kwargs):
    "Runs one cell, recording a module error on the report instead of raising"
    try:
        return func(*args, **kwargs)
    except CELL_ERRORS as e:
        logger.error("Cell %s failed: %s", label, e)
        report.add_cell(label, error="%s: %s" % (e.__class__.__name__, e))
        return None


def _targets_rng(config):
    return stream_rng(config.seed, config.experiment, "targets")


def _decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def _non_increasing(values):
    return all(b <= a for a, b in zip(values, values[1:]))


###
# Local statistics
###

def local_replica(task):
    "One field of a local experiment: statistics over the radius schedule"
    (seed, experiment, cell, replica, kind, param, n, direction_mode, radii, h, crit_h,
     statistics, filters) = task
    rng = stream_rng(seed, experiment, cell, replica)
    field = sample_local_field(kind, param, rng, None, n, direction_mode)
    return replica_statistics(field, radii, h, crit_h, statistics,
                              filters=FilterSet(filters) if filters else None)


def _local_rows(config, cell, param, statistic, workers):
    tasks = [(config.seed, config.experiment, cell, i, config.kind, param, config.n,
              config.direction_mode, config.radii, config.h, config.crit_h, (statistic,),
              config.filters) for i in range(config.replicas)]
    return parallel_map(local_replica, tasks, workers)


def _radius_index(config, key):
    r = config.options.get(key)
    if r is None:
        return len(config.radii) - 1
    if float(r) not in config.radii:
        raise WaveKacError("Radius %s=%g is not in the radius schedule" % (key, r))
    return config.radii.index(float(r))


def _local_table(report, config, param, statistic, rows):
    table = report.tables["replicas"]["rows"]
    for i, row in enumerate(rows):
        for j, r in enumerate(config.radii):
            table.append([param, i, r, row[statistic][j]])


def _variance_check(report, config, suite, statistic, label):
    radii = config.options.get("variance_radii")
    if not radii:
        return
    summary = dict((row["r"], row) for row in suite.summary(statistic))
    small, large = [summary.get(float(r)) for r in radii]
    if small is None or large is None:
        raise WaveKacError("variance_radii must be part of the radius schedule")
    report.add_check("variance_decay[%s]" % label, large["var"] < small["var"],
                     value=[small["var"], large["var"]], target="decreasing",
                     provenance="decay of the variance in r")
    return [small, large]


def _ball_variance(config, cell, R):
    """
    Kac-Rice prediction of Var[C_R], the variance of the critical
    count in B_R divided by vol(B_R), from the two-point profile
    on [0, 2R]
    """
    opts = config.options
    r_grid = np.linspace(opts.get("profile_r_min", 0.1), 2.0 * R,
                         opts.get("profile_points", 40))
    rng = stream_rng(config.seed, config.experiment, cell, "ball-variance r=%g" % R)
    profile = two_point_profile(r_grid, opts.get("profile_mc_samples", 20000), rng, 2)
    intensity = crit_intensity(2, "semi-analytic").value
    predicted = predicted_ball_variance(R, profile, intensity)
    area = ball_volume(2, R)
    predicted["statistic_variance"] = predicted["variance"] / (area * area)
    predicted["dropped"] = profile.dropped
    return predicted


def _ball_variance_checks(report, config, cell, label, rows, values):
    "Empirical Var[C_r] against the two-point prediction at the variance radii"
    if config.n != 2 or not config.options.get("predict_variance"):
        return
    tol = config.tolerances.get("ball_variance_ratio", 0.5)
    values["ball_variance"] = {}
    for row in rows:
        R = row["r"]
        predicted = _ball_variance(config, cell, R)
        ratio = row["var"] / predicted["statistic_variance"]
        values["ball_variance"]["r=%g" % R] = {"empirical": row["var"], "predicted": predicted,
                                               "ratio": ratio}
        report.add_check("ball_variance[%s, r=%g]" % (label, R), abs(ratio - 1.0) <= tol,
                         value=row["var"], target=predicted["statistic_variance"],
                         tolerance=tol, provenance="two-point Kac-Rice")


def _filter_summaries(config, rows, key):
    out = {}
    for text in config.filters:
        suite = LocalSuiteResult(config.radii, [row[key] for row in rows])
        out[text] = suite.summary(text)
    return out


def _unit_ball_monitor(config, cell, param, suite, workers):
    """
    Largest Z_1(1) over the monitor replicas, fields of their own
    evaluated on B_1 only. Without the monitor_replicas option the
    experiment's replicas are reused.
    """
    count = config.options.get("monitor_replicas")
    if not count:
        column = suite.values("zeros")[:, config.radii.index(1.0)]
        return {"replicas": config.replicas, "max": float(column.max()),
                "source": "experiment replicas"}
    stream = config.experiment + ":unit-ball"
    tasks = [(config.seed, stream, cell, i, config.kind, param, config.n,
              config.direction_mode, [1.0], config.h, config.crit_h, ("zeros",), [])
             for i in range(int(count))]
    column = [row["zeros"][0] for row in parallel_map(local_replica, tasks, workers)]
    return {"replicas": len(column), "max": float(max(column)),
            "source": "monitor replicas"}


def _local_zeros_cell(config, report, cell, param, targets, workers):
    label = "%s=%g" % ("M" if config.kind == "plane" else "param", param)
    rows = _local_rows(config, cell, param, "zeros", workers)
    suite = LocalSuiteResult(config.radii, rows)
    summary = suite.summary("zeros")
    values = {"param": param, "summary": summary,
              "lengths": suite.summary("lengths")}
    if 1.0 in config.radii:
        # Donnelly-Fefferman monitor: Z_1(1) stays bounded
        monitor = _unit_ball_monitor(config, cell, param, suite, workers)
        values["max_unit_ball"] = monitor["max"]
        values["unit_ball_monitor"] = monitor
    if config.filters:
        values["filtered"] = _filter_summaries(config, rows, "filtered_zeros")
    report.add_cell(label, **values)
    _local_table(report, config, param, "zeros", rows)

    idx = _radius_index(config, "mean_radius")
    mean = summary[idx]["mean"]
    target = targets["closed-form"]
    tol = config.tolerances.get("mean_rel", 0.02)
    report.add_check("mean[%s, r=%g]" % (label, config.radii[idx]),
                     relative_error(mean, target) <= tol, value=mean, target=target,
                     tolerance=tol, provenance="closed-form")
    _variance_check(report, config, suite, "zeros", label)


def run_local_zeros(config, report, workers):
    rng = _targets_rng(config)
    closed = zero_intensity(config.n, "closed-form")
    mc = zero_intensity(config.n, "conditional-MC", config.mc_samples, rng)
    report.add_cell("targets", closed_form=closed.to_dict(), conditional_mc=mc.to_dict())
    targets = {"closed-form": closed.value, "conditional-MC": mc.value}
    report.add_table("replicas", ["param", "replica", "r", "zeros"])
    for cell, param in enumerate(config.schedule):
        _run_cell(report, "param=%g" % param, _local_zeros_cell, config, report, cell, param,
                  targets, workers)


def _crit_targets(config):
    rng = _targets_rng(config)
    out = {"conditional-MC": crit_intensity(config.n, "conditional-MC", config.mc_samples, rng)}
    if config.n == 2:
        out["semi-analytic"] = crit_intensity(2, "semi-analytic")
    return out


# Estimates that decide which published constant the run supports. The
# semi-analytic value is excluded: it equals the oracle constant exactly.
SUPPORT_ESTIMATES = ("field", "conditional-MC")


def _supported_constant(estimates):
    "Which of the two published n=2 constants the independent estimates sit closer to"
    used = [estimates[k] for k in SUPPORT_ESTIMATES if k in estimates]
    mean = sum(used) / len(used)
    if abs(mean - ORACLE_CRIT_INTENSITY) < abs(mean - PUBLISHED_CRIT_INTENSITY):
        return "oracle"
    return "published"


def _local_crits_cell(config, report, cell, param, targets, workers):
    label = "%s=%g" % ("M" if config.kind == "plane" else "param", param)
    rows = _local_rows(config, cell, param, "crits", workers)
    suite = LocalSuiteResult(config.radii, rows)
    summary = suite.summary("crits")
    by_index = suite.values("crits_by_index")
    idx = _radius_index(config, "mean_radius")
    values = {"param": param, "summary": summary,
              "by_index": dict((str(q), float(by_index[:, idx, q].mean()))
                               for q in range(config.n + 1))}
    if config.filters:
        values["filtered"] = _filter_summaries(config, rows, "filtered_crits")

    estimates = {"field": summary[idx]["mean"]}
    for method, res in targets.items():
        estimates[method] = res.value
    values["estimates"] = estimates
    if config.n == 2:
        values["published_constant"] = PUBLISHED_CRIT_INTENSITY
        values["oracle_constant"] = ORACLE_CRIT_INTENSITY
        values["supports"] = _supported_constant(estimates)
        values["supports_from"] = [k for k in SUPPORT_ESTIMATES if k in estimates]
        if "semi-analytic" in estimates:
            values["semi_analytic"] = estimates["semi-analytic"]
        logger.info("Critical intensity estimates %s; published %.6f, oracle %.6f",
                    estimates, PUBLISHED_CRIT_INTENSITY, ORACLE_CRIT_INTENSITY)

    tol = config.tolerances.get("three_way_rel", 0.03)
    for a, b in itertools.combinations(sorted(estimates), 2):
        err = relative_error(estimates[a], estimates[b])
        report.add_check("agree[%s, %s vs %s]" % (label, a, b), err <= tol,
                         value=estimates[a], target=estimates[b], tolerance=tol,
                         provenance=b)
    variance_rows = _variance_check(report, config, suite, "crits", label)
    if variance_rows:
        _ball_variance_checks(report, config, cell, label, variance_rows, values)
    report.add_cell(label, **values)
    _local_table(report, config, param, "crits", rows)


def run_local_crits(config, report, workers):
    targets = _crit_targets(config)
    report.add_cell("targets", **dict((k.replace("-", "_").lower(), v.to_dict())
                                      for k, v in targets.items()))
    report.add_table("replicas", ["param", "replica", "r", "crits"])
    for cell, param in enumerate(config.schedule):
        _run_cell(report, "param=%g" % param, _local_crits_cell, config, report, cell, param,
                  targets, workers)


###
# Global torus statistics
###

def torus_replica(task):
    "Total nodal length and critical count of one torus wave over [0, 1)^n"
    seed, experiment, cell, replica, lam, n, h, statistic = task
    rng = stream_rng(seed, experiment, cell, replica)
    f = sample_torus(lam, rng, n)
    length = count = None
    if statistic == "zeros":
        length = nodal_measure_box(f, h).total_measure
    else:
        count = critical_points_box(f, h).count
    return {"length": length, "count": count}


def _global_grid(config, lam):
    "h = 2 pi / (c lambda), the wavelength resolved by c cells"
    return 2.0 * math.pi / (config.options.get("cells_per_wavelength", 25) * lam)


def _torus_cell(config, report, cell, lam, statistic, workers):
    lam_used = adjust_lambda(lam, config.n)
    if lam_used != lam:
        logger.info("lambda=%g has an empty window, using %g", lam, lam_used)
    h = _global_grid(config, lam_used)
    tasks = [(config.seed, config.experiment, cell, i, lam_used, config.n, h, statistic)
             for i in range(config.replicas)]
    rows = parallel_map(torus_replica, tasks, workers)
    table = report.tables["replicas"]["rows"]
    for i, row in enumerate(rows):
        table.append([lam_used, i, row["length"], row["count"]])

    if statistic == "zeros":
        normalized = [row["length"] / lam_used for row in rows]
    else:
        normalized = [row["count"] / lam_used ** config.n for row in rows]
    mean, var, se = mean_and_se(normalized)
    report.add_cell("lambda=%g" % lam, requested_lambda=lam, lam=lam_used, h=h,
                    dim=len(torus_annulus(lam_used, config.n)), mean=mean, var=var, se=se)
    return lam_used, mean, var


def _run_torus_global(config, report, workers, statistic):
    if statistic == "zeros":
        target = zero_intensity(config.n, "closed-form")
        report.add_cell("targets", closed_form=target.to_dict())
    else:
        targets = _crit_targets(config)
        report.add_cell("targets", **dict((k.replace("-", "_").lower(), v.to_dict())
                                          for k, v in targets.items()))
        target = targets.get("semi-analytic", targets["conditional-MC"])
    report.add_table("replicas", ["lambda", "replica", "length", "count"])

    results = []
    for cell, lam in enumerate(config.schedule):
        res = _run_cell(report, "lambda=%g" % lam, _torus_cell, config, report, cell, lam,
                        statistic, workers)
        if res is not None:
            results.append(res)

    # the torus has unit volume
    tol = config.tolerances.get("mean_rel", 0.05)
    for lam, mean, _ in results:
        report.add_check("mean[lambda=%g]" % lam, relative_error(mean, target.value) <= tol,
                         value=mean, target=target.value, tolerance=tol,
                         provenance=target.method)

    if len(results) > 1:
        lams = [r[0] for r in results]
        variances = [r[2] for r in results]
        exponent = (config.n - 1) / 2.0
        C = variances[0] * lams[0] ** exponent
        report.add_check("variance_decreasing", _decreasing(variances), value=variances,
                         target="decreasing in lambda", provenance="envelope")
        envelope = [C * lam ** -exponent for lam in lams]
        report.add_check("variance_envelope",
                         all(v <= e for v, e in zip(variances, envelope)),
                         value=variances, target=envelope,
                         provenance="C lambda^-%g calibrated at lambda=%g" % (exponent, lams[0]))


def run_torus_global_zeros(config, report, workers):
    _run_torus_global(config, report, workers, "zeros")


def run_torus_global_crits(config, report, workers):
    _run_torus_global(config, report, workers, "crits")


###
# Covariance diagnostics
###

def _src_cell(config, report, cell, kind, lam):
    opts = config.options
    rng = stream_rng(config.seed, config.experiment, cell, 0)
    value, witness = src_sup(kind, lam, opts.get("eps", 0.5), opts.get("max_order", 0),
                             opts.get("pair_budget", 2000), rng, config.n, witness=True)
    report.add_cell("%s=%g" % (kind, lam), kind=kind, lam=lam, src_sup=value,
                    witness=witness)
    return value, witness


def run_src_scan(config, report, workers):
    tol = config.tolerances.get("torus_src", 0.1)
    torus = []
    cell = 0
    for lam in config.schedule:
        res = _run_cell(report, "torus=%g" % lam, _src_cell, config, report, cell, "torus", lam)
        cell += 1
        if res is not None:
            torus.append((lam, res[0]))
    if torus:
        check_lam = config.options.get("check_lambda", torus[-1][0])
        for lam, value in torus:
            if lam == check_lam:
                report.add_check("torus_src[lambda=%g]" % lam, value < tol, value=value,
                                 target=0.0, tolerance=tol, provenance="short-range correlations")
        report.add_check("torus_src_non_increasing", _non_increasing([v for _, v in torus]),
                         value=[v for _, v in torus], target="non-increasing in lambda")

    sphere_tol = config.tolerances.get("sphere_src", 1e-9)
    for ell in config.options.get("sphere_schedule", []):
        res = _run_cell(report, "sphere=%g" % ell, _src_cell, config, report, cell, "sphere",
                        int(ell))
        cell += 1
        if res is None:
            continue
        value, witness = res
        # |P_l(-1)| = 1: the sphere never has short-range correlations
        report.add_check("sphere_src_witness[l=%d]" % ell, value >= 1.0 - sphere_tol,
                         value=value, target=1.0, tolerance=sphere_tol,
                         provenance="antipodal pair", note="SRC fails, witness %s" % witness)


def _limit_cell(config, report, label, kind, lam, **kwargs):
    opts = config.options
    value = covariance_convergence_sup(kind, lam, R=opts.get("R", 5.0),
                                       max_order=opts.get("max_order", 0), **kwargs)
    report.add_cell(label, kind=kind, lam=lam, sup=value)
    return value


def run_local_limit_scan(config, report, workers):
    opts = config.options
    resolution = opts.get("resolution", 20)
    torus = []
    for lam in config.schedule:
        value = _run_cell(report, "torus=%g" % lam, _limit_cell, config, report,
                          "torus=%g" % lam, "torus", lam,
                          resolution=resolution, n=config.n)
        if value is not None:
            torus.append((lam, value))
    tol = config.tolerances.get("torus_limit", 0.05)
    check_lam = opts.get("check_lambda")
    for lam, value in torus:
        if lam == check_lam:
            report.add_check("torus_limit[lambda=%g]" % lam, value < tol, value=value,
                             target=0.0, tolerance=tol, provenance="Bessel limit kernel")
    if len(torus) > 1:
        report.add_check("torus_limit_non_increasing", _non_increasing([v for _, v in torus]),
                         value=[v for _, v in torus], target="non-increasing in lambda")

    M = opts.get("plane_M")
    if M and config.n == 2:
        value = _run_cell(report, "plane=%d" % M, _limit_cell, config, report, "plane=%d" % M,
                          "plane", 1.0,
                          resolution=resolution, n=2, M=int(M), direction_mode="equispaced")
        if value is not None:
            tol = config.tolerances.get("plane_limit", 1e-3)
            report.add_check("plane_limit[M=%d]" % M, value < tol, value=value, target=0.0,
                             tolerance=tol, provenance="Bessel limit kernel")

    for ell in opts.get("sphere_schedule", []):
        _run_cell(report, "sphere=%g" % ell, _limit_cell, config, report, "sphere=%g" % ell,
                  "sphere", int(ell),
                  resolution=opts.get("sphere_resolution", 8))


def _l2_cell(config, report, lam):
    n = config.n
    lattice = torus_annulus(lam, n)
    if not len(lattice):
        nearest = nearest_nonempty_lambda(lam, n)
        raise EmptyAnnulusError("No lattice frequency in [%g, %g]; nearest usable lambda is %g"
                                % (lam, lam + 1, nearest), nearest)
    dim = len(lattice)
    # Pi_lambda has coefficient 1/dim on each of its dim modes
    parseval = float(np.sum(np.full(dim, 1.0 / dim) ** 2))

    # |Pi|^2 is a trigonometric polynomial of degree <= 2 kmax, so the
    # mean over N > 2 kmax equispaced nodes is its exact integral
    kmax = int(np.abs(lattice).max())
    N = 4 * kmax + 1
    ax = np.arange(N) / float(N)
    grids = np.meshgrid(*([ax] * n), indexing="ij")
    d = np.stack([g.ravel() for g in grids], axis=1)
    quadrature = float(np.mean(torus_kernel(lam, d, n) ** 2))

    exact = 1.0 / dim
    report.add_cell("lambda=%g" % lam, lam=lam, dim=dim, parseval=parseval,
                    quadrature=quadrature, nodes=N, exact=exact)
    report.add_check("parseval[lambda=%g]" % lam,
                     abs(parseval - exact) <= config.tolerances.get("parseval", 1e-12),
                     value=parseval, target=exact, tolerance=config.tolerances.get("parseval"),
                     provenance="1/dim")
    report.add_check("quadrature[lambda=%g]" % lam,
                     abs(quadrature - exact) <= config.tolerances.get("quadrature", 1e-10),
                     value=quadrature, target=exact,
                     tolerance=config.tolerances.get("quadrature"), provenance="1/dim")


def run_l2_identity(config, report, workers):
    for lam in config.schedule:
        _run_cell(report, "lambda=%g" % lam, _l2_cell, config, report, lam)


###
# Kac-Rice suites
###

def _ball_points(rng, n, m, radius):
    g = rng.standard_normal((m, n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g * radius * rng.uniform(size=(m, 1)) ** (1.0 / n)


def gram_configuration(task):
    "Smallest Gram eigenvalues of one random configuration"
    seed, experiment, cell, replica, n, max_points, radius = task
    rng = stream_rng(seed, experiment, cell, replica)
    m = int(rng.integers(1, max_points + 1))
    points = _ball_points(rng, n, m, radius)
    return {"m": m, "zeros": gram_zeros(points), "crits": gram_crits(points)}


def _gram_cell(config, report, cell, n, workers):
    opts = config.options
    tasks = [(config.seed, config.experiment, cell, i, n, opts.get("max_points", 6),
              opts.get("radius", 10.0)) for i in range(config.replicas)]
    rows = parallel_map(gram_configuration, tasks, workers)
    table = report.tables["configurations"]["rows"]
    for i, row in enumerate(rows):
        table.append([n, i, row["m"], row["zeros"], row["crits"]])

    origin = np.zeros((1, n))
    # trace Hess = -value for a unit frequency wave, so the full
    # one-point jet is singular; the gradient + Hessian jet is not
    one_point = gram_jets(origin, ("gradient", "hessian"))
    full_jet = gram_jets(origin, ("value", "gradient", "hessian"))
    r_grid = opts.get("decorrelation_r", [1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    norms = decorrelation_profile(n, r_grid)
    C, slope = envelope_fit(r_grid, norms)
    min_zeros = min(row["zeros"] for row in rows)
    min_crits = min(row["crits"] for row in rows)
    report.add_cell("n=%d" % n, n=n, configurations=len(rows), min_zeros=min_zeros,
                    min_crits=min_crits, one_point_gradient_hessian=one_point,
                    one_point_full_jet=full_jet,
                    decorrelation={"r": list(r_grid), "norm": norms, "C": C, "slope": slope})
    report.add_check("gram_zeros_positive[n=%d]" % n, min_zeros > 0, value=min_zeros,
                     target="> 0", provenance="linear independence of plane waves")
    report.add_check("gram_crits_positive[n=%d]" % n, min_crits > 0, value=min_crits,
                     target="> 0", provenance="linear independence of plane waves")
    report.add_check("one_point_jet_positive[n=%d]" % n, one_point > 0, value=one_point,
                     target="> 0", provenance="linear and quadratic functions on the sphere")


def run_gram_suite(config, report, workers):
    report.add_table("configurations", ["n", "configuration", "m", "zeros", "crits"])
    for cell, n in enumerate(config.options.get("dims", [config.n])):
        _run_cell(report, "n=%d" % n, _gram_cell, config, report, cell, int(n), workers)


def _two_point_table(report, name, res):
    rows = report.add_table(name, ["r", "den", "y", "y_se", "k2"])
    for i in range(len(res.r)):
        rows.append([res.r[i], res.den[i], res.y[i], res.y_se[i], res.k2[i]])


def _exponent_cell(config, report):
    opts = config.options
    r_grid = np.logspace(math.log10(opts.get("r_min", 1e-2)), math.log10(opts.get("r_max", 1e-1)),
                         opts.get("points", 10))
    rng = stream_rng(config.seed, config.experiment, 0, 0)
    res = near_diagonal_exponents(r_grid, config.mc_samples, rng, config.n)
    _two_point_table(report, "near_diagonal", res)
    report.add_cell("near-diagonal", slope_den=res.slope_den, slope_y=res.slope_y,
                    slope_sum=res.slope_den + res.slope_y, dropped=res.dropped)
    tol_den = config.tolerances.get("den_slope", 0.15)
    tol_y = config.tolerances.get("y_slope", 0.2)
    report.add_check("den_slope", abs(res.slope_den + config.n) <= tol_den, value=res.slope_den,
                     target=-config.n, tolerance=tol_den, provenance="O(r^-n) density")
    report.add_check("y_slope", abs(res.slope_y - 2.0) <= tol_y, value=res.slope_y,
                     target=2.0, tolerance=tol_y, provenance="O(r^2) numerator")


def run_exponent_suite(config, report, workers):
    _run_cell(report, "near-diagonal", _exponent_cell, config, report)


def _toy_checks(config, report):
    "Factorial moment bookkeeping on counts with known moments"
    tol = config.tolerances.get("poisson_toy", 1e-12)
    mu = 7.25
    poisson = factorial_to_variance(mu, mu * mu)
    report.add_check("factorial_moments[poisson]", abs(poisson - mu) <= tol * mu,
                     value=poisson, target=mu, tolerance=tol, provenance="Poisson moments")
    m, p = 12, 0.3
    binomial = factorial_to_variance(m * p, m * (m - 1) * p * p)
    target = m * p * (1 - p)
    report.add_check("factorial_moments[binomial]", abs(binomial - target) <= tol * target,
                     value=binomial, target=target, tolerance=tol, provenance="binomial moments")


def ball_crit_count(task):
    "Number of critical points of one plane wave in B_R"
    seed, experiment, cell, replica, M, R, crit_h, direction_mode = task
    rng = stream_rng(seed, experiment, cell, replica)
    field = sample_local_field("plane", M, rng, None, 2, direction_mode)
    return critical_points(field, np.zeros(2), R, crit_h).count


def _two_point_cell(config, report, workers):
    opts = config.options
    if config.n != 2:
        raise WaveKacError("The two-point suite is implemented for n = 2")
    R = opts.get("ball_radius", 3.0)
    r_grid = np.linspace(opts.get("r_min", 0.1), opts.get("r_max", 2 * R), opts.get("points", 30))
    rng = stream_rng(config.seed, config.experiment, 0, 0)
    profile = two_point_profile(r_grid, config.mc_samples, rng, 2)
    _two_point_table(report, "two_point", profile)
    intensity = crit_intensity(2, "semi-analytic").value
    predicted = predicted_ball_variance(R, profile, intensity)

    values = {"radius": R, "predicted": predicted, "dropped": profile.dropped}
    M = int(config.schedule[0]) if config.schedule else 256
    if config.replicas > 1:
        tasks = [(config.seed, config.experiment, 1, i, M, R, config.crit_h,
                  config.direction_mode) for i in range(config.replicas)]
        counts = parallel_map(ball_crit_count, tasks, workers)
        mean, var, se = mean_and_se(counts)
        values["empirical"] = {"mean": mean, "variance": var, "se": se,
                               "replicas": len(counts)}
    report.add_cell("ball", **values)


def run_two_point_suite(config, report, workers):
    _toy_checks(config, report)
    _run_cell(report, "ball", _two_point_cell, config, report, workers)


def _multi_indices(n, order):
    return [g for g in itertools.product(range(order + 1), repeat=n) if sum(g) <= order]


def _kernel_cell(config, report, cell, n):
    opts = config.options
    k = IsotropicKernel(n, "unit")

    # rho(r) = H(r^2/2) turns rho'' + (n-1)/r rho' + rho into n H' + r^2 H'' + H
    r = np.linspace(0.1, 20.0, 400)
    residual = n * profile_derivative(n, 1, r) + r * r * profile_derivative(n, 2, r) + \
        profile_derivative(n, 0, r)
    helmholtz = float(np.max(np.abs(residual)))

    rng = stream_rng(config.seed, config.experiment, cell, 0)
    count = opts.get("points", 25)
    radius = opts.get("point_radius", 10.0)
    u = _ball_points(rng, n, count, radius)
    v = _ball_points(rng, n, count, radius)
    separation = float(np.linalg.norm(u - v, axis=1).max())
    fd_err = 0.0
    for a in _multi_indices(n, 4):
        if not sum(a):
            continue
        i = next(j for j in range(n) if a[j])
        lower = tuple(x - (j == i) for j, x in enumerate(a))
        step = np.zeros(n)
        step[i] = FD_STEP
        for b in _multi_indices(n, 4 - sum(a)):
            exact = kernel_derivative(k, a, b, u, v)
            fd = (kernel_derivative(k, lower, b, u + step, v) -
                  kernel_derivative(k, lower, b, u - step, v)) / (2 * FD_STEP)
            err = np.abs(fd - exact) / np.maximum(np.abs(exact), FD_FLOOR)
            fd_err = max(fd_err, float(err.max()))

    K = opts.get("truncation", 40)
    pw_err = 0.0
    for j in range(count):
        point = _ball_points(rng, n, 1, 5.0)[0]
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        approx = plane_wave_partial_sum(n, point, w, K)
        pw_err = max(pw_err, abs(approx - np.exp(1j * np.dot(point, w))))

    report.add_cell("n=%d" % n, n=n, helmholtz=helmholtz, finite_difference=fd_err,
                    plane_wave=pw_err, max_separation=separation)
    for name, value in (("helmholtz", helmholtz), ("finite_difference", fd_err),
                        ("plane_wave", pw_err)):
        tol = config.tolerances.get(name)
        report.add_check("%s[n=%d]" % (name, n), tol is None or value < tol, value=value,
                         target=0.0, tolerance=tol, provenance="exact kernel")


def run_kernel_suite(config, report, workers):
    for cell, n in enumerate(config.options.get("dims", [config.n])):
        _run_cell(report, "n=%d" % n, _kernel_cell, config, report, cell, int(n))


CATALOG = {
    "local-zeros": run_local_zeros,
    "local-crits": run_local_crits,
    "torus-global-zeros": run_torus_global_zeros,
    "torus-global-crits": run_torus_global_crits,
    "src-scan": run_src_scan,
    "local-limit-scan": run_local_limit_scan,
    "l2-identity": run_l2_identity,
    "gram-suite": run_gram_suite,
    "exponent-suite": run_exponent_suite,
    "two-point-suite": run_two_point_suite,
    "kernel-suite": run_kernel_suite,
}


###
# Geometry dumps
###

def dump_geometry(config, out_dir):
    """
    Writes the nodal set or the critical points of replica 0 of
    cell 0 of a local or global torus experiment as CSV. Returns
    the written paths.
    """
    if not config.schedule:
        return []
    rng = stream_rng(config.seed, config.experiment, 0, 0)
    param = config.schedule[0]
    zeros = config.experiment.endswith("zeros")
    if config.experiment in ("local-zeros", "local-crits"):
        field = sample_local_field(config.kind, param, rng, None, config.n, config.direction_mode)
        center, rmax = np.zeros(config.n), config.radii[-1]
        if zeros:
            result = nodal_measure(field, center, rmax, config.h)
        else:
            result = critical_points(field, center, rmax, config.crit_h)
    elif config.experiment in ("torus-global-zeros", "torus-global-crits"):
        lam = adjust_lambda(param, config.n)
        field = sample_torus(lam, rng, config.n)
        h = _global_grid(config, lam)
        result = nodal_measure_box(field, h) if zeros else critical_points_box(field, h)
    else:
        return []

    os.makedirs(out_dir, exist_ok=True)
    if zeros:
        path = os.path.join(out_dir, "%s-nodal.csv" % config.experiment)
        write_nodal_csv(result, path)
    else:
        path = os.path.join(out_dir, "%s-crits.csv" % config.experiment)
        write_crit_csv(result, path)
    logger.info("Wrote geometry %s", path)
    return [path]


###
# Entry point
###

def run(config, workers=None):
    """
    Runs the experiment named by the config and returns its
    ExperimentReport. Module errors abort only the cell they occur
    in and are recorded on the report.
    """
    config.validate()
    workers = config.workers if workers is None else workers
    report = ExperimentReport(config, __version__)
    start = time.time()
    logger.info("Running %s with seed %d on %d worker(s)", config.experiment, config.seed, workers)
    CATALOG[config.experiment](config, report, workers)
    report.wall_clock = time.time() - start
    logger.info("Finished %s in %.1f sec, passed=%s", config.experiment, report.wall_clock,
                report.passed)
    return report
