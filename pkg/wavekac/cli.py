"""
Command line interface.

    wavekac <experiment> [--config FILE] [--seed N] [--out DIR] [--check]
    wavekac kernel eval --n 2 --u 0 0 --v 1 0 [--a 1 0] [--b 0 0]
    wavekac sample {rwm,torus,sphere} ...
    wavekac kacrice {intensity,two-point,gram} ...

Experiments exit 0 on success, 2 when --check is given and an
acceptance check fails, 1 on a runtime error. Utility commands
print JSON to stdout.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ExperimentConfig
from .ensembles import DIRECTION_MODES, eval_jet, sample_rwm, sample_sphere, sample_torus
from .kacrice import crit_intensity, crit_two_point, gram_crits, gram_zeros, zero_intensity
from .kernel import NORMALIZATIONS, IsotropicKernel, kernel_derivative
from .lab import dump_geometry, run
from .report import report_write, to_plain
from .util import WaveKacError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

# Exceptions reported as "error: ..." with EXIT_ERROR instead of a traceback
USER_ERRORS = (WaveKacError, np.linalg.LinAlgError, ValueError)

LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _print_json(obj, out=None):
    out = out or sys.stdout
    out.write(json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n")


###
# Experiments
###

def _experiment_parser(sub, name):
    p = sub.add_parser(name, help="Run the %s experiment" % name)
    p.add_argument("--config", help="JSON config; missing keys take the preset values")
    p.add_argument("--n", type=int, default=2, help="Dimension of the preset (default 2)")
    p.add_argument("--seed", type=int, help="Master seed, overrides the config")
    p.add_argument("--out", help="Output directory, overrides the config")
    p.add_argument("--workers", type=int, help="Worker processes, overrides the config")
    p.add_argument("--replicas", type=int, help="Replicas per cell, overrides the config")
    p.add_argument("--check", action="store_true",
                   help="Exit 2 when an acceptance check fails")
    p.add_argument("--dump-geometry", action="store_true",
                   help="Also write the nodal set or critical points of one replica")
    p.set_defaults(handler=cmd_experiment, experiment=name)


def cmd_experiment(args):
    if args.config:
        config = ExperimentConfig.load(args.config)
        if config.experiment != args.experiment:
            raise WaveKacError("Config %s is for %s, not %s" % (
                args.config, config.experiment, args.experiment))
    else:
        config = ExperimentConfig.preset(args.experiment, args.n)
    config = config.override(seed=args.seed, out=args.out, workers=args.workers,
                             replicas=args.replicas)

    report = run(config)
    paths = report_write(report, config.out)
    if args.dump_geometry:
        paths.extend(dump_geometry(config, os.path.join(config.out, "geometry")))
    for path in paths:
        print(path)

    for check in report.checks:
        logger.info("%-40s %s", check["name"], "ok" if check["passed"] else "FAILED")
    if report.errors:
        for err in report.errors:
            sys.stderr.write("error: %s\n" % err)
        return EXIT_ERROR
    if args.check and not report.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


###
# Utilities
###

def cmd_kernel_eval(args):
    n = args.n
    k = IsotropicKernel(n, args.normalization)
    u = args.u or [0.0] * n
    v = args.v or [0.0] * n
    a = args.a or [0] * n
    b = args.b or [0] * n
    value = kernel_derivative(k, a, b, np.array(u, dtype=float), np.array(v, dtype=float))
    _print_json({"n": n, "normalization": args.normalization, "u": u, "v": v, "a": a, "b": b,
                 "value": value})
    return EXIT_OK


def _rng(args):
    return np.random.default_rng(args.seed)


def _sample_output(field, args):
    out = field.to_dict()
    if args.at:
        value, grad, hess = eval_jet(field, args.at)
        out["at"] = {"point": args.at, "value": value, "gradient": grad, "hessian": hess}
    _print_json(out)
    return EXIT_OK


def cmd_sample_rwm(args):
    return _sample_output(sample_rwm(args.n, args.M, args.mode, _rng(args)), args)


def cmd_sample_torus(args):
    return _sample_output(sample_torus(args.lam, _rng(args), args.n), args)


def cmd_sample_sphere(args):
    return _sample_output(sample_sphere(args.ell, _rng(args)), args)


def cmd_kacrice_intensity(args):
    if args.kind == "zero":
        res = zero_intensity(args.n, args.method, args.mc_samples, _rng(args))
    else:
        res = crit_intensity(args.n, args.method, args.mc_samples, _rng(args))
    _print_json(res.to_dict())
    return EXIT_OK


def cmd_kacrice_two_point(args):
    res = crit_two_point(args.r, args.mc_samples, _rng(args), args.n)
    _print_json(res.to_dict())
    return EXIT_OK


def cmd_kacrice_gram(args):
    coords = np.asarray(args.points, dtype=float)
    if coords.size % args.n:
        raise WaveKacError("Point coordinates must come in groups of %d" % args.n)
    points = coords.reshape(-1, args.n)
    func = gram_zeros if args.kind == "zeros" else gram_crits
    _print_json({"kind": args.kind, "points": points, "min_eigenvalue": func(points)})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="wavekac",
                                     description="Monochromatic random wave experiments",
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version="wavekac %s" % __version__)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="More logging, repeat for debug output")
    sub = parser.add_subparsers(dest="command")

    for name in EXPERIMENTS:
        _experiment_parser(sub, name)

    kernel = sub.add_parser("kernel", help="Evaluate the limit kernel")
    ksub = kernel.add_subparsers(dest="action")
    p = ksub.add_parser("eval", help="Mixed partial d_u^a d_v^b of the kernel")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--u", type=float, nargs="+")
    p.add_argument("--v", type=float, nargs="+")
    p.add_argument("--a", type=int, nargs="+")
    p.add_argument("--b", type=int, nargs="+")
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="unit")
    p.set_defaults(handler=cmd_kernel_eval)

    sample = sub.add_parser("sample", help="Draw one wave and print its coefficients")
    ssub = sample.add_subparsers(dest="action")
    p = ssub.add_parser("rwm", help="Plane wave model")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--M", type=int, default=256)
    p.add_argument("--mode", choices=DIRECTION_MODES, default="iid-uniform")
    p.set_defaults(handler=cmd_sample_rwm)
    p = ssub.add_parser("torus", help="Monochromatic wave on the flat torus")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--n", type=int, default=2)
    p.set_defaults(handler=cmd_sample_torus)
    p = ssub.add_parser("sphere", help="Random spherical harmonic")
    p.add_argument("--ell", type=int, required=True)
    p.set_defaults(handler=cmd_sample_sphere)
    for p in ssub.choices.values():
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--at", type=float, nargs="+", help="Also print the jet at this point")

    kacrice = sub.add_parser("kacrice", help="Kac-Rice computations")
    rsub = kacrice.add_subparsers(dest="action")
    p = rsub.add_parser("intensity", help="Zero or critical point intensity")
    p.add_argument("--kind", choices=("zero", "crit"), default="zero")
    p.add_argument("--method", default="closed-form")
    p.set_defaults(handler=cmd_kacrice_intensity)
    p = rsub.add_parser("two-point", help="Two-point critical density at one separation")
    p.add_argument("--r", type=float, required=True)
    p.set_defaults(handler=cmd_kacrice_two_point)
    p = rsub.add_parser("gram", help="Smallest Gram eigenvalue of a configuration")
    p.add_argument("--kind", choices=("zeros", "crits"), default="zeros")
    p.add_argument("--points", type=float, nargs="+", required=True,
                   help="Flattened point coordinates")
    p.set_defaults(handler=cmd_kacrice_gram)
    for p in rsub.choices.values():
        p.add_argument("--n", type=int, default=2)
        p.add_argument("--mc-samples", type=int, default=10 ** 5)
        p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = LOG_LEVELS[min(args.verbose, len(LOG_LEVELS) - 1)]
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if not hasattr(args, "handler"):
        parser.print_help()
        return EXIT_ERROR
    try:
        return args.handler(args)
    except USER_ERRORS as e:
        logger.debug("Command failed", exc_info=True)
        sys.stderr.write("error: %s\n" % e)
        return EXIT_ERROR
