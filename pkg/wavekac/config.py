"""
Experiment configuration. An ExperimentConfig holds everything
that determines a run; together with its seed it fixes every
estimator of the report bit for bit.
"""
import copy
import json
import logging

from .ensembles import DIRECTION_MODES, KINDS
from .util import WaveKacError

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "local-zeros",
    "local-crits",
    "torus-global-zeros",
    "torus-global-crits",
    "src-scan",
    "local-limit-scan",
    "l2-identity",
    "gram-suite",
    "exponent-suite",
    "two-point-suite",
    "kernel-suite",
)

FIELDS = ("experiment", "kind", "n", "schedule", "radii", "h", "crit_h", "replicas",
          "seed", "tolerances", "filters", "mc_samples", "direction_mode", "options",
          "workers", "out")

# Fields that only affect how a run executes, never its numbers
RUN_FIELDS = ("workers", "out")


class ConfigError(WaveKacError):
    "Raised for invalid or unreadable experiment configurations"
    pass


class ExperimentConfig(object):
    def __init__(self, experiment, kind="plane", n=2, schedule=(), radii=(), h=0.02,
                 crit_h=0.15, replicas=1, seed=0, tolerances=None, filters=None,
                 mc_samples=10 ** 5, direction_mode="iid-uniform", options=None,
                 workers=1, out="results"):
        """
        Defines one experiment run. Parameters:
        -`experiment` - Experiment id, one of EXPERIMENTS.

        -`kind` - Ensemble: plane, torus or sphere.

        -`n` - Dimension of the rescaled fields.

        -`schedule` - The spectral schedule: M values for the plane
          wave model, lambda values for the torus, degrees l for
          the sphere.

        -`radii` - Increasing radii r of the local statistics.

        -`h`, `crit_h` - Grid spacings of the nodal and critical
          point scans. Global torus runs derive theirs from lambda.

        -`replicas` - Independent fields per cell.

        -`seed` - Master seed; every replica stream derives from it.

        -`tolerances` - Named acceptance tolerances.

        -`filters` - Jet filter texts evaluated as extra test functions.

        -`mc_samples` - Monte Carlo draws for the Kac-Rice estimators.

        -`options` - Experiment specific parameters.

        -`workers` - Worker processes. Never changes the numbers.

        -`out` - Output directory of the report.
        """
        self.experiment = experiment
        self.kind = kind
        self.n = n
        self.schedule = list(schedule)
        self.radii = list(radii)
        self.h = h
        self.crit_h = crit_h
        self.replicas = replicas
        self.seed = seed
        self.tolerances = dict(tolerances or {})
        self.filters = list(filters or [])
        self.mc_samples = mc_samples
        self.direction_mode = direction_mode
        self.options = dict(options or {})
        self.workers = workers
        self.out = out

    def __repr__(self):
        return "ExperimentConfig(%r, kind=%r, n=%d, seed=%d)" % (
            self.experiment, self.kind, self.n, self.seed)

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return False
        return self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def validate(self):
        "Raises ConfigError on the first invalid field, returns self"
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("Unknown experiment %r" % (self.experiment,))
        if self.kind not in KINDS:
            raise ConfigError("Unknown ensemble kind %r" % (self.kind,))
        if self.direction_mode not in DIRECTION_MODES:
            raise ConfigError("Unknown direction mode %r" % (self.direction_mode,))
        if not isinstance(self.n, int) or self.n not in (2, 3):
            raise ConfigError("Dimension must be 2 or 3, got %r" % (self.n,))
        if any(not x > 0 for x in self.schedule):
            raise ConfigError("Schedule values must be positive")
        if any(not r > 0 for r in self.radii) or sorted(self.radii) != self.radii:
            raise ConfigError("Radii must be positive and increasing")
        if not self.h > 0 or not self.crit_h > 0:
            raise ConfigError("Grid spacings must be positive")
        if not isinstance(self.replicas, int) or self.replicas < 1:
            raise ConfigError("Need at least one replica")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("Seed must be a non-negative integer")
        if not isinstance(self.mc_samples, int) or self.mc_samples < 1:
            raise ConfigError("mc_samples must be a positive integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("Need at least one worker")
        for name, tol in self.tolerances.items():
            if not isinstance(tol, (int, float)) or tol < 0:
                raise ConfigError("Tolerance %s must be a non-negative number" % name)
        for text in self.filters:
            if not isinstance(text, str):
                raise ConfigError("Filters must be strings, got %r" % (text,))
        return self

    def to_dict(self):
        "A JSON ready copy of every field"
        return dict((name, copy.deepcopy(getattr(self, name))) for name in FIELDS)

    def numeric_dict(self):
        "to_dict without the RUN_FIELDS"
        return dict((name, value) for name, value in self.to_dict().items()
                    if name not in RUN_FIELDS)

    @classmethod
    def from_dict(cls, raw):
        "Builds and validates a config; unknown keys are rejected"
        if not isinstance(raw, dict):
            raise ConfigError("Config must be a mapping")
        unknown = set(raw) - set(FIELDS)
        if unknown:
            raise ConfigError("Unknown config keys: %s" % ", ".join(sorted(unknown)))
        if "experiment" not in raw:
            raise ConfigError("Config is missing the experiment id")
        try:
            return cls(**raw).validate()
        except TypeError as e:
            raise ConfigError("Config has a field of the wrong type: %s" % e)

    @classmethod
    def load(cls, path):
        """
        Reads a JSON config. Keys that are not given take the
        preset values of the experiment.
        """
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (IOError, OSError) as e:
            raise ConfigError("Cannot read config %s: %s" % (path, e))
        except ValueError as e:
            raise ConfigError("Config %s is not valid JSON: %s" % (path, e))
        if not isinstance(raw, dict) or "experiment" not in raw:
            raise ConfigError("Config %s is missing the experiment id" % path)
        base = cls.preset(raw["experiment"], n=raw.get("n", 2)).to_dict()
        unknown = set(raw) - set(FIELDS)
        if unknown:
            raise ConfigError("Unknown config keys: %s" % ", ".join(sorted(unknown)))
        base.update(raw)
        logger.debug("Loaded config %s", path)
        return cls.from_dict(base)

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def override(self, **kwargs):
        "Returns a validated copy with the given non-None fields replaced"
        raw = self.to_dict()
        for key, val in kwargs.items():
            if val is not None:
                raw[key] = val
        return ExperimentConfig.from_dict(raw)

    @classmethod
    def preset(cls, experiment, n=2):
        """
        Returns the default configuration of an experiment, the
        schedules and tolerances its acceptance checks refer to.
        n=3 selects the three dimensional variant where one exists.
        """
        if experiment not in EXPERIMENTS:
            raise ConfigError("Unknown experiment %r" % (experiment,))
        if n not in (2, 3):
            raise ConfigError("Dimension must be 2 or 3, got %r" % (n,))
        return getattr(cls, "_preset_" + experiment.replace("-", "_"))(n)

    @classmethod
    def _preset_local_zeros(cls, n):
        if n == 3:
            return cls("local-zeros", kind="plane", n=3, schedule=[256], radii=[8.0], h=0.1,
                       replicas=50, tolerances={"mean_rel": 0.04},
                       options={"mean_radius": 8.0})
        return cls("local-zeros", kind="plane", n=2, schedule=[256],
                   radii=[1.0, 10.0, 15.0, 40.0], h=0.02, replicas=200,
                   tolerances={"mean_rel": 0.02},
                   options={"mean_radius": 15.0, "variance_radii": [10.0, 40.0],
                            "monitor_replicas": 10 ** 4})

    @classmethod
    def _preset_local_crits(cls, n):
        options = {"mean_radius": 20.0, "variance_radii": [10.0, 40.0], "predict_variance": True}
        if n == 3:
            return cls("local-crits", kind="plane", n=3, schedule=[256], radii=[6.0],
                       crit_h=0.15, replicas=50, mc_samples=10 ** 6,
                       tolerances={"three_way_rel": 0.05},
                       options={"mean_radius": 6.0})
        return cls("local-crits", kind="plane", n=2, schedule=[256], radii=[10.0, 20.0, 40.0],
                   crit_h=0.15, replicas=200, mc_samples=10 ** 7,
                   tolerances={"three_way_rel": 0.03, "ball_variance_ratio": 0.5},
                   filters=["value >= 0.5 and q is 2", "{0 2} contains q"],
                   options=options)

    @classmethod
    def _preset_torus_global_zeros(cls, n):
        return cls("torus-global-zeros", kind="torus", n=n, schedule=[100.0, 200.0, 400.0],
                   replicas=100, tolerances={"mean_rel": 0.05},
                   options={"cells_per_wavelength": 25})

    @classmethod
    def _preset_torus_global_crits(cls, n):
        return cls("torus-global-crits", kind="torus", n=n, schedule=[100.0, 200.0, 400.0],
                   replicas=100, mc_samples=10 ** 6, tolerances={"mean_rel": 0.05},
                   options={"cells_per_wavelength": 25})

    @classmethod
    def _preset_src_scan(cls, n):
        return cls("src-scan", kind="torus", n=n, schedule=[100.0, 200.0, 400.0, 800.0],
                   tolerances={"torus_src": 0.1, "sphere_src": 1e-9},
                   options={"eps": 0.5, "max_order": 0, "pair_budget": 2000,
                            "check_lambda": 400.0, "sphere_schedule": [25, 50, 100]})

    @classmethod
    def _preset_local_limit_scan(cls, n):
        return cls("local-limit-scan", kind="torus", n=n, schedule=[100.0, 200.0, 400.0, 800.0],
                   tolerances={"torus_limit": 0.05, "plane_limit": 1e-3},
                   options={"R": 5.0, "max_order": 0, "resolution": 20, "check_lambda": 400.0,
                            "plane_M": 256, "sphere_schedule": [100], "sphere_resolution": 8})

    @classmethod
    def _preset_l2_identity(cls, n):
        return cls("l2-identity", kind="torus", n=n, schedule=[50.0, 100.0],
                   tolerances={"parseval": 1e-12, "quadrature": 1e-10})

    @classmethod
    def _preset_gram_suite(cls, n):
        return cls("gram-suite", kind="plane", n=n, replicas=1000,
                   options={"max_points": 6, "radius": 10.0, "dims": [2, 3],
                            "decorrelation_r": [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]})

    @classmethod
    def _preset_exponent_suite(cls, n):
        return cls("exponent-suite", kind="plane", n=2, mc_samples=2 * 10 ** 5,
                   tolerances={"den_slope": 0.15, "y_slope": 0.2},
                   options={"r_min": 1e-2, "r_max": 1e-1, "points": 10})

    @classmethod
    def _preset_two_point_suite(cls, n):
        return cls("two-point-suite", kind="plane", n=2, schedule=[256], replicas=50,
                   crit_h=0.15, mc_samples=10 ** 5,
                   tolerances={"poisson_toy": 1e-12},
                   options={"r_min": 0.1, "r_max": 6.0, "points": 30, "ball_radius": 3.0})

    @classmethod
    def _preset_kernel_suite(cls, n):
        return cls("kernel-suite", kind="plane", n=n,
                   tolerances={"helmholtz": 1e-8, "finite_difference": 1e-6,
                               "plane_wave": 1e-8},
                   options={"dims": [2, 3], "truncation": 40, "points": 25,
                            "point_radius": 10.0})
