__version__ = "0.1.0"

from .config import ExperimentConfig, ConfigError
from .kernel import IsotropicKernel
from .lab import run
from .predicate import JetFilter, FilterSet, InvalidFilter
from .report import ExperimentReport, report_write
from .util import WaveKacError

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "ExperimentReport",
    "FilterSet",
    "InvalidFilter",
    "IsotropicKernel",
    "JetFilter",
    "WaveKacError",
    "report_write",
    "run",
]
