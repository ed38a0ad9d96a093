"""
Experiment reports and their writers. The report separates the
numerical payload (config echo, cells, tables, checks), which is
a pure function of the config, from the run metadata (version,
worker count, output directory, wall-clock), so repeated runs can
be compared byte for byte.
"""
import csv
import json
import logging
import math
import os

import numpy as np

from .util import WaveKacError

logger = logging.getLogger(__name__)

# Bumped whenever the JSON layout or a CSV column set changes
SCHEMA_VERSION = 1

FORMATS = ("json", "csv")


class ReportWriteError(WaveKacError):
    "Raised when a report file cannot be written"
    def __init__(self, msg, path):
        WaveKacError.__init__(self, msg)
        self.path = path


def to_plain(obj):
    """
    Converts numpy scalars and arrays into plain Python values and
    non-finite floats into None, recursively, so the result is
    strict JSON.
    """
    if isinstance(obj, dict):
        return dict((str(k), to_plain(v)) for k, v in obj.items())
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


class ExperimentReport(object):
    """
    Result of one experiment run. Cells hold the per-cell estimates
    (or the error that aborted the cell), tables the rows exported
    as CSV, and checks the acceptance verdicts.
    """
    def __init__(self, config, version):
        self.config = config
        self.version = version
        self.cells = []
        self.tables = {}
        self.checks = []
        self.wall_clock = 0.0

    def __repr__(self):
        return "ExperimentReport(%r, cells=%d, checks=%d, passed=%s)" % (
            self.config.experiment, len(self.cells), len(self.checks), self.passed)

    def add_cell(self, label, **values):
        cell = {"cell": len(self.cells), "label": label}
        cell.update(values)
        self.cells.append(cell)
        return cell

    def add_table(self, name, columns):
        self.tables[name] = {"columns": list(columns), "rows": []}
        return self.tables[name]["rows"]

    def add_check(self, name, passed, value=None, target=None, tolerance=None,
                  provenance=None, note=None):
        """
        Records an acceptance check. `provenance` labels where the
        target comes from, e.g. closed-form or conditional-MC.
        """
        check = {"name": name, "passed": bool(passed), "value": value, "target": target,
                 "tolerance": tolerance, "provenance": provenance}
        if note:
            check["note"] = note
        self.checks.append(check)
        if not passed:
            logger.warning("Check %s failed: value=%s target=%s tolerance=%s",
                           name, value, target, tolerance)
        return check

    @property
    def passed(self):
        "True when every check passed and no cell errored"
        return all(c["passed"] for c in self.checks) and \
            not any("error" in cell for cell in self.cells)

    @property
    def errors(self):
        return [cell["error"] for cell in self.cells if "error" in cell]

    def payload(self):
        "The numerical part of the report, a function of the config alone"
        return to_plain({
            "config": self.config.numeric_dict(),
            "cells": self.cells,
            "tables": self.tables,
            "checks": self.checks,
        })

    def payload_json(self):
        return json.dumps(self.payload(), sort_keys=True, allow_nan=False)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "version": self.version,
            "experiment": self.config.experiment,
            "passed": self.passed,
            "wall_clock": round(self.wall_clock, 3),
            "run": {"workers": self.config.workers, "out": self.config.out},
            "payload": self.payload(),
        }


def _write_json(report, path):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_csv(table, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table["columns"])
        for row in table["rows"]:
            writer.writerow(["" if v is None else v for v in to_plain(row)])


def report_write(report, out_dir=None, formats=FORMATS):
    """
    Writes <experiment>.json and one <experiment>-<table>.csv per
    table into out_dir (default the config's out directory).
    Returns the written paths.
    """
    out_dir = out_dir or report.config.out
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError("Unknown report format %r" % (fmt,))

    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ReportWriteError("Cannot create output directory %s: %s" % (out_dir, e), out_dir)

    name = report.config.experiment
    written = []
    jobs = []
    if "json" in formats:
        jobs.append((os.path.join(out_dir, name + ".json"), _write_json, report))
    if "csv" in formats:
        for table in sorted(report.tables):
            path = os.path.join(out_dir, "%s-%s.csv" % (name, table))
            jobs.append((path, _write_csv, report.tables[table]))
    for path, writer, obj in jobs:
        try:
            writer(obj, path)
        except (IOError, OSError) as e:
            raise ReportWriteError("Cannot write %s: %s" % (path, e), path)
        logger.info("Wrote %s", path)
        written.append(path)
    return written
