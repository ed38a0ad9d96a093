import csv
import json
import os

import numpy as np
import pytest

from wavekac.config import ExperimentConfig
from wavekac.report import ExperimentReport, ReportWriteError, report_write, to_plain


def make_report(out="results"):
    config = ExperimentConfig.preset("l2-identity").override(out=out)
    report = ExperimentReport(config, "0.0.test")
    report.add_cell("lambda=50", dim=np.int64(20), value=np.float64(0.05))
    rows = report.add_table("modes", ["lambda", "dim"])
    rows.append([50.0, 20])
    report.add_check("parseval", True, value=0.05, target=0.05, tolerance=1e-12,
                     provenance="1/dim")
    return report


class TestToPlain(object):
    def test_numpy(self):
        out = to_plain({"a": np.arange(3), "b": np.float32(1.5), "c": np.bool_(True),
                        1: (np.int64(4),)})
        assert out == {"a": [0, 1, 2], "b": 1.5, "c": True, "1": [4]}
        assert type(out["a"][0]) is int

    def test_non_finite(self):
        assert to_plain([float("nan"), np.inf, 1.0]) == [None, None, 1.0]

    def test_passthrough(self):
        assert to_plain("text") == "text"
        assert to_plain(None) is None


class TestReport(object):
    def test_cells(self):
        report = make_report()
        assert report.cells[0]["cell"] == 0
        assert report.cells[0]["label"] == "lambda=50"
        cell = report.add_cell("other")
        assert cell["cell"] == 1

    def test_passed(self):
        report = make_report()
        assert report.passed
        report.add_check("quadrature", False, value=1.0, target=0.0)
        assert not report.passed

    def test_errors(self):
        report = make_report()
        report.add_cell("lambda=1", error="EmptyAnnulusError: no frequency")
        assert report.errors == ["EmptyAnnulusError: no frequency"]
        assert not report.passed

    def test_note(self):
        report = make_report()
        check = report.add_check("witness", True, note="antipodal")
        assert check["note"] == "antipodal"
        assert "note" not in report.checks[0]

    def test_payload_excludes_run_metadata(self):
        a = make_report()
        b = make_report()
        a.wall_clock = 1.0
        b.wall_clock = 99.0
        assert a.payload_json() == b.payload_json()
        assert "wall_clock" not in a.payload()

    def test_payload_ignores_run_fields(self):
        a = make_report(out="one")
        b = make_report(out="two")
        b.config.workers = 8
        assert a.payload_json() == b.payload_json()
        assert "workers" not in a.payload()["config"]
        assert "out" not in a.payload()["config"]
        assert b.to_dict()["run"] == {"workers": 8, "out": "two"}

    def test_to_dict(self):
        d = make_report().to_dict()
        assert d["schema_version"] == 1
        assert d["version"] == "0.0.test"
        assert d["experiment"] == "l2-identity"
        assert d["payload"]["config"]["experiment"] == "l2-identity"

    def test_strict_json(self):
        report = make_report()
        report.add_cell("bad", value=float("nan"))
        payload = json.loads(report.payload_json())
        assert payload["cells"][1]["value"] is None


class TestWrite(object):
    def test_write(self, tmpdir):
        report = make_report(str(tmpdir))
        paths = report_write(report)
        assert paths == [os.path.join(str(tmpdir), "l2-identity.json"),
                         os.path.join(str(tmpdir), "l2-identity-modes.csv")]
        with open(paths[0]) as fh:
            assert json.load(fh)["passed"] is True
        with open(paths[1]) as fh:
            rows = list(csv.reader(fh))
        assert rows == [["lambda", "dim"], ["50.0", "20"]]

    def test_formats(self, tmpdir):
        report = make_report()
        paths = report_write(report, str(tmpdir.join("sub")), formats=("csv",))
        assert len(paths) == 1
        assert paths[0].endswith(".csv")
        with pytest.raises(ValueError):
            report_write(report, str(tmpdir), formats=("xml",))

    def test_unwritable(self, tmpdir):
        blocker = tmpdir.join("file")
        blocker.write("")
        with pytest.raises(ReportWriteError) as exc:
            report_write(make_report(), str(blocker.join("out")))
        assert exc.value.path == str(blocker.join("out"))
