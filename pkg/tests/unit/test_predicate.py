import numpy as np
import pytest

from wavekac import ast
from wavekac.predicate import JetFilter, InvalidFilter, jet_document


def saddle_jet():
    return (0.7, [0.3, 0.4], np.diag([-1.0, -2.0]))


class TestJetDocument(object):
    def test_fields(self):
        doc = jet_document([1.0, 2.0], saddle_jet(), center=[1.0, 1.0])
        assert doc["value"] == 0.7
        assert doc["grad_norm"] == pytest.approx(0.5)
        assert doc["hess_det"] == pytest.approx(2.0)
        assert doc["hess_trace"] == pytest.approx(-3.0)
        assert doc["q"] == 2
        assert not doc["degenerate"]
        assert doc["x"] == 1.0
        assert doc["y"] == 2.0
        assert doc["dist"] == pytest.approx(1.0)
        assert doc["grad"] == {"x": 0.3, "y": 0.4}

    def test_no_center(self):
        doc = jet_document([0.0, 0.0], saddle_jet())
        assert "dist" not in doc

    def test_degenerate(self):
        doc = jet_document([0.0, 0.0], (0.0, [0.0, 0.0], np.diag([1.0, 0.0])))
        assert doc["degenerate"]
        assert doc["q"] == 0


class TestFilter(object):
    def test_requires_str(self):
        with pytest.raises(TypeError):
            JetFilter(42)

    def test_valid(self):
        f = JetFilter("value >= 0.5 and q is 2")
        assert f.is_valid()
        assert f.errors() == []

    def test_lexer_error(self):
        f = JetFilter("value $ 2")
        assert not f.is_valid()
        assert f.errors()[0].startswith("Failed to parse characters $")

    def test_parser_error(self):
        f = JetFilter("value >= ")
        assert not f.is_valid()
        assert f.errors()

    def test_semantic_error(self):
        f = JetFilter("{1 2} > q")
        assert not f.is_valid()
        assert "cannot compare a set" in f.errors()[0]

    def test_invalid_raises(self):
        f = JetFilter("value >= ")
        with pytest.raises(InvalidFilter):
            f.evaluate({})
        with pytest.raises(InvalidFilter):
            f.description()
        with pytest.raises(InvalidFilter):
            f.weight([0.0, 0.0], saddle_jet())

    def test_evaluate(self):
        f = JetFilter("value >= 0.5 and q is 2")
        assert f.evaluate(jet_document([1.0, 2.0], saddle_jet()))
        assert not f.evaluate({"value": 0.2, "q": 2})

    def test_nested_identifier(self):
        f = JetFilter("grad.x < grad.y")
        assert f.evaluate(jet_document([0.0, 0.0], saddle_jet()))

    def test_missing_identifier(self):
        f = JetFilter("dist < 3")
        assert not f.evaluate(jet_document([0.0, 0.0], saddle_jet()))
        f = JetFilter("dist is undefined")
        assert f.evaluate(jet_document([0.0, 0.0], saddle_jet()))

    def test_description(self):
        f = JetFilter("q is 2")
        assert f.description() == ("IS comparison at line: 1, col 3\n"
                                   "\tIdentifier q at line: 1, col 1\n"
                                   "\tNumber 2 at line: 1, col 6\n")

    def test_identifiers(self):
        f = JetFilter("{0 2} contains q and dist < 10")
        assert f.identifiers() == set(["q", "dist"])

    def test_analyze(self):
        f = JetFilter("value > 1")
        res, ctx = f.analyze({"value": 0.5})
        assert not res
        assert ctx.failed == ["> comparison at line: 1, col 7 failed, left: 0.5, right: 1.0"]

    def test_resolver(self):
        f = JetFilter("level > 1")
        f.set_resolver("level", 2)
        assert f.evaluate({})
        f.set_resolver("level", lambda doc: doc["value"] * 10)
        assert not f.evaluate({"value": 0.05})
        assert f.evaluate({"value": 0.5})

    def test_document_before_resolver(self):
        f = JetFilter("level > 1")
        f.set_resolver("level", 0)
        assert f.evaluate({"level": 5})

    def test_weight(self):
        f = JetFilter("q is 2")
        assert f.weight([0.0, 0.0], saddle_jet()) == 1.0
        assert f([0.0, 0.0], (0.0, [0.0, 0.0], np.eye(2))) == 0.0

    def test_call_with_center(self):
        f = JetFilter("dist < 3")
        assert f([1.0, 1.0], saddle_jet(), center=[0.0, 0.0]) == 1.0
        assert f([5.0, 0.0], saddle_jet(), [0.0, 0.0]) == 0.0
        # without a center dist is undefined
        assert f([1.0, 1.0], saddle_jet()) == 0.0

    def test_weights(self):
        f = JetFilter("value > 0")
        locations = np.zeros((3, 2))
        vals = np.array([1.0, -1.0, 2.0])
        grads = np.zeros((3, 2))
        hess = np.array([np.eye(2)] * 3)
        assert list(f.weights(locations, (vals, grads, hess))) == [1.0, 0.0, 1.0]

    def test_undefined_constant(self):
        f = JetFilter("undefined")
        assert f.is_valid()
        assert not f.evaluate({})
        assert isinstance(f.ast, ast.Undefined)
