"""
Textual test functions for the local and global statistics.
A JetFilter is parsed once and evaluated against the jet
document of each nodal element or critical point, acting as
the weight 1{filter holds}.
"""
import numpy as np

from .parser import get_lexer, get_parser
from . import ast
from .util import WaveKacError


class InvalidFilter(WaveKacError):
    "Raised for evaluation of an invalid filter"
    pass


def jet_document(location, jet, center=None):
    """
    Builds the document a filter is evaluated against from a
    location and its jet (value, gradient, hessian).
    """
    value, grad, hess = jet
    location = np.asarray(location, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    eig = np.linalg.eigvalsh(hess)
    det = float(np.prod(eig))
    doc = {
        "value": float(value),
        "grad_norm": float(np.linalg.norm(grad)),
        "hess_det": det,
        "hess_trace": float(np.trace(hess)),
        "q": int(np.sum(eig < 0)),
        "degenerate": abs(det) < 1e-10,
        "grad": dict(zip("xyz", (float(g) for g in grad))),
    }
    for name, coord in zip("xyz", location):
        doc[name] = float(coord)
    if center is not None:
        doc["dist"] = float(np.linalg.norm(location - np.asarray(center, dtype=float)))
    return doc


class LiteralResolver(object):
    "Mixin to provide identifier resolution"
    def __init__(self):
        self.resolvers = {}

    def set_resolver(self, identifier, relv):
        """
        Sets a custom resolver. If resolve_identifier cannot
        find the identifier in the document, and there is a matching
        resolver, that resolver will be used. If the resolver is
        callable, it is invoked with the document, otherwise it is
        returned as is.
        """
        self.resolvers[identifier] = relv

    def resolve_identifier(self, document, identifier):
        """
        Resolves identifiers in the scope of the document while
        evaluating the filter. Sub-classes can override this to
        change the default behavior.
        """
        if identifier in document:
            return document[identifier]

        # Allow the dot syntax for nested lookup, grad.x = doc["grad"]["x"]
        if "." in identifier:
            root = document
            for part in identifier.split("."):
                if isinstance(root, dict) and part in root:
                    root = root[part]
                else:
                    break
            else:
                return root

        if identifier in self.resolvers:
            relv = self.resolvers[identifier]
            if callable(relv):
                return relv(document)
            return relv

        return ast.Undefined()


class JetFilter(LiteralResolver):
    """
    Parses and evaluates a jet filter such as `value >= 0.5 and q is 2`.
    Also usable directly as a weight for geometry statistics.
    """
    def __init__(self, text, debug=0):
        if not isinstance(text, str):
            raise TypeError("Filter must be a string!")
        LiteralResolver.__init__(self)
        self.text = text

        lexer = get_lexer()
        self.lexer_errors = lexer.errors
        p = get_parser(lexer=lexer, debug=debug)
        self.parser_errors = p.errors

        try:
            self.ast = p.parse(self.text, lexer=lexer)
            self.ast_validated = False
            self.ast_valid = False
            self.ast_errors = None
        except SyntaxError as e:
            self.ast = None
            self.ast_validated = True
            self.ast_valid = False
            self.ast_errors = {"errors": [str(e)]}

        if not self.lexer_errors:
            self.lexer_errors = None
        if not self.parser_errors:
            self.parser_errors = None

    def __repr__(self):
        return "JetFilter(%r)" % self.text

    def is_valid(self):
        "Checks if the filter is valid"
        if self.ast_validated:
            return self.ast_valid
        if self.lexer_errors or self.parser_errors or not self.ast:
            return False

        self.ast_validated = True
        self.ast_valid, self.ast_errors = self.ast.validate()
        if self.ast_valid:
            self.ast_errors = None
        return self.ast_valid

    def errors(self):
        "Returns the list of lexer, parser and semantic errors"
        errors = []
        if self.lexer_errors:
            for char, pos, line in self.lexer_errors:
                errors.append("Failed to parse characters %s at line %d, col %d" % (char, line, pos))
        if self.parser_errors:
            for err in self.parser_errors:
                if isinstance(err, tuple) and len(err) == 5:
                    _, _, val, pos, line = err
                    errors.append("Syntax error with %s at line %d, col %d" % (val, line, pos))
                else:
                    errors.append(str(err))
        if self.ast_errors:
            errors.extend(self.ast_errors["errors"])
        return errors

    def description(self, max_depth=0):
        "Provides a tree like human readable description of the filter"
        if not self.is_valid():
            raise InvalidFilter("Invalid filter %r" % self.text)
        return self.ast.description(max_depth=max_depth)

    def identifiers(self):
        if not self.is_valid():
            raise InvalidFilter("Invalid filter %r" % self.text)
        return self.ast.identifiers()

    def evaluate(self, document):
        "Evaluates the filter against the document"
        if not self.is_valid():
            raise InvalidFilter("Invalid filter %r" % self.text)
        return self.ast.evaluate(self, document)

    def analyze(self, document):
        """
        Evaluates the filter while collecting failure reasons.
        Returns (result, ctx); ctx.failed lists the reasons in
        order and ctx.identifiers the resolved values.
        """
        if not self.is_valid():
            raise InvalidFilter("Invalid filter %r" % self.text)
        return self.ast.analyze(self, document)

    def weight(self, location, jet, center=None):
        "1.0 when the filter holds at the location, else 0.0"
        return 1.0 if self.evaluate(jet_document(location, jet, center)) else 0.0

    def weights(self, locations, jets, center=None):
        "Batched weight over arrays of locations and jets"
        vals, grads, hess = jets
        return np.array([self.weight(locations[i], (vals[i], grads[i], hess[i]), center)
                         for i in range(len(locations))])

    def __call__(self, location, jet, center=None):
        return self.weight(location, jet, center)


class FilterSet(object):
    """
    A naive set of filters evaluated sequentially against
    the same documents.
    """
    def __init__(self, filters=None):
        self.filters = []
        if filters:
            self.update(filters)

    def __len__(self):
        return len(self.filters)

    def add(self, f):
        self.update([f])

    def update(self, filters):
        "Adds filters, given as JetFilter objects or strings"
        parsed = [f if isinstance(f, JetFilter) else JetFilter(f) for f in filters]
        for f in parsed:
            if not f.is_valid():
                raise InvalidFilter("Invalid filter %r: %s" % (f.text, "; ".join(f.errors())))
        for f in parsed:
            if f.text not in [g.text for g in self.filters]:
                self.filters.append(f)

    def evaluate(self, doc):
        "Returns the list of filters matching the document"
        return [f for f in self.filters if f.evaluate(doc)]

    def weight_table(self, locations, jets, center=None):
        """
        Evaluates every filter at every location, building each
        jet document once. Returns {filter text: weights array}.
        """
        vals, grads, hess = jets
        table = dict((f.text, np.zeros(len(locations))) for f in self.filters)
        for i in range(len(locations)):
            doc = jet_document(locations[i], (vals[i], grads[i], hess[i]), center)
            for f in self.evaluate(doc):
                table[f.text][i] = 1.0
        return table
