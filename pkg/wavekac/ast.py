"""
This module provides the AST nodes that are used to
represent and later, evaluate a jet filter.
"""
import operator
from functools import wraps


class EvalContext(object):
    """
    Provides a context for the evaluation.
    Allows for transient state that is needed during
    an evaluation.
    """
    def __init__(self, jet_filter, doc, analyze=False):
        self.filter = jet_filter
        self.doc = doc
        self.identifiers = {}
        self.failed = []
        self.analyze = analyze
        self._analyze = analyze

    def __enter__(self):
        self.analyze = False

    def __exit__(self, exc_type=None, exc_val=None, exc_tb=None):
        self.analyze = self._analyze

    def resolve_identifier(self, ident):
        return self.filter.resolve_identifier(self.doc, ident)


def failure_info(func):
    "Helper to provide error information on failure"
    @wraps(func)
    def wrapper(self, ctx):
        r = func(self, ctx)
        if not r and ctx.analyze:
            self.failure_info(ctx)
        return r
    return wrapper


class Node(object):
    "Root object in the AST tree"
    # Unknown default position
    position = "line: ?, col: ?"

    def set_position(self, line, col):
        self.position = "line: %d, col %d" % (line, col)

    def children(self):
        "The operand nodes, left before right"
        return [getattr(self, side) for side in ("left", "right") if hasattr(self, side)]

    def name(self):
        "Provides human name with location"
        return "%s at %s" % (self.__class__.__name__, self.position)

    def description(self, buf=None, depth=0, max_depth=0):
        "Indented tree of node names, cut at max_depth when given"
        buf = buf or ""
        pad = "\t" * depth
        if max_depth and depth == max_depth:
            return buf + pad + "...\n"
        buf += pad + self.name() + "\n"
        for child in self.children():
            buf = child.description(buf, depth + 1, max_depth)
        return buf

    def __repr__(self):
        parts = [self.__class__.__name__]
        if hasattr(self, "type"):
            parts.append("t:%s" % self.type)
        if hasattr(self, "value"):
            parts.append("v:%s" % (self.value,))
        for tag, child in zip(("l", "r"), self.children()):
            parts.append("%s:%s" % (tag, child.__class__.__name__))
        return " ".join(parts)

    def pre(self, func):
        "Pre-order traversal, calling func on every node"
        func(self)
        for child in self.children():
            child.pre(func)

    def identifiers(self):
        "Returns the set of identifier names referenced below this node"
        found = set()
        self.pre(lambda node: found.add(node.value) if isinstance(node, Identifier) else None)
        return found

    def validate(self, info=None):
        """
        Validates the children, then the node itself, collecting
        messages in info["errors"]. Returns (valid, info).
        """
        if info is None:
            info = {"errors": []}
        valid = True
        for child in self.children():
            valid &= child.validate(info)[0]
        valid &= self._validate(info)
        return (valid, info)

    def _validate(self, info):
        return True

    def evaluate(self, jet_filter, document):
        "Evaluates the tree against the document, True or False"
        return bool(self.eval(EvalContext(jet_filter, document)))

    def analyze(self, jet_filter, document):
        """
        Evaluates the tree against the document and returns
        (result, EvalContext) with the failure reasons
        """
        ctx = EvalContext(jet_filter, document, analyze=True)
        return bool(self.eval(ctx)), ctx

    def eval(self, ctx):
        return True


class LogicalOperator(Node):
    "Used for the logical operators"
    def __init__(self, op, left, right):
        self.type = op
        self.left = left
        self.right = right

    def name(self):
        return "%s operator at %s" % (self.type.upper(), self.position)

    def _validate(self, info):
        if self.type not in ("and", "or"):
            info["errors"].append("Unknown logical operator %s" % self.type)
            return False
        return True

    @failure_info
    def eval(self, ctx):
        "Short-circuit logic"
        if self.type == "and":
            return bool(self.left.eval(ctx)) and bool(self.right.eval(ctx))
        return bool(self.left.eval(ctx)) or bool(self.right.eval(ctx))

    def failure_info(self, ctx):
        with ctx:
            l = self.left.eval(ctx)
        if self.type == "and" and not l:
            ctx.failed.append("Left hand side of " + self.name() + " failed")
            return
        if self.type == "or":
            ctx.failed.append("Both sides of " + self.name() + " failed")
        else:
            ctx.failed.append("Right hand side of " + self.name() + " failed")


class NegateOperator(Node):
    "Used to negate a result"
    def __init__(self, expr):
        self.left = expr

    def name(self):
        return "not operator at %s" % (self.position)

    @failure_info
    def eval(self, ctx):
        return not self.left.eval(ctx)

    def failure_info(self, ctx):
        err = self.name() + " failed because sub-expression %s is true" % self.left.name()
        ctx.failed.append(err)


class CompareOperator(Node):
    "Used for all the numeric comparisons"
    EQUALITY = {
        "=": operator.eq,
        "is": operator.eq,
        "!=": operator.ne,
    }
    ORDERED = {
        ">=": operator.ge,
        ">": operator.gt,
        "<": operator.lt,
        "<=": operator.le,
    }

    def __init__(self, comparison, left, right):
        self.type = comparison
        self.left = left
        self.right = right

    def name(self):
        return "%s comparison at %s" % (self.type.upper(), self.position)

    def _validate(self, info):
        if self.type not in self.EQUALITY and self.type not in self.ORDERED:
            info["errors"].append("Unknown compare operator %s" % self.type)
            return False
        if any(isinstance(side, LiteralSet) for side in self.children()):
            info["errors"].append("%s cannot compare a set, use contains" % self.name())
            return False
        return True

    def _undefined_order(self, left, right):
        "Ordered comparisons against undefined always fail"
        return self.type in self.ORDERED and \
            (isinstance(left, Undefined) or isinstance(right, Undefined))

    @failure_info
    def eval(self, ctx):
        left = self.left.eval(ctx)
        right = self.right.eval(ctx)
        if self.type in self.EQUALITY:
            return bool(self.EQUALITY[self.type](left, right))
        if self._undefined_order(left, right):
            return False
        return bool(self.ORDERED[self.type](left, right))

    def failure_info(self, ctx):
        with ctx:
            l = self.left.eval(ctx)
            r = self.right.eval(ctx)
        if self._undefined_order(l, r):
            ctx.failed.append(self.name() + " failed with Undefined operand")
        else:
            ctx.failed.append(self.name() + " failed, left: %r, right: %r" % (l, r))


class ContainsOperator(Node):
    "Used for the 'contains' operator"
    def __init__(self, left, right):
        self.left = left
        self.right = right

    def _validate(self, info):
        if not isinstance(self.right, (Number, Identifier, Constant)):
            info["errors"].append(
                "Contains operator must take an identifier, number or constant! Got: %s for %s"
                % (repr(self.right), self.name()))
            return False
        return True

    @failure_info
    def eval(self, ctx):
        left = self.left.eval(ctx)
        if hasattr(left, "__contains__"):
            return self.right.eval(ctx) in left
        return False

    def failure_info(self, ctx):
        with ctx:
            left = self.left.eval(ctx)
        if not hasattr(left, "__contains__"):
            err = "Left side: %s does not support contains for %s" % (repr(left), self.name())
        else:
            with ctx:
                right = self.right.eval(ctx)
            err = "Right side: %s not in left side: %s for %s" % (repr(right), repr(left), self.name())
        ctx.failed.append(err)


class Identifier(Node):
    "A name resolved against the jet document"
    def __init__(self, value):
        self.value = value

    def __hash__(self):
        return hash(self.value)

    def __eq__(self, other):
        if isinstance(other, Identifier):
            return self.value == other.value
        return False

    def name(self):
        return "Identifier %s at %s" % (self.value, self.position)

    def eval(self, ctx):
        # Resolve each identifier once per evaluation
        if self.value in ctx.identifiers:
            return ctx.identifiers[self.value]
        v = ctx.resolve_identifier(self.value)
        ctx.identifiers[self.value] = v
        return v


class Literal(Node):
    "A value written in the filter, equal to literals of the same kind"
    def __init__(self, value):
        self.value = value

    def __hash__(self):
        return hash(self.value)

    def __eq__(self, other):
        return type(other) is type(self) and self.value == other.value

    def eval(self, ctx):
        return self.value


class Number(Literal):
    "Numeric literal, held as a float"
    def __init__(self, value):
        try:
            value = float(value)
        except (TypeError, ValueError):
            pass
        Literal.__init__(self, value)

    def name(self):
        return "Number %g at %s" % (self.value, self.position)

    def _validate(self, info):
        if isinstance(self.value, float):
            return True
        info["errors"].append("Failed to convert number at %s to float! Got: %s" %
                              (self.position, self.value))
        return False


class Constant(Literal):
    "true or false"
    def name(self):
        return "Constant %s at %s" % (self.value, self.position)

    def _validate(self, info):
        if self.value is True or self.value is False:
            return True
        info["errors"].append("Invalid Constant at %s! Got: %s" % (self.position, self.value))
        return False


class Undefined(Node):
    "Represents a value missing from the jet document"
    def __bool__(self):
        "Acts like False"
        return False

    def __contains__(self, o):
        return False

    def __hash__(self):
        return hash(None)

    def __eq__(self, other):
        "Only equal to undefined"
        return isinstance(other, Undefined)

    def __ne__(self, other):
        return not isinstance(other, Undefined)

    def eval(self, ctx):
        return self


class LiteralSet(Node):
    """
    A set of values written in the filter, such as {0 2},
    used as the left side of contains.
    """
    def __init__(self, value):
        self.value = tuple(value)

    def name(self):
        return "Set of %s at %s" % (repr(self.value), self.position)

    def pre(self, func):
        func(self)
        for item in self.value:
            item.pre(func)

    def _validate(self, info):
        for item in self.value:
            if not isinstance(item, (Number, Identifier, Constant)):
                info["errors"].append("Sets may only hold numbers, identifiers or constants at %s"
                                      % self.position)
                return False
        return True

    def eval(self, ctx):
        return frozenset(item.eval(ctx) for item in self.value)
