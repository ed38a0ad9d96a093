"""
Unit tests for the parser
"""
from wavekac import parser, ast


class TestParser(object):
    def parse(self, inp):
        lexer = parser.get_lexer()
        p = parser.get_parser(lexer=lexer)
        return p.parse(inp, lexer=lexer), p

    def assert_nodes(self, inp, exp_nodes):
        res, _ = self.parse(inp)
        assert isinstance(res, ast.Node)

        # Do a pre-order traversal
        nodes = []
        res.pre(lambda n: nodes.append(n))
        assert [repr(n) for n in nodes] == exp_nodes

    def test_value_and_index(self):
        self.assert_nodes("value >= 0.5 and q is 2", [
            "LogicalOperator t:and l:CompareOperator r:CompareOperator",
            "CompareOperator t:>= l:Identifier r:Number",
            "Identifier v:value",
            "Number v:0.5",
            "CompareOperator t:is l:Identifier r:Number",
            "Identifier v:q",
            "Number v:2.0",
        ])

    def test_and_binds_tighter(self):
        self.assert_nodes("a or b and c", [
            "LogicalOperator t:or l:Identifier r:LogicalOperator",
            "Identifier v:a",
            "LogicalOperator t:and l:Identifier r:Identifier",
            "Identifier v:b",
            "Identifier v:c",
        ])

    def test_parens(self):
        self.assert_nodes("(a or b) and c", [
            "LogicalOperator t:and l:LogicalOperator r:Identifier",
            "LogicalOperator t:or l:Identifier r:Identifier",
            "Identifier v:a",
            "Identifier v:b",
            "Identifier v:c",
        ])

    def test_not(self):
        self.assert_nodes("not degenerate and q is 1", [
            "LogicalOperator t:and l:NegateOperator r:CompareOperator",
            "NegateOperator l:Identifier",
            "Identifier v:degenerate",
            "CompareOperator t:is l:Identifier r:Number",
            "Identifier v:q",
            "Number v:1.0",
        ])

    def test_is_not(self):
        self.assert_nodes("q is not 1", [
            "CompareOperator t:!= l:Identifier r:Number",
            "Identifier v:q",
            "Number v:1.0",
        ])

    def test_double_equals(self):
        self.assert_nodes("q == 1", [
            "CompareOperator t:= l:Identifier r:Number",
            "Identifier v:q",
            "Number v:1.0",
        ])

    def test_constants(self):
        self.assert_nodes("degenerate is false or foo is undefined", [
            "LogicalOperator t:or l:CompareOperator r:CompareOperator",
            "CompareOperator t:is l:Identifier r:Constant",
            "Identifier v:degenerate",
            "Constant v:False",
            "CompareOperator t:is l:Identifier r:Undefined",
            "Identifier v:foo",
            "Undefined",
        ])

    def test_contains_set(self):
        res, _ = self.parse("{0 2} contains q")
        nodes = []
        res.pre(lambda n: nodes.append(type(n).__name__))
        assert nodes == ["ContainsOperator", "LiteralSet", "Number", "Number", "Identifier"]
        assert [n.value for n in res.left.value] == [0.0, 2.0]

    def test_empty_set(self):
        res, _ = self.parse("{} contains q")
        assert isinstance(res.left, ast.LiteralSet)
        assert res.left.value == ()

    def test_position(self):
        res, _ = self.parse("value > 0\nand q is 2")
        assert res.position == "line: 2, col 1"
        assert res.right.position == "line: 2, col 7"

    def test_syntax_error(self):
        lexer = parser.get_lexer()
        p = parser.get_parser(lexer=lexer)
        try:
            p.parse("value 2", lexer=lexer)
        except SyntaxError:
            pass
        assert p.errors
        assert p.errors[0][1] == "NUMBER"

    def test_unexpected_end(self):
        try:
            self.parse("value >=")
            assert False
        except SyntaxError as e:
            assert "Unexpected end of filter!" in str(e)
