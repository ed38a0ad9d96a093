"""
Unit tests for the lexer
"""
from wavekac import parser


class TestLexer(object):
    def assert_types(self, inp, expected):
        lexer = parser.get_lexer()
        lexer.input(inp)
        tokens = list(lexer)
        token_types = [t.type for t in tokens]
        assert token_types == expected

    def test_value_and_index(self):
        inp = "value >= 0.5 and q is 2"
        self.assert_types(inp, ['IDENTIFIER', 'GREATER_THAN_EQUALS', 'NUMBER', 'AND',
                                'IDENTIFIER', 'IS_EQUALS', 'NUMBER'])

    def test_contains_set(self):
        self.assert_types("{0 2} contains q", ['LBRACK', 'NUMBER', 'NUMBER', 'RBRACK',
                                               'CONTAINS', 'IDENTIFIER'])

    def test_not_and_exponent(self):
        inp = "not degenerate and grad_norm < 1e-3"
        self.assert_types(inp, ['NOT', 'IDENTIFIER', 'AND', 'IDENTIFIER', 'LESS_THAN', 'NUMBER'])

    def test_comparisons(self):
        inp = "a > 1 or a <= 2 or a != 3 or a == 4 or a = 5"
        self.assert_types(inp, ['IDENTIFIER', 'GREATER_THAN', 'NUMBER', 'OR',
                                'IDENTIFIER', 'LESS_THAN_EQUALS', 'NUMBER', 'OR',
                                'IDENTIFIER', 'NOT_EQUALS', 'NUMBER', 'OR',
                                'IDENTIFIER', 'DBL_EQUALS', 'NUMBER', 'OR',
                                'IDENTIFIER', 'EQUALS', 'NUMBER'])

    def test_constants(self):
        self.assert_types("true or false or undefined",
                          ['TRUE', 'OR', 'FALSE', 'OR', 'UNDEFINED'])

    def test_keywords_case_insensitive(self):
        self.assert_types("q IS 1 AND value Is Not 0",
                          ['IDENTIFIER', 'IS_EQUALS', 'NUMBER', 'AND',
                           'IDENTIFIER', 'IS_EQUALS', 'NOT', 'NUMBER'])

    def test_dotted_identifier(self):
        lexer = parser.get_lexer()
        lexer.input("grad.x > -0.25")
        tokens = list(lexer)
        assert [t.value for t in tokens] == ["grad.x", ">", "-0.25"]

    def test_comment_ignored(self):
        self.assert_types("q is 1 # saddles only", ['IDENTIFIER', 'IS_EQUALS', 'NUMBER'])

    def test_newlines(self):
        lexer = parser.get_lexer()
        lexer.input("q is 1\nand\nvalue > 0")
        tokens = list(lexer)
        assert tokens[-1].lineno == 3

    def test_error_location(self):
        lexer = parser.get_lexer()
        lexer.input("value $ 2")
        tokens = list(lexer)
        assert [t.type for t in tokens] == ['IDENTIFIER', 'NUMBER']
        assert lexer.errors == [('$', 7, 1)]
