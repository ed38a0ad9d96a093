"""
This module makes use of the Python PLY package to parse
the jet filter grammar, e.g.

    value >= 0.5 and q is 2
    {0 2} contains q
    not degenerate and grad_norm < 1e-3
"""
###
# Implements the lexer
###
import ply.lex as lex

reserved = {
    'is': 'IS_EQUALS',
    'and': 'AND',
    'or': 'OR',
    'not': 'NOT',
    'contains': 'CONTAINS',
    'true': 'TRUE',
    'false': 'FALSE',
    'undefined': 'UNDEFINED',
}

tokens = (
    'AND',
    'OR',
    'NOT',
    'GREATER_THAN',
    'GREATER_THAN_EQUALS',
    'LESS_THAN',
    'LESS_THAN_EQUALS',
    'EQUALS',
    'DBL_EQUALS',
    'NOT_EQUALS',
    'IS_EQUALS',
    'LPAREN',
    'RPAREN',
    'LBRACK',
    'RBRACK',
    'CONTAINS',
    'NUMBER',
    'IDENTIFIER',
    'TRUE',
    'FALSE',
    'UNDEFINED',
)

# Regex rules for tokens
t_GREATER_THAN = r'>'
t_GREATER_THAN_EQUALS = r'>='

t_LESS_THAN = r'<'
t_LESS_THAN_EQUALS = r'<='

t_EQUALS = r'='
t_DBL_EQUALS = r'=='
t_NOT_EQUALS = r'!='

t_LPAREN = r'\('
t_RPAREN = r'\)'

t_LBRACK = r'{'
t_RBRACK = r'}'

# Ignore any comments
t_ignore_COMMENT = r'\#.*'


def t_NUMBER(t):
    r'-?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?'
    return t


# Identifiers allow the dot syntax for nested lookups
def t_IDENTIFIER(t):
    r'[A-Za-z_][\w.]*'
    l = t.value.lower()
    if l in reserved:
        t.value = l
    t.type = reserved.get(t.value, 'IDENTIFIER')
    return t


# Track the newlines
def t_newline(t):
    r'\n+'
    t.lexer.lineno += len(t.value)

# The ignore characters
t_ignore = ' \t\r'


def compute_column(lexer, lexpos):
    "1-based column of lexpos within its line"
    return lexpos - lexer.lexdata.rfind('\n', 0, lexpos)


def t_error(t):
    # Skip to the next space so one bad word is one error
    bad = t.value.split(" ", 1)[0] if " " in t.value else t.value[0]
    t.lexer.errors.append((bad, compute_column(t.lexer, t.lexer.lexpos), t.lexer.lineno))
    t.lexer.skip(len(bad))


def get_lexer():
    "Returns a new lexer collecting its errors in .errors"
    l = lex.lex()
    l.errors = []
    return l

###
# Implements the parser
###
import ply.yacc as yacc
from . import ast

# 'and' binds tighter than 'or'
precedence = (
    ('left', 'OR'),
    ('left', 'AND'),
    ('right', 'NOT'),
)

# Spellings that share a comparison node
COMPARE_ALIASES = {'==': '='}


def placed(p, node, slot):
    "Stamps node with the line and column of token `slot`"
    node.set_position(p.lineno(slot), compute_column(p.lexer, p.lexpos(slot)))
    return node


def p_expression_binop(p):
    """expression : expression AND expression
                  | expression OR expression"""
    p[0] = placed(p, ast.LogicalOperator(p[2], p[1], p[3]), 2)


def p_expression_not(p):
    "expression : NOT expression"
    p[0] = placed(p, ast.NegateOperator(p[2]), 1)


def p_expression_term(p):
    "expression : term"
    p[0] = p[1]


def p_term_is_not(p):
    "term : factor IS_EQUALS NOT factor"
    p[0] = placed(p, ast.CompareOperator("!=", p[1], p[4]), 2)


def p_term_comparison(p):
    """term : factor GREATER_THAN factor
            | factor GREATER_THAN_EQUALS factor
            | factor LESS_THAN factor
            | factor LESS_THAN_EQUALS factor
            | factor EQUALS factor
            | factor DBL_EQUALS factor
            | factor NOT_EQUALS factor
            | factor IS_EQUALS factor"""
    op = COMPARE_ALIASES.get(p[2], p[2])
    p[0] = placed(p, ast.CompareOperator(op, p[1], p[3]), 2)


def p_term_contains(p):
    "term : factor CONTAINS factor"
    p[0] = placed(p, ast.ContainsOperator(p[1], p[3]), 2)


def p_term_factor(p):
    "term : factor"
    p[0] = p[1]


def p_factor_identifier(p):
    "factor : IDENTIFIER"
    p[0] = placed(p, ast.Identifier(p[1]), 1)


def p_factor_number(p):
    "factor : NUMBER"
    p[0] = placed(p, ast.Number(p[1]), 1)


CONSTANTS = {
    'true': lambda: ast.Constant(True),
    'false': lambda: ast.Constant(False),
    'undefined': ast.Undefined,
}


def p_factor_constants(p):
    """factor : TRUE
              | FALSE
              | UNDEFINED"""
    p[0] = placed(p, CONSTANTS[p[1]](), 1)


def p_factor_parens(p):
    "factor : LPAREN expression RPAREN"
    p[0] = p[2]


def p_empty(p):
    "empty : "
    pass


def p_factor_list(p):
    """factor_list : factor factor_list
                   | empty"""
    p[0] = [p[1]] + p[2] if len(p) == 3 else []


def p_factor_set(p):
    "factor : LBRACK factor_list RBRACK"
    p[0] = placed(p, ast.LiteralSet(p[2]), 1)


def p_error(p):
    if p is None:
        raise SyntaxError("Unexpected end of filter!")
    parser = p.lexer.parser
    parser.errors.append(("Syntax error at token", p.type, p.value,
                          compute_column(p.lexer, p.lexpos), p.lineno))
    parser.errok()


def get_parser(lexer=None, debug=0):
    "Returns a new parser bound to lexer, collecting its errors in .errors"
    p = yacc.yacc(debug=debug, write_tables=False)
    p.errors = []
    if lexer:
        lexer.parser = p
        p.lexer = lexer
    return p
