"""
pytest for the formula parser
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

from fractions import Fraction

import pytest

from rcrskit.errors import FormulaSyntaxError
from rcrskit.parser import parse_formula, parse_term, tokenize
from rcrskit.symbolic import (
    FALSE,
    TRUE,
    Add,
    And,
    Atom,
    BoolVar,
    Const,
    Exists,
    Forall,
    Implies,
    Mul,
    Neg,
    Not,
    Or,
    Sort,
    Sqrt,
    Var,
    conj,
    eq,
    ge,
    le,
    lt,
    render,
)

x, y = Var("x"), Var("y")


def test_tokenize():
    assert [value for _, value, _ in tokenize("x >= -1/2")] == ["x", ">=", "-", "1/2"]


def test_comparisons_are_normalized():
    assert parse_formula("x >= 0") == ge(x, 0)
    assert parse_formula("x > y") == lt(y, x)
    assert parse_formula("x == y") == eq(x, y)
    assert parse_formula("x ~= y") == Atom("!=", x, y)


def test_precedence():
    assert parse_formula("a & b | c") == Or((And((BoolVar("a"), BoolVar("b"))), BoolVar("c")))
    assert parse_formula("a --> b --> c") == Implies(
        BoolVar("a"), Implies(BoolVar("b"), BoolVar("c"))
    )
    assert parse_term("x + y * 2") == Add(x, Mul(y, Const(2)))
    assert parse_term("sqrt(x) * 2") == Mul(Sqrt(x), Const(2))


def test_keywords_and_constants():
    assert parse_formula("True") == TRUE
    assert parse_formula("not False") == Not(FALSE)
    assert parse_formula("x <= 1 and y < 2") == conj(le(x, 1), lt(y, 2))
    assert parse_term("0.5") == Const(Fraction(1, 2))
    assert parse_term("-3") == Const(-3)
    assert parse_term("-x") == Neg(x)


def test_quantifier_sorts_are_scoped():
    formula = parse_formula("exists b:Bool. b & x <= 1")
    assert formula == Exists("b", Sort.BOOL, conj(BoolVar("b"), le(x, 1)))
    formula = parse_formula("forall y. y <= x --> y < x + 1")
    assert isinstance(formula, Forall) and formula.sort is Sort.REAL


def test_declared_bool_variables():
    formula = parse_formula("b = c", {"b": Sort.BOOL, "c": Sort.BOOL})
    assert isinstance(formula, Atom) and formula.is_boolean


@pytest.mark.parametrize(
    "formula",
    [
        le(x + 1, 3),
        conj(le(0, x), Not(BoolVar("b"))),
        Exists("y", Sort.REAL, lt(x, y)),
        Implies(eq(y, Sqrt(x)), le(0, y)),
        eq(y, Const(Fraction(-5, 2)) * Neg(x)),
        Or((lt(x, 0), FALSE, TRUE)),
    ],
)
def test_parse_inverts_render(formula):
    assert parse_formula(render(formula)) == formula


@pytest.mark.parametrize("text", ["", "x <", "x $ 1", "(x < 1", "exists . x < 1", "x < 1 )"])
def test_syntax_errors(text):
    with pytest.raises(FormulaSyntaxError):
        parse_formula(text)
