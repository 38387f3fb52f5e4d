"""
pytest for the symbolic term and formula layer
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcrskit.errors import QuantifiedInput, SortMismatch, UnboundVariable
from rcrskit.symbolic import (
    FALSE,
    TRUE,
    UNDEFINED,
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
    Sub,
    Var,
    as_fraction,
    compare,
    conj,
    disj,
    eq,
    evaluate,
    evaluate_flagged,
    fresh_var,
    freshen,
    ge,
    le,
    lt,
    rename,
    render,
    render_compact,
    simplify,
    simplify_term,
    substitute,
    var_sorts,
)

x, y, z = Var("x"), Var("y"), Var("z")


def test_render_is_fully_parenthesized():
    formula = conj(le(x, 1), Not(BoolVar("b")))
    assert render(formula) == "((x <= 1) & (~b))"
    assert render(Implies(lt(x, y), eq(y, x + 1))) == "((x < y) --> (y = (x + 1)))"


def test_ge_builds_flipped_atom():
    assert ge(x, 0) == Atom("<=", Const(0), x)
    assert render(ge(x, 0)) == "(0 <= x)"


def test_render_quantifiers_and_constants():
    formula = Exists("y", Sort.REAL, eq(y, Const(Fraction(-1, 2)) * x))
    assert render(formula) == "(exists y:Real. (y = (-1/2 * x)))"
    assert render(TRUE) == "True"
    assert render(FALSE) == "False"


@pytest.mark.parametrize(
    "term, expected",
    [
        (Add(Var("si_1"), Var("g")), "si_1+g"),
        (Mul(Add(x, y), Const(2)), "(x+y)*2"),
        (Sub(x, Sub(y, z)), "x-(y-z)"),
        (Sub(Sub(x, y), z), "x-y-z"),
        (Mul(Mul(x, Const(2)), Const(3)), "x*2*3"),
        (Neg(Add(x, y)), "-(x+y)"),
        (Sqrt(Add(x, Const(1))), "sqrt(x+1)"),
    ],
)
def test_render_compact(term, expected):
    assert render_compact(term) == expected


def test_fresh_var():
    assert fresh_var("y", set()) == "y"
    assert fresh_var("x", {"x"}) == "x_1"
    assert fresh_var("x", {"x", "x_1"}) == "x_2"


def test_as_fraction_rejects_floats_and_booleans():
    assert as_fraction("5/2") == Fraction(5, 2)
    assert as_fraction(3) == Fraction(3)
    with pytest.raises(TypeError):
        as_fraction(0.1)
    with pytest.raises(TypeError):
        as_fraction(True)


def test_unit_variable_in_atom_is_rejected():
    with pytest.raises(SortMismatch):
        eq(Var("u", Sort.UNIT), 0)


def test_substitute_avoids_capture():
    formula = Exists("y", Sort.REAL, eq(x, y))
    result = substitute(formula, {"x": y})
    assert result == Exists("y_1", Sort.REAL, eq(y, Var("y_1")))
    assert render(result) == "(exists y_1:Real. (y = y_1))"


def test_substitute_leaves_bound_variables_alone():
    formula = Forall("x", Sort.REAL, le(x, y))
    assert substitute(formula, {"x": Const(3)}) == formula


def test_substitute_checks_sorts():
    with pytest.raises(SortMismatch):
        substitute(eq(x, 1), {"x": Var("b", Sort.BOOL)})
    with pytest.raises(SortMismatch):
        substitute(BoolVar("b"), {"b": x})


def test_rename_keeps_sorts():
    formula = conj(BoolVar("b"), le(x, 2))
    renamed = rename(formula, {"b": "c", "x": "w"})
    assert renamed == conj(BoolVar("c"), le(Var("w"), 2))
    assert var_sorts(renamed) == {"c": Sort.BOOL, "w": Sort.REAL}


def test_free_vars():
    formula = Forall("y", Sort.REAL, Implies(le(y, x), lt(y, z)))
    assert formula.free_vars == {"x", "z"}
    assert formula.has_quantifier
    assert not le(x, 1).has_quantifier


def test_freshen_separates_binders():
    formula = conj(Exists("x", Sort.REAL, lt(x, 0)), Exists("x", Sort.REAL, lt(0, x)))
    result = freshen(formula, ["x"])
    assert isinstance(result, And)
    binders = [part.var for part in result.args]
    assert binders == ["x_1", "x_2"]


def test_simplify_constants_and_identities():
    assert simplify(le(Const(1), Const(2))) == TRUE
    assert simplify(lt(x, x)) == FALSE
    assert simplify(conj(BoolVar("b"), Not(BoolVar("b")))) == FALSE
    assert simplify(disj(BoolVar("b"), Not(BoolVar("b")))) == TRUE
    assert simplify(Implies(le(x, 1), le(x, 1))) == TRUE
    assert simplify(Not(lt(x, 1))) == Atom("<=", Const(1), x)


def test_simplify_one_point_rule():
    formula = Exists("y", Sort.REAL, conj(eq(y, x + 1), le(y, 3)))
    assert render(simplify(formula)) == "((x + 1) <= 3)"


def test_simplify_forall_one_point_rule():
    formula = Forall("y", Sort.REAL, Implies(eq(y, x), le(y, 3)))
    assert simplify(formula) == le(x, 3)


def test_one_point_rule_keeps_square_root_domain():
    """
    y = sqrt(x) has no solution for negative x, so the rule must keep 0 <= x
    """
    witness = simplify(Exists("y", Sort.REAL, eq(y, Sqrt(x))))
    assert render(witness) == "(0 <= x)"
    assert not evaluate(witness, {"x": -1})
    assert evaluate(witness, {"x": 4})

    bounded = simplify(Forall("y", Sort.REAL, Implies(eq(y, Sqrt(x)), le(z, y))))
    assert not bounded.has_quantifier
    assert evaluate(bounded, {"x": -1, "z": 5})
    assert not evaluate(bounded, {"x": 4, "z": 5})
    assert evaluate(bounded, {"x": 4, "z": 1})


def test_forall_disequality_rule_skips_partial_terms():
    formula = Forall("y", Sort.REAL, disj(Atom("!=", y, Sqrt(x)), le(y, z)))
    assert simplify(formula).has_quantifier


def test_reflexive_atoms_over_partial_terms():
    assert render(simplify(eq(Sqrt(x), Sqrt(x)))) == "(0 <= x)"
    assert simplify(le(Sqrt(x), Sqrt(x))) == Atom("<=", Const(0), x)
    assert simplify(lt(Sqrt(x), Sqrt(x))) == FALSE
    assert render(simplify(eq(x / y, x / y))) == "(y != 0)"
    assert not evaluate(simplify(eq(x / y, x / y)), {"x": 1, "y": 0})
    assert simplify(eq(x / 2, x / 2)) == TRUE


@settings(max_examples=100, deadline=None)
@given(st.integers(-6, 6), st.integers(-3, 3), st.integers(-3, 3))
def test_square_root_one_point_agrees_with_direct_reading(x_value, shift, bound):
    formula = Exists("y", Sort.REAL, conj(eq(y, Sqrt(x + shift)), le(y, bound)))
    radicand = x_value + shift
    expected = radicand >= 0 and radicand <= bound * bound and bound >= 0
    assert evaluate(simplify(formula), {"x": Fraction(x_value)}) == expected


def test_simplify_drops_unused_quantifier():
    assert simplify(Exists("y", Sort.REAL, le(x, 1))) == le(x, 1)
    assert simplify(Forall("u", Sort.UNIT, le(x, 1))) == le(x, 1)


def test_simplify_term_square_roots():
    assert simplify_term(Sqrt(Const(4))) == Const(2)
    assert simplify_term(Sqrt(Const(Fraction(9, 4)))) == Const(Fraction(3, 2))
    assert simplify_term(Sqrt(Const(2))) == Sqrt(Const(2))
    assert simplify_term(Mul(Const(0), x)) == Const(0)
    assert simplify_term(Sub(Sqrt(x), Sqrt(x))) == Sub(Sqrt(x), Sqrt(x))


def test_evaluate_exact_and_undefined():
    assert evaluate(Sqrt(Const(Fraction(9, 4))), {}) == Fraction(3, 2)
    assert evaluate(Sqrt(x), {"x": -1}) is UNDEFINED
    assert evaluate(x / y, {"x": 1, "y": 0}) is UNDEFINED
    assert evaluate(x + 1, {"x": Fraction(1, 2)}) == Fraction(3, 2)


def test_evaluate_flagged_reports_poisoned_atoms():
    formula = eq(y, Sqrt(x))
    assert evaluate_flagged(formula, {"x": -1, "y": 0}) == (False, True)
    assert evaluate_flagged(Not(formula), {"x": -1, "y": 0}) == (True, True)
    assert evaluate_flagged(formula, {"x": 4, "y": 2}) == (True, False)


def test_evaluate_errors():
    with pytest.raises(UnboundVariable):
        evaluate(le(x, 1), {})
    with pytest.raises(QuantifiedInput):
        evaluate(Exists("y", Sort.REAL, le(x, y)), {"x": 0})


def test_compare_uses_tolerance_for_floats():
    assert compare("=", 0.1 + 0.2, Fraction(3, 10))
    assert not compare("<", 0.1 + 0.2, Fraction(3, 10))
    assert compare("<=", 0.1 + 0.2, Fraction(3, 10))
    assert not compare("=", Fraction(1, 3), Fraction(333, 1000))


# Simplification preserves meaning on quantifier free formulas

names = st.sampled_from(["x", "y"])
terms = st.recursive(
    st.one_of(names.map(Var), st.integers(-3, 3).map(Const)),
    lambda inner: st.one_of(
        st.builds(Add, inner, inner),
        st.builds(Sub, inner, inner),
        st.builds(Mul, inner, st.integers(-2, 2).map(Const)),
        st.builds(Neg, inner),
    ),
    max_leaves=4,
)
atoms_strategy = st.builds(Atom, st.sampled_from(["<", "<=", "=", "!="]), terms, terms)
formulas = st.recursive(
    st.one_of(atoms_strategy, st.just(TRUE), st.just(FALSE)),
    lambda inner: st.one_of(
        st.builds(Not, inner),
        st.lists(inner, min_size=2, max_size=3).map(lambda args: And(tuple(args))),
        st.lists(inner, min_size=2, max_size=3).map(lambda args: Or(tuple(args))),
        st.builds(Implies, inner, inner),
    ),
    max_leaves=6,
)


@settings(max_examples=200, deadline=None)
@given(formulas, st.integers(-4, 4), st.integers(-4, 4))
def test_simplify_preserves_evaluation(formula, x_value, y_value):
    env = {"x": Fraction(x_value), "y": Fraction(y_value, 2)}
    assert evaluate(simplify(formula), env) == evaluate(formula, env)


@settings(max_examples=200, deadline=None)
@given(formulas)
def test_simplify_is_idempotent(formula):
    once = simplify(formula)
    assert simplify(once) == once


@settings(max_examples=200, deadline=None)
@given(formulas, terms, st.integers(-4, 4), st.integers(-4, 4))
def test_substitution_matches_extended_environment(formula, term, x_value, y_value):
    env = {"x": Fraction(x_value), "y": Fraction(y_value, 3)}
    extended = dict(env, x=evaluate(term, env))
    assert evaluate(substitute(formula, {"x": term}), env) == evaluate(formula, extended)


@settings(max_examples=100, deadline=None)
@given(formulas, st.integers(-4, 4), st.integers(-4, 4))
def test_substitution_under_binder_avoids_capture(formula, x_value, z_value):
    quantified = Exists("y", Sort.REAL, conj(eq(y, z), formula))
    instance = substitute(quantified, {"x": y})
    env = {"y": Fraction(x_value), "z": Fraction(z_value)}
    direct = substitute(formula, {"x": Const(Fraction(x_value)), "y": Const(Fraction(z_value))})
    assert evaluate(simplify(instance), env) == evaluate(direct, {})
