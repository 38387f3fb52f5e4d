"""
    Linear real arithmetic over the formulas of rcrskit.symbolic.

    Features:

    Linear forms with exact rational coefficients, nonlinear subterms kept as opaque keys
    Fourier-Motzkin elimination with strict and non-strict bounds
    Quantifier elimination (one-point, Fourier-Motzkin, dualization for forall)
    Three valued satisfiability and validity decision
    Exact model construction for quantifier free linear formulas
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import logging
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from rcrskit.errors import ResourceLimit
from rcrskit.settings import DEFAULT_ATOM_LIMIT
from rcrskit.symbolic import (
    FALSE,
    TRUE,
    Add,
    And,
    Atom,
    BoolVar,
    Const,
    Div,
    Exists,
    FalseF,
    Forall,
    Formula,
    Implies,
    Mul,
    Neg,
    Not,
    Or,
    Sort,
    Sqrt,
    Sub,
    Term,
    TriBool,
    TrueF,
    Var,
    assign_bool,
    conj,
    conjuncts,
    definedness,
    disj,
    evaluate,
    exists_all,
    fresh_var,
    ge,
    map_atoms,
    flip_atom,
    negate_atom,
    render_term,
    replace_terms,
    simplify,
    simplify_term,
    sqrt_arguments,
    var_sorts,
)


class Mode(Enum):
    SATISFIABILITY = "Satisfiability"
    VALIDITY = "Validity"


class LinearForm:
    """sum(coeff * key) + const, where keys are Real variables or opaque nonlinear terms."""

    __slots__ = ("coeffs", "const")

    def __init__(
        self, coeffs: Optional[Dict[Term, Fraction]] = None, const: Fraction = Fraction(0)
    ):
        self.coeffs = {k: v for k, v in (coeffs or {}).items() if v != 0}
        self.const = Fraction(const)

    def plus(self, other: "LinearForm") -> "LinearForm":
        coeffs = dict(self.coeffs)
        for key, value in other.coeffs.items():
            coeffs[key] = coeffs.get(key, Fraction(0)) + value
        return LinearForm(coeffs, self.const + other.const)

    def scaled(self, factor: Fraction) -> "LinearForm":
        return LinearForm({k: v * factor for k, v in self.coeffs.items()}, self.const * factor)

    def coefficient(self, name: str) -> Fraction:
        return self.coeffs.get(Var(name), Fraction(0))

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    @property
    def opaque_keys(self) -> List[Term]:
        return [key for key in self.coeffs if not isinstance(key, Var)]

    def mentions_opaque(self, name: str) -> bool:
        return any(name in key.free_vars for key in self.opaque_keys)

    def sorted_keys(self) -> List[Term]:
        return sorted(self.coeffs, key=render_term)

    def key(self) -> Tuple:
        return (tuple((render_term(k), self.coeffs[k]) for k in self.sorted_keys()), self.const)


Constraint = Tuple[LinearForm, str]

_FALSE_CONSTRAINT: Constraint = (LinearForm({}, Fraction(1)), "<=")


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.spent = 0

    def spend(self, atoms: int):
        self.spent += atoms
        if self.spent > self.limit:
            raise ResourceLimit(f"Quantifier elimination exceeded the limit of {self.limit} atoms")


def linearize(term: Term) -> LinearForm:
    if isinstance(term, Var):
        return LinearForm({term: Fraction(1)})
    if isinstance(term, Const):
        return LinearForm({}, term.value)
    if isinstance(term, Add):
        return linearize(term.left).plus(linearize(term.right))
    if isinstance(term, Sub):
        return linearize(term.left).plus(linearize(term.right).scaled(Fraction(-1)))
    if isinstance(term, Neg):
        return linearize(term.arg).scaled(Fraction(-1))
    if isinstance(term, Mul):
        left, right = linearize(term.left), linearize(term.right)
        if left.is_constant:
            return right.scaled(left.const)
        if right.is_constant:
            return left.scaled(right.const)
    if isinstance(term, Div):
        right = linearize(term.right)
        if right.is_constant and right.const != 0:
            return linearize(term.left).scaled(1 / right.const)
    if isinstance(term, Sqrt):
        return LinearForm({Sqrt(simplify_term(term.arg)): Fraction(1)})
    return LinearForm({simplify_term(term): Fraction(1)})


def atom_form(atom: Atom) -> LinearForm:
    return linearize(atom.lhs).plus(linearize(atom.rhs).scaled(Fraction(-1)))


def _sum(items: List[Tuple[Term, Fraction]], constant: Fraction) -> Term:
    result: Optional[Term] = None
    for key, coeff in items:
        term = key if coeff == 1 else Mul(Const(coeff), key)
        result = term if result is None else Add(result, term)
    if result is None:
        return Const(constant)
    if constant > 0:
        return Add(result, Const(constant))
    if constant < 0:
        return Sub(result, Const(-constant))
    return result


def to_atom(form: LinearForm, op: str) -> Formula:
    """
    Canonical atom for `form op 0`: the leading key (by rendering) gets coefficient magnitude 1,
    positive terms go left, negative terms and the constant go right.
    """
    if form.is_constant:
        holds = {
            "<": form.const < 0,
            "<=": form.const <= 0,
            "=": form.const == 0,
            "!=": form.const != 0,
        }[op]
        return TRUE if holds else FALSE
    keys = form.sorted_keys()
    lead = form.coeffs[keys[0]]
    scale = 1 / abs(lead)
    if op in ("=", "!=") and lead < 0:
        scale = -scale
    form = form.scaled(scale)
    positive = [(k, form.coeffs[k]) for k in keys if form.coeffs[k] > 0]
    negative = [(k, -form.coeffs[k]) for k in keys if form.coeffs[k] < 0]
    if positive:
        return Atom(op, _sum(positive, Fraction(0)), _sum(negative, -form.const))
    return Atom(op, Const(form.const), _sum(negative, Fraction(0)))


def _normal_key(constraint: Constraint) -> Tuple:
    form, op = constraint
    keys = form.sorted_keys()
    if keys:
        form = form.scaled(1 / abs(form.coeffs[keys[0]]))
    return (op, form.key())


def _prune(constraints: List[Constraint]) -> List[Constraint]:
    """Drops constant-true constraints and duplicates; a constant-false one wins."""
    seen = set()
    result = []
    for form, op in constraints:
        if form.is_constant:
            if to_atom(form, op) == FALSE:
                return [_FALSE_CONSTRAINT]
            continue
        key = _normal_key((form, op))
        if key not in seen:
            seen.add(key)
            result.append((form, op))
    return result


def fm_eliminate(constraints: List[Constraint], name: str, budget: _Budget) -> List[Constraint]:
    """
    Projects the conjunction `form op 0` (op in <, <=, =) onto the variables other than name.
    An equality on name is used as a pivot when available.
    """
    for index, (form, op) in enumerate(constraints):
        pivot = form.coefficient(name)
        if op == "=" and pivot != 0:
            result = []
            for other_index, (other, other_op) in enumerate(constraints):
                if other_index == index:
                    continue
                factor = other.coefficient(name) / pivot
                result.append((other.plus(form.scaled(-factor)), other_op))
            budget.spend(len(result))
            return _prune(result)
    lower: List[Constraint] = []
    upper: List[Constraint] = []
    keep: List[Constraint] = []
    for form, op in constraints:
        coeff = form.coefficient(name)
        if coeff > 0:
            upper.append((form, op))
        elif coeff < 0:
            lower.append((form, op))
        else:
            keep.append((form, op))
    budget.spend(len(lower) * len(upper))
    for lower_form, lower_op in lower:
        lower_coeff = -lower_form.coefficient(name)
        for upper_form, upper_op in upper:
            upper_coeff = upper_form.coefficient(name)
            combined = upper_form.scaled(lower_coeff).plus(lower_form.scaled(upper_coeff))
            op = "<" if "<" in (lower_op, upper_op) else "<="
            keep.append((combined, op))
    return _prune(keep)


# Normal forms


def nnf(formula: Formula) -> Formula:
    """Negation normal form.  Negated Sqrt atoms and Bool variables stay as Not literals."""
    if isinstance(formula, Implies):
        return disj(nnf(Not(formula.lhs)), nnf(formula.rhs))
    if isinstance(formula, And):
        return conj(*(nnf(arg) for arg in formula.args))
    if isinstance(formula, Or):
        return disj(*(nnf(arg) for arg in formula.args))
    if isinstance(formula, Exists):
        return Exists(formula.var, formula.sort, nnf(formula.body))
    if isinstance(formula, Forall):
        return Forall(formula.var, formula.sort, nnf(formula.body))
    if not isinstance(formula, Not):
        return formula
    arg = formula.arg
    if isinstance(arg, TrueF):
        return FALSE
    if isinstance(arg, FalseF):
        return TRUE
    if isinstance(arg, Not):
        return nnf(arg.arg)
    if isinstance(arg, Atom):
        return negate_atom(arg)
    if isinstance(arg, And):
        return disj(*(nnf(Not(a)) for a in arg.args))
    if isinstance(arg, Or):
        return conj(*(nnf(Not(a)) for a in arg.args))
    if isinstance(arg, Implies):
        return conj(nnf(arg.lhs), nnf(Not(arg.rhs)))
    if isinstance(arg, Exists):
        return Forall(arg.var, arg.sort, nnf(Not(arg.body)))
    if isinstance(arg, Forall):
        return Exists(arg.var, arg.sort, nnf(Not(arg.body)))
    return formula


def _split_disequality(literal: Formula, name: Optional[str]) -> Optional[List[List[Formula]]]:
    if not (isinstance(literal, Atom) and literal.op == "!=") or literal.is_boolean:
        return None
    if literal.has_sqrt or (name is not None and name not in literal.free_vars):
        return None
    return [[Atom("<", literal.lhs, literal.rhs)], [Atom("<", literal.rhs, literal.lhs)]]


def dnf(formula: Formula, name: Optional[str], budget: _Budget) -> List[List[Formula]]:
    """
    Disjunctive normal form of an NNF formula as lists of literals.  Disequalities mentioning
    name (all of them when name is None) are split into two strict inequalities.
    """
    if isinstance(formula, TrueF):
        return [[]]
    if isinstance(formula, FalseF):
        return []
    if isinstance(formula, Or):
        result: List[List[Formula]] = []
        for arg in formula.args:
            result.extend(dnf(arg, name, budget))
        return result
    if isinstance(formula, And):
        result = [[]]
        for arg in formula.args:
            parts = dnf(arg, name, budget)
            result = [left + right for left in result for right in parts]
            budget.spend(sum(len(lits) for lits in result))
        return result
    split = _split_disequality(formula, name)
    if split is not None:
        return split
    return [[formula]]


# Quantifier elimination


def _eliminate_literals(literals: List[Formula], name: str, budget: _Budget) -> Optional[Formula]:
    constraints: List[Constraint] = []
    # A literal over an undefined subterm is false for every value of name.
    defined: List[Formula] = []
    for literal in literals:
        if not isinstance(literal, Atom) or literal.is_boolean or literal.op == "!=":
            return None
        form = atom_form(literal)
        if form.mentions_opaque(name):
            return None
        constraints.append((form, literal.op))
        defined.extend(definedness(literal.lhs) + definedness(literal.rhs))
    eliminated = [to_atom(form, op) for form, op in fm_eliminate(constraints, name, budget)]
    return conj(*defined, *eliminated)


def _binds(formula: Formula, name: str) -> bool:
    if isinstance(formula, (Exists, Forall)):
        return formula.var == name or _binds(formula.body, name)
    return any(_binds(child, name) for child in formula.children() if isinstance(child, Formula))


def _eliminate_exists(
    name: str, sort: Sort, body: Formula, budget: _Budget
) -> Tuple[Formula, bool]:
    body = simplify(body)
    if sort is Sort.UNIT or name not in body.free_vars:
        return body, True
    if sort is Sort.BOOL:
        expanded = disj(assign_bool(body, name, True), assign_bool(body, name, False))
        return simplify(expanded), True
    outside = [part for part in conjuncts(body) if name not in part.free_vars]
    inside = [part for part in conjuncts(body) if name in part.free_vars]
    pieces = []
    for literals in dnf(nnf(conj(*inside)), name, budget):
        with_var = [lit for lit in literals if name in lit.free_vars]
        without_var = [lit for lit in literals if name not in lit.free_vars]
        eliminated = _eliminate_literals(with_var, name, budget)
        if eliminated is None:
            eliminated = Exists(name, sort, conj(*with_var))
        pieces.append(conj(*without_var, eliminated))
    result = simplify(conj(*outside, disj(*pieces)))
    return result, not _binds(result, name)


def _eliminate(formula: Formula, budget: _Budget) -> Formula:
    if not formula.has_quantifier:
        return formula
    if isinstance(formula, Exists):
        body = _eliminate(formula.body, budget)
        return _eliminate_exists(formula.var, formula.sort, body, budget)[0]
    if isinstance(formula, Forall):
        body = _eliminate(formula.body, budget)
        dual, complete = _eliminate_exists(formula.var, formula.sort, nnf(Not(body)), budget)
        if complete:
            return simplify(nnf(Not(dual)))
        return simplify(Forall(formula.var, formula.sort, body))
    if isinstance(formula, Not):
        return Not(_eliminate(formula.arg, budget))
    if isinstance(formula, And):
        return And(tuple(_eliminate(arg, budget) for arg in formula.args))
    if isinstance(formula, Or):
        return Or(tuple(_eliminate(arg, budget) for arg in formula.args))
    if isinstance(formula, Implies):
        return Implies(_eliminate(formula.lhs, budget), _eliminate(formula.rhs, budget))
    return formula


def eliminate_quantifiers(formula: Formula, atom_limit: int = DEFAULT_ATOM_LIMIT) -> Formula:
    """
    Eliminates every quantifier whose variable occurs only linearly in its scope.  Quantifiers
    over variables under Sqrt or inside products of variables are kept.

    Raises:
        ResourceLimit: more than atom_limit atoms were produced on the way
    """
    return simplify(_eliminate(simplify(formula), _Budget(atom_limit)))


# Decision procedure


def relax_nonlinear(formula: Formula) -> Tuple[Formula, bool]:
    """
    Over-approximates a quantifier free formula by a linear one.  Each distinct opaque subterm
    becomes a fresh variable, constrained non-negative when it is a square root.  A negated
    Sqrt literal also holds where a square root argument is negative, so it becomes that
    disjunction plus the complementary comparison.  Returns the relaxed formula and whether
    anything was relaxed.
    """
    formula = nnf(formula)

    def weaken(node: Formula) -> Formula:
        if isinstance(node, Not) and isinstance(node.arg, Atom) and not node.arg.is_boolean:
            undefined = [Atom("<", argument, Const(0)) for argument in sqrt_arguments(node.arg)]
            return disj(*undefined, flip_atom(node.arg))
        if isinstance(node, And):
            return conj(*(weaken(arg) for arg in node.args))
        if isinstance(node, Or):
            return disj(*(weaken(arg) for arg in node.args))
        return node

    formula = weaken(formula)
    opaque: List[Term] = []

    def collect(atom: Atom) -> Formula:
        if not atom.is_boolean:
            for key in atom_form(atom).opaque_keys:
                if key not in opaque:
                    opaque.append(key)
        return atom

    map_atoms(formula, collect)
    if not opaque:
        return formula, False
    used = set(formula.free_vars)
    mapping: Dict[Term, Term] = {}
    facts = []
    for key in opaque:
        name = fresh_var("u", used)
        used.add(name)
        mapping[key] = Var(name)
        if isinstance(key, Sqrt):
            facts.append(ge(Var(name), 0))

    def relax_atom(atom: Atom) -> Formula:
        if atom.is_boolean:
            return atom
        return to_atom(atom_form(atom), atom.op) if atom_form(atom).opaque_keys else atom

    # Replace whole opaque subterms in the canonical linear rendering of each atom.
    linearized = map_atoms(formula, relax_atom)
    return conj(replace_terms(linearized, mapping), *facts), True


def decide_linear(
    formula: Formula, mode: Mode = Mode.SATISFIABILITY, atom_limit: int = DEFAULT_ATOM_LIMIT
) -> TriBool:
    """
    Satisfiability (free variables existentially closed) or validity (universally closed).
    Exact on linear formulas; Unknown when a nonlinear atom or quantifier blocks the decision.
    """
    target = formula if mode is Mode.SATISFIABILITY else Not(formula)
    try:
        target = eliminate_quantifiers(target, atom_limit)
        if target.has_quantifier:
            return TriBool.UNKNOWN
        relaxed, approximated = relax_nonlinear(target)
        closed = exists_all(sorted(var_sorts(relaxed).items()), relaxed)
        decided = eliminate_quantifiers(closed, atom_limit)
    except ResourceLimit as error:
        logging.warning(f"Decision procedure gave up: {error}")
        return TriBool.UNKNOWN
    if decided == FALSE:
        satisfiable = False
    elif decided == TRUE:
        satisfiable = True
    else:
        return TriBool.UNKNOWN
    if satisfiable and approximated:
        return TriBool.UNKNOWN
    if mode is Mode.SATISFIABILITY:
        return TriBool.YES if satisfiable else TriBool.NO
    return TriBool.NO if satisfiable else TriBool.YES


# Models


def _choose_value(
    constraints: List[Constraint], name: str, values: Dict[str, Fraction]
) -> Fraction:
    lower: List[Tuple[Fraction, bool]] = []
    upper: List[Tuple[Fraction, bool]] = []
    for form, op in constraints:
        coeff = form.coefficient(name)
        if coeff == 0:
            continue
        rest = form.const
        for key, value in form.coeffs.items():
            if isinstance(key, Var) and key.name != name:
                rest += value * values.get(key.name, Fraction(0))
        bound = -rest / coeff
        if op == "=":
            return bound
        strict = op == "<"
        (upper if coeff > 0 else lower).append((bound, strict))

    def feasible(candidate: Fraction) -> bool:
        for bound, strict in lower:
            if candidate < bound or (strict and candidate == bound):
                return False
        for bound, strict in upper:
            if candidate > bound or (strict and candidate == bound):
                return False
        return True

    if feasible(Fraction(0)):
        return Fraction(0)
    low = max(lower, key=lambda b: (b[0], b[1])) if lower else None
    high = min(upper, key=lambda b: (b[0], not b[1])) if upper else None
    if low is not None and not low[1]:
        return low[0]
    if high is not None and not high[1]:
        return high[0]
    if low is not None and high is not None:
        return (low[0] + high[0]) / 2
    if low is not None:
        return low[0] + 1
    assert high is not None
    return high[0] - 1


def _solve_conjunction(
    literals: List[Formula], sorts: Dict[str, Sort], budget: _Budget
) -> Optional[Dict[str, Any]]:
    booleans: Dict[str, bool] = {}
    constraints: List[Constraint] = []
    for literal in literals:
        if isinstance(literal, BoolVar) or (
            isinstance(literal, Not) and isinstance(literal.arg, BoolVar)
        ):
            variable = literal if isinstance(literal, BoolVar) else literal.arg  # type: ignore
            name = variable.name
            value = isinstance(literal, BoolVar)
            if booleans.setdefault(name, value) != value:
                return None
            continue
        if not isinstance(literal, Atom) or literal.is_boolean:
            return None
        form = atom_form(literal)
        if form.opaque_keys or literal.op == "!=":
            return None
        constraints.append((form, literal.op))
    reals = sorted(name for name, sort in sorts.items() if sort is Sort.REAL)
    stack = []
    current = _prune(constraints)
    for name in reals:
        stack.append((name, current))
        current = fm_eliminate(current, name, budget)
    if current:
        return None
    values: Dict[str, Fraction] = {}
    for name, scope in reversed(stack):
        values[name] = _choose_value(scope, name, values)
    model: Dict[str, Any] = {}
    for name, sort in sorted(sorts.items()):
        if sort is Sort.REAL:
            model[name] = values[name]
        elif sort is Sort.BOOL:
            model[name] = booleans.get(name, False)
        else:
            model[name] = None
    return model


def find_model(
    formula: Formula, atom_limit: int = DEFAULT_ATOM_LIMIT
) -> Optional[Dict[str, Any]]:
    """
    An exact satisfying assignment of a quantifier free linear formula, or None when the
    formula is unsatisfiable, nonlinear, quantified or too large.
    """
    formula = simplify(formula)
    if formula.has_quantifier:
        return None
    sorts = var_sorts(formula)
    budget = _Budget(atom_limit)
    try:
        for literals in dnf(nnf(formula), None, budget):
            model = _solve_conjunction(literals, sorts, budget)
            if model is not None and evaluate(formula, model):
                return model
    except ResourceLimit:
        logging.info("Model search hit the atom limit")
    return None
