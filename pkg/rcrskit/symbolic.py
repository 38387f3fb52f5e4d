"""
    Symbolic terms and first-order formulas over real arithmetic.

    Features:

    Immutable term and formula trees with exact rational constants
    Capture avoiding parallel substitution and variable renaming
    Rewriting based simplification (constant folding, boolean identities, one-point rules,
    miniscoping, dropping of unused and Unit-sorted quantifiers)
    Canonical fully parenthesized rendering, plus a compact rendering for functional sugar
    Exact evaluation used as the sampling oracle of the semantic checks

    Quantifier elimination and the linear decision procedure live in rcrskit.linear.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Tuple, Union

from rcrskit.errors import QuantifiedInput, SortMismatch, UnboundVariable

Number = Union[Fraction, float]

MAX_SIMPLIFY_PASSES = 50
COMPARISONS = ("<", "<=", "=", "!=")
FLOAT_TOLERANCE = 1e-9


class Sort(Enum):
    REAL = "Real"
    BOOL = "Bool"
    UNIT = "Unit"

    def __str__(self):
        return self.value


class TriBool(Enum):
    YES = "Yes"
    NO = "No"
    UNKNOWN = "Unknown"

    def __str__(self):
        return self.value


def as_fraction(value: Any) -> Fraction:
    """
    Converts ints, Fractions and "p/q" strings to Fraction.  Floats are rejected so that no
    inexact literal ends up in a stored term.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rational constants")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"Expected an exact rational, got {value!r} of type {type(value).__name__}")


def render_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


# Terms


class Term:
    """Base class of arithmetic terms.  Operators build raw (unsimplified) trees."""

    @cached_property
    def free_vars(self) -> FrozenSet[str]:
        return self._free()

    @cached_property
    def has_sqrt(self) -> bool:
        return any(child.has_sqrt for child in self.children()) or isinstance(self, Sqrt)

    @cached_property
    def nonlinear(self) -> bool:
        """True if the term contains Sqrt or a product/quotient of two variable terms."""
        if isinstance(self, Sqrt):
            return True
        if isinstance(self, Mul) and self.left.free_vars and self.right.free_vars:
            return True
        if isinstance(self, Div) and self.right.free_vars:
            return True
        return any(child.nonlinear for child in self.children())

    def children(self) -> Tuple["Term", ...]:
        return ()

    def _free(self) -> FrozenSet[str]:
        result: FrozenSet[str] = frozenset()
        for child in self.children():
            result = result | child.free_vars
        return result

    def __add__(self, other):
        return Add(self, as_term(other))

    def __radd__(self, other):
        return Add(as_term(other), self)

    def __sub__(self, other):
        return Sub(self, as_term(other))

    def __rsub__(self, other):
        return Sub(as_term(other), self)

    def __mul__(self, other):
        return Mul(self, as_term(other))

    def __rmul__(self, other):
        return Mul(as_term(other), self)

    def __truediv__(self, other):
        return Div(self, as_term(other))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return render_term(self)

    def __hash__(self):
        return self._hash_value

    @cached_property
    def _hash_value(self) -> int:
        fields = getattr(self, "__dataclass_fields__", {})
        return hash((type(self).__name__,) + tuple(getattr(self, name) for name in fields))


@dataclass(frozen=True)
class Var(Term):
    __hash__ = Term.__hash__
    name: str
    sort: Sort = Sort.REAL

    def _free(self) -> FrozenSet[str]:
        return frozenset((self.name,))


@dataclass(frozen=True)
class Const(Term):
    __hash__ = Term.__hash__
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", as_fraction(self.value))


@dataclass(frozen=True)
class Add(Term):
    __hash__ = Term.__hash__
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Sub(Term):
    __hash__ = Term.__hash__
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Mul(Term):
    __hash__ = Term.__hash__
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Div(Term):
    __hash__ = Term.__hash__
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Neg(Term):
    __hash__ = Term.__hash__
    arg: Term

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Sqrt(Term):
    __hash__ = Term.__hash__
    arg: Term

    def children(self):
        return (self.arg,)


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_term(value: Any) -> Term:
    if isinstance(value, Term):
        return value
    return Const(as_fraction(value))


def term_sort(term: Term) -> Sort:
    if isinstance(term, Var):
        return term.sort
    return Sort.REAL


# Formulas


class Formula:
    """Base class of formulas."""

    @cached_property
    def free_vars(self) -> FrozenSet[str]:
        return self._free()

    @cached_property
    def has_sqrt(self) -> bool:
        return any(child.has_sqrt for child in self.children())

    @cached_property
    def has_quantifier(self) -> bool:
        return any(
            child.has_quantifier for child in self.children() if isinstance(child, Formula)
        )

    @cached_property
    def atom_count(self) -> int:
        return sum(child.atom_count for child in self.children())

    def children(self) -> Tuple[Any, ...]:
        return ()

    def _free(self) -> FrozenSet[str]:
        result: FrozenSet[str] = frozenset()
        for child in self.children():
            result = result | child.free_vars
        return result

    def __str__(self):
        return render(self)

    def __hash__(self):
        return self._hash_value

    @cached_property
    def _hash_value(self) -> int:
        fields = getattr(self, "__dataclass_fields__", {})
        return hash((type(self).__name__,) + tuple(getattr(self, name) for name in fields))


@dataclass(frozen=True)
class TrueF(Formula):
    __hash__ = Formula.__hash__


@dataclass(frozen=True)
class FalseF(Formula):
    __hash__ = Formula.__hash__


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Atom(Formula):
    __hash__ = Formula.__hash__
    op: str
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"Unknown comparison {self.op!r}, expected one of {COMPARISONS}")
        for side in (self.lhs, self.rhs):
            if isinstance(side, Var) and side.sort is Sort.UNIT:
                raise SortMismatch(f"Unit-sorted variable {side.name} used in an atom")

    def children(self):
        return (self.lhs, self.rhs)

    @cached_property
    def atom_count(self) -> int:
        return 1

    @cached_property
    def is_boolean(self) -> bool:
        return term_sort(self.lhs) is Sort.BOOL or term_sort(self.rhs) is Sort.BOOL


@dataclass(frozen=True)
class BoolVar(Formula):
    __hash__ = Formula.__hash__
    name: str

    def _free(self) -> FrozenSet[str]:
        return frozenset((self.name,))

    @cached_property
    def atom_count(self) -> int:
        return 1


@dataclass(frozen=True)
class Not(Formula):
    __hash__ = Formula.__hash__
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    __hash__ = Formula.__hash__
    args: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def children(self):
        return self.args


@dataclass(frozen=True)
class Or(Formula):
    __hash__ = Formula.__hash__
    args: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def children(self):
        return self.args


@dataclass(frozen=True)
class Implies(Formula):
    __hash__ = Formula.__hash__
    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class Exists(Formula):
    __hash__ = Formula.__hash__
    var: str
    sort: Sort
    body: Formula

    def children(self):
        return (self.body,)

    def _free(self) -> FrozenSet[str]:
        return self.body.free_vars - {self.var}

    @cached_property
    def has_quantifier(self) -> bool:
        return True


@dataclass(frozen=True)
class Forall(Formula):
    __hash__ = Formula.__hash__
    var: str
    sort: Sort
    body: Formula

    def children(self):
        return (self.body,)

    def _free(self) -> FrozenSet[str]:
        return self.body.free_vars - {self.var}

    @cached_property
    def has_quantifier(self) -> bool:
        return True


Quantifier = (Exists, Forall)


# Builders


def eq(lhs: Any, rhs: Any) -> Atom:
    return Atom("=", as_term(lhs), as_term(rhs))


def ne(lhs: Any, rhs: Any) -> Atom:
    return Atom("!=", as_term(lhs), as_term(rhs))


def lt(lhs: Any, rhs: Any) -> Atom:
    return Atom("<", as_term(lhs), as_term(rhs))


def le(lhs: Any, rhs: Any) -> Atom:
    return Atom("<=", as_term(lhs), as_term(rhs))


def gt(lhs: Any, rhs: Any) -> Atom:
    return Atom("<", as_term(rhs), as_term(lhs))


def ge(lhs: Any, rhs: Any) -> Atom:
    return Atom("<=", as_term(rhs), as_term(lhs))


def conj(*formulas: Formula) -> Formula:
    """Conjunction with flattening; the empty conjunction is True."""
    args: List[Formula] = []
    for formula in formulas:
        if isinstance(formula, And):
            args.extend(formula.args)
        elif formula != TRUE:
            args.append(formula)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(tuple(args))


def disj(*formulas: Formula) -> Formula:
    """Disjunction with flattening; the empty disjunction is False."""
    args: List[Formula] = []
    for formula in formulas:
        if isinstance(formula, Or):
            args.extend(formula.args)
        elif formula != FALSE:
            args.append(formula)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(tuple(args))


def conjuncts(formula: Formula) -> Tuple[Formula, ...]:
    if isinstance(formula, And):
        return formula.args
    if formula == TRUE:
        return ()
    return (formula,)


def disjuncts(formula: Formula) -> Tuple[Formula, ...]:
    if isinstance(formula, Or):
        return formula.args
    if formula == FALSE:
        return ()
    return (formula,)


def exists_all(names: Iterable[Tuple[str, Sort]], body: Formula) -> Formula:
    """Wraps body in existential quantifiers, the first name outermost."""
    result = body
    for name, sort in reversed(list(names)):
        result = Exists(name, sort, result)
    return result


def forall_all(names: Iterable[Tuple[str, Sort]], body: Formula) -> Formula:
    result = body
    for name, sort in reversed(list(names)):
        result = Forall(name, sort, result)
    return result


# Names


def fresh_var(base: str, avoid: Iterable[str]) -> str:
    """
    Returns base if it is not in avoid, otherwise base_k for the smallest k >= 1 not in avoid.
    """
    avoid_set = avoid if isinstance(avoid, (set, frozenset)) else set(avoid)
    if base not in avoid_set:
        return base
    k = 1
    while f"{base}_{k}" in avoid_set:
        k += 1
    return f"{base}_{k}"


def var_sorts(formula: Union[Formula, Term]) -> Dict[str, Sort]:
    """Sorts of the free variables of a formula or term, read off their occurrences."""
    sorts: Dict[str, Sort] = {}

    def visit_term(term: Term, bound: FrozenSet[str]):
        if isinstance(term, Var):
            if term.name not in bound:
                sorts.setdefault(term.name, term.sort)
            return
        for child in term.children():
            visit_term(child, bound)

    def visit(node: Formula, bound: FrozenSet[str]):
        if isinstance(node, BoolVar):
            if node.name not in bound:
                sorts.setdefault(node.name, Sort.BOOL)
        elif isinstance(node, Atom):
            visit_term(node.lhs, bound)
            visit_term(node.rhs, bound)
        elif isinstance(node, Quantifier):
            visit(node.body, bound | {node.var})
        else:
            for child in node.children():
                visit(child, bound)

    if isinstance(formula, Term):
        visit_term(formula, frozenset())
    else:
        visit(formula, frozenset())
    return sorts


# Substitution


def substitute_term(term: Term, binding: Mapping[str, Term]) -> Term:
    if not binding or not (term.free_vars & binding.keys()):
        return term
    if isinstance(term, Var):
        replacement = binding.get(term.name)
        if replacement is None:
            return term
        if term_sort(replacement) is not term.sort:
            raise SortMismatch(
                f"Cannot substitute {render_term(replacement)} of sort {term_sort(replacement)} "
                f"for {term.name} of sort {term.sort}"
            )
        return replacement
    if isinstance(term, (Add, Sub, Mul, Div)):
        return type(term)(
            substitute_term(term.left, binding), substitute_term(term.right, binding)
        )
    if isinstance(term, (Neg, Sqrt)):
        return type(term)(substitute_term(term.arg, binding))
    return term


def substitute(formula: Formula, binding: Mapping[str, Term]) -> Formula:
    """
    Parallel, capture avoiding substitution of free variables.  Bound variables that would
    capture a free variable of a replacement term are renamed with fresh_var.

    Raises:
        SortMismatch: a replacement term's sort differs from the variable's sort
    """
    relevant = {k: v for k, v in binding.items() if k in formula.free_vars}
    if not relevant:
        return formula
    return _substitute(formula, relevant)


def _substitute(formula: Formula, binding: Mapping[str, Term]) -> Formula:
    if not (formula.free_vars & binding.keys()):
        return formula
    if isinstance(formula, Atom):
        return Atom(
            formula.op,
            substitute_term(formula.lhs, binding),
            substitute_term(formula.rhs, binding),
        )
    if isinstance(formula, BoolVar):
        replacement = binding[formula.name]
        if not (isinstance(replacement, Var) and replacement.sort is Sort.BOOL):
            raise SortMismatch(
                f"Cannot substitute {render_term(replacement)} for Bool variable {formula.name}"
            )
        return BoolVar(replacement.name)
    if isinstance(formula, Not):
        return Not(_substitute(formula.arg, binding))
    if isinstance(formula, And):
        return And(tuple(_substitute(arg, binding) for arg in formula.args))
    if isinstance(formula, Or):
        return Or(tuple(_substitute(arg, binding) for arg in formula.args))
    if isinstance(formula, Implies):
        return Implies(_substitute(formula.lhs, binding), _substitute(formula.rhs, binding))
    if isinstance(formula, Quantifier):
        inner = {k: v for k, v in binding.items() if k != formula.var}
        inner = {k: v for k, v in inner.items() if k in formula.body.free_vars}
        if not inner:
            return formula
        incoming: FrozenSet[str] = frozenset()
        for term in inner.values():
            incoming = incoming | term.free_vars
        var = formula.var
        if var in incoming:
            avoid = set(incoming) | set(formula.body.free_vars) | set(inner.keys())
            var = fresh_var(formula.var, avoid)
            inner[formula.var] = Var(var, formula.sort)
        return type(formula)(var, formula.sort, _substitute(formula.body, inner))
    return formula


def rename(formula: Formula, mapping: Mapping[str, str]) -> Formula:
    """Renames free variables, keeping each variable's sort."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return formula
    sorts = var_sorts(formula)
    binding = {old: Var(new, sorts[old]) for old, new in mapping.items() if old in sorts}
    return substitute(formula, binding)


def rename_term(term: Term, mapping: Mapping[str, str]) -> Term:
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return term
    sorts = var_sorts(term)
    binding = {old: Var(new, sorts[old]) for old, new in mapping.items() if old in sorts}
    return substitute_term(term, binding)


def assign_bool(formula: Formula, name: str, value: bool) -> Formula:
    """Replaces the free Bool variable name by a truth value."""
    if name not in formula.free_vars:
        return formula
    if isinstance(formula, BoolVar):
        return TRUE if value else FALSE
    if isinstance(formula, Atom):
        if not formula.is_boolean:
            return formula
        lhs, rhs = formula.lhs, formula.rhs
        other = rhs if isinstance(lhs, Var) and lhs.name == name else lhs
        if isinstance(other, Var) and other.name == name:
            same = TRUE
        else:
            assert isinstance(other, Var)
            same = BoolVar(other.name) if value else Not(BoolVar(other.name))
        if formula.op == "=":
            return same
        if formula.op == "!=":
            return Not(same)
        raise SortMismatch(f"Ordering comparison on Bool variable {name}")
    if isinstance(formula, Not):
        return Not(assign_bool(formula.arg, name, value))
    if isinstance(formula, And):
        return And(tuple(assign_bool(arg, name, value) for arg in formula.args))
    if isinstance(formula, Or):
        return Or(tuple(assign_bool(arg, name, value) for arg in formula.args))
    if isinstance(formula, Implies):
        return Implies(
            assign_bool(formula.lhs, name, value), assign_bool(formula.rhs, name, value)
        )
    if isinstance(formula, Quantifier):
        if formula.var == name:
            return formula
        return type(formula)(formula.var, formula.sort, assign_bool(formula.body, name, value))
    return formula


def replace_terms(formula: Formula, mapping: Mapping[Term, Term]) -> Formula:
    """Structural replacement of whole subterms (used to relax nonlinear subterms)."""
    if not mapping:
        return formula

    def on_term(term: Term) -> Term:
        if term in mapping:
            return mapping[term]
        if isinstance(term, (Add, Sub, Mul, Div)):
            return type(term)(on_term(term.left), on_term(term.right))
        if isinstance(term, (Neg, Sqrt)):
            return type(term)(on_term(term.arg))
        return term

    return map_atoms(formula, lambda atom: Atom(atom.op, on_term(atom.lhs), on_term(atom.rhs)))


def map_atoms(formula: Formula, function: Callable[[Atom], Formula]) -> Formula:
    if isinstance(formula, Atom):
        return function(formula)
    if isinstance(formula, Not):
        return Not(map_atoms(formula.arg, function))
    if isinstance(formula, And):
        return And(tuple(map_atoms(arg, function) for arg in formula.args))
    if isinstance(formula, Or):
        return Or(tuple(map_atoms(arg, function) for arg in formula.args))
    if isinstance(formula, Implies):
        return Implies(map_atoms(formula.lhs, function), map_atoms(formula.rhs, function))
    if isinstance(formula, Quantifier):
        return type(formula)(formula.var, formula.sort, map_atoms(formula.body, function))
    return formula


def atoms(formula: Formula) -> List[Atom]:
    found: List[Atom] = []

    def visit(node: Formula):
        if isinstance(node, Atom):
            found.append(node)
        else:
            for child in node.children():
                visit(child)

    visit(formula)
    return found


def freshen(formula: Formula, avoid: Iterable[str] = ()) -> Formula:
    """Renames bound variables so no binder shadows another binder or a free variable."""
    used = set(avoid) | set(formula.free_vars)

    def visit(node: Formula) -> Formula:
        if isinstance(node, Quantifier):
            var = fresh_var(node.var, used)
            used.add(var)
            body = node.body
            if var != node.var:
                body = substitute(body, {node.var: Var(var, node.sort)})
            return type(node)(var, node.sort, visit(body))
        if isinstance(node, Not):
            return Not(visit(node.arg))
        if isinstance(node, And):
            return And(tuple(visit(arg) for arg in node.args))
        if isinstance(node, Or):
            return Or(tuple(visit(arg) for arg in node.args))
        if isinstance(node, Implies):
            return Implies(visit(node.lhs), visit(node.rhs))
        return node

    return visit(formula)


# Simplification


def _exact_sqrt(value: Fraction):
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    root_num, root_den = math.isqrt(num), math.isqrt(den)
    if root_num * root_num == num and root_den * root_den == den:
        return Fraction(root_num, root_den)
    return None


def simplify_term(term: Term) -> Term:
    """Constant folding over exact rationals and the unit/zero identities."""
    if isinstance(term, (Var, Const)):
        return term
    if isinstance(term, Neg):
        arg = simplify_term(term.arg)
        if isinstance(arg, Const):
            return Const(-arg.value)
        if isinstance(arg, Neg):
            return arg.arg
        return Neg(arg)
    if isinstance(term, Sqrt):
        arg = simplify_term(term.arg)
        if isinstance(arg, Const):
            root = _exact_sqrt(arg.value)
            if root is not None:
                return Const(root)
        return Sqrt(arg)
    left = simplify_term(term.left)  # type: ignore[attr-defined]
    right = simplify_term(term.right)  # type: ignore[attr-defined]
    lconst = left.value if isinstance(left, Const) else None
    rconst = right.value if isinstance(right, Const) else None
    if isinstance(term, Add):
        if lconst is not None and rconst is not None:
            return Const(lconst + rconst)
        if lconst == 0:
            return right
        if rconst == 0:
            return left
        return Add(left, right)
    if isinstance(term, Sub):
        if lconst is not None and rconst is not None:
            return Const(lconst - rconst)
        if rconst == 0:
            return left
        if lconst == 0:
            return simplify_term(Neg(right))
        if left == right and not left.has_sqrt:
            return ZERO
        return Sub(left, right)
    if isinstance(term, Mul):
        if lconst is not None and rconst is not None:
            return Const(lconst * rconst)
        if (lconst == 0 and not right.has_sqrt) or (rconst == 0 and not left.has_sqrt):
            return ZERO
        if lconst == 1:
            return right
        if rconst == 1:
            return left
        if lconst == -1:
            return simplify_term(Neg(right))
        if rconst == -1:
            return simplify_term(Neg(left))
        return Mul(left, right)
    if isinstance(term, Div):
        if lconst is not None and rconst is not None and rconst != 0:
            return Const(lconst / rconst)
        if rconst == 1:
            return left
        return Div(left, right)
    return term


_FLIPPED = {
    "<": lambda lhs, rhs: Atom("<=", rhs, lhs),
    "<=": lambda lhs, rhs: Atom("<", rhs, lhs),
    "=": lambda lhs, rhs: Atom("!=", lhs, rhs),
    "!=": lambda lhs, rhs: Atom("=", lhs, rhs),
}


def flip_atom(atom: Atom) -> Atom:
    """The complementary comparison, regardless of square roots."""
    return _FLIPPED[atom.op](atom.lhs, atom.rhs)


def sqrt_arguments(formula: Union[Atom, Term]) -> List[Term]:
    """Arguments of all Sqrt subterms, innermost first, without repetition."""
    found: List[Term] = []

    def visit(term: Term):
        for child in term.children():
            visit(child)
        if isinstance(term, Sqrt) and term.arg not in found:
            found.append(term.arg)

    if isinstance(formula, Atom):
        visit(formula.lhs)
        visit(formula.rhs)
    else:
        visit(formula)
    return found


def definedness(term: Term) -> List[Formula]:
    """
    Conditions under which term has a value: square root arguments are non-negative and
    variable divisors are non-zero.  Empty for total terms.
    """
    conditions: List[Formula] = [Atom("<=", ZERO, arg) for arg in sqrt_arguments(term)]

    def visit(node: Term):
        for child in node.children():
            visit(child)
        if isinstance(node, Div):
            if isinstance(node.right, Const):
                if node.right.value == 0:
                    conditions.append(FALSE)
            elif node.right.free_vars:
                condition = Atom("!=", node.right, ZERO)
                if condition not in conditions:
                    conditions.append(condition)

    visit(term)
    return conditions


def negate_atom(atom: Atom) -> Formula:
    """Negation pushed into the comparison.  Atoms with Sqrt keep an explicit Not."""
    if atom.has_sqrt:
        return Not(atom)
    if atom.is_boolean and atom.op in ("<", "<="):
        return Not(atom)
    return _FLIPPED[atom.op](atom.lhs, atom.rhs)


def compare(op: str, lhs: Number, rhs: Number, tolerance: float = FLOAT_TOLERANCE) -> bool:
    if isinstance(lhs, Fraction) and isinstance(rhs, Fraction):
        if op == "<":
            return lhs < rhs
        if op == "<=":
            return lhs <= rhs
        if op == "=":
            return lhs == rhs
        return lhs != rhs
    close = math.isclose(float(lhs), float(rhs), rel_tol=tolerance, abs_tol=tolerance)
    if op == "<":
        return lhs < rhs and not close
    if op == "<=":
        return lhs < rhs or close
    if op == "=":
        return close
    return not close


def simplify(formula: Formula) -> Formula:
    """
    Rewrites formula to a fixed point of the simplification rules.  The result is
    semantically equivalent and its free variables are a subset of the input's.
    """
    for _ in range(MAX_SIMPLIFY_PASSES):
        simplified = _simplify(formula)
        if simplified == formula:
            return simplified
        formula = simplified
    return formula


def _simplify(formula: Formula) -> Formula:
    if isinstance(formula, (TrueF, FalseF, BoolVar)):
        return formula
    if isinstance(formula, Atom):
        return _simplify_atom(formula)
    if isinstance(formula, Not):
        return _simplify_not(_simplify(formula.arg))
    if isinstance(formula, And):
        return _simplify_and([_simplify(arg) for arg in formula.args])
    if isinstance(formula, Or):
        return _simplify_or([_simplify(arg) for arg in formula.args])
    if isinstance(formula, Implies):
        return _simplify_implies(_simplify(formula.lhs), _simplify(formula.rhs))
    if isinstance(formula, Exists):
        return _simplify_exists(formula.var, formula.sort, _simplify(formula.body))
    if isinstance(formula, Forall):
        return _simplify_forall(formula.var, formula.sort, _simplify(formula.body))
    return formula


def _simplify_atom(atom: Atom) -> Formula:
    if atom.is_boolean:
        if atom.lhs == atom.rhs:
            return TRUE if atom.op in ("=", "<=") else FALSE
        return atom
    lhs, rhs = simplify_term(atom.lhs), simplify_term(atom.rhs)
    if isinstance(lhs, Const) and isinstance(rhs, Const):
        return TRUE if compare(atom.op, lhs.value, rhs.value) else FALSE
    if lhs == rhs:
        # An atom over an undefined term is false, so t = t only holds where t is defined.
        if atom.op not in ("=", "<="):
            return FALSE
        return _simplify_and([_simplify_atom(condition) for condition in definedness(lhs)])
    return Atom(atom.op, lhs, rhs)


def _simplify_not(arg: Formula) -> Formula:
    if arg == TRUE:
        return FALSE
    if arg == FALSE:
        return TRUE
    if isinstance(arg, Not):
        return arg.arg
    if isinstance(arg, Atom):
        return negate_atom(arg)
    return Not(arg)


def _dedupe(args: Iterable[Formula]) -> List[Formula]:
    seen = set()
    result = []
    for arg in args:
        if arg not in seen:
            seen.add(arg)
            result.append(arg)
    return result


def _complementary(args: List[Formula]) -> bool:
    present = set(args)
    for arg in args:
        if isinstance(arg, Not) and arg.arg in present:
            return True
    return False


def _simplify_and(args: List[Formula]) -> Formula:
    flat: List[Formula] = []
    for arg in args:
        if arg == FALSE:
            return FALSE
        if isinstance(arg, And):
            flat.extend(arg.args)
        elif arg != TRUE:
            flat.append(arg)
    flat = _dedupe(flat)
    if _complementary(flat):
        return FALSE
    return conj(*flat)


def _simplify_or(args: List[Formula]) -> Formula:
    flat: List[Formula] = []
    for arg in args:
        if arg == TRUE:
            return TRUE
        if isinstance(arg, Or):
            flat.extend(arg.args)
        elif arg != FALSE:
            flat.append(arg)
    flat = _dedupe(flat)
    if _complementary(flat):
        return TRUE
    return disj(*flat)


def _simplify_implies(lhs: Formula, rhs: Formula) -> Formula:
    if lhs == FALSE or rhs == TRUE or lhs == rhs:
        return TRUE
    if lhs == TRUE:
        return rhs
    if rhs == FALSE:
        return _simplify_not(lhs)
    return Implies(lhs, rhs)


def _defining_term(literal: Formula, var: str, sort: Sort):
    """If literal is `var = t` (either orientation) with var not in t, returns t."""
    if not isinstance(literal, Atom) or literal.op != "=":
        return None
    for side, other in ((literal.lhs, literal.rhs), (literal.rhs, literal.lhs)):
        if isinstance(side, Var) and side.name == var and var not in other.free_vars:
            if term_sort(other) is sort:
                return other
    return None


def _negated_definition(literal: Formula, var: str, sort: Sort):
    """If literal is `var != t` or `~(var = t)`, returns t."""
    if isinstance(literal, Atom) and literal.op == "!=":
        return _defining_term(Atom("=", literal.lhs, literal.rhs), var, sort)
    if isinstance(literal, Not):
        return _defining_term(literal.arg, var, sort)
    return None


def _simplify_exists(var: str, sort: Sort, body: Formula) -> Formula:
    if sort is Sort.UNIT or var not in body.free_vars:
        return body
    if isinstance(body, Or):
        return _simplify_or([_simplify_exists(var, sort, arg) for arg in body.args])
    parts = conjuncts(body)
    outside = [part for part in parts if var not in part.free_vars]
    inside = [part for part in parts if var in part.free_vars]
    for index, part in enumerate(inside):
        term = _defining_term(part, var, sort)
        if term is not None:
            rest = conj(*(inside[:index] + inside[index + 1 :]))
            return _simplify_and(outside + definedness(term) + [substitute(rest, {var: term})])
    if outside:
        return _simplify_and(outside + [Exists(var, sort, conj(*inside))])
    return Exists(var, sort, body)


def _simplify_forall(var: str, sort: Sort, body: Formula) -> Formula:
    if sort is Sort.UNIT or var not in body.free_vars:
        return body
    if isinstance(body, And):
        return _simplify_and([_simplify_forall(var, sort, arg) for arg in body.args])
    if isinstance(body, Implies):
        hypotheses = list(conjuncts(body.lhs))
        for index, part in enumerate(hypotheses):
            term = _defining_term(part, var, sort)
            if term is not None:
                rest = conj(*(hypotheses[:index] + hypotheses[index + 1 :]))
                instance = substitute(_simplify_implies(rest, body.rhs), {var: term})
                # Vacuous where term is undefined.
                return _simplify_implies(conj(*definedness(term)), instance)
        if var not in body.lhs.free_vars:
            return _simplify_implies(body.lhs, _simplify_forall(var, sort, body.rhs))
        if var not in body.rhs.free_vars:
            return _simplify_implies(_simplify_exists(var, sort, body.lhs), body.rhs)
        return Forall(var, sort, body)
    if isinstance(body, Or):
        parts = list(body.args)
        for index, part in enumerate(parts):
            term = _negated_definition(part, var, sort)
            if term is not None and not definedness(term):
                rest = disj(*(parts[:index] + parts[index + 1 :]))
                return substitute(rest, {var: term})
        outside = [part for part in parts if var not in part.free_vars]
        inside = [part for part in parts if var in part.free_vars]
        if outside:
            return _simplify_or(outside + [Forall(var, sort, disj(*inside))])
    return Forall(var, sort, body)


# Rendering


def render_term(term: Term) -> str:
    """Canonical fully parenthesized rendering."""
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Const):
        return render_rational(term.value)
    if isinstance(term, Neg):
        return f"(-{render_term(term.arg)})"
    if isinstance(term, Sqrt):
        return f"sqrt({render_term(term.arg)})"
    symbol = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(term)]
    return f"({render_term(term.left)} {symbol} {render_term(term.right)})"  # type: ignore


_PRECEDENCE = {Add: 1, Sub: 1, Mul: 2, Div: 2}


def _compact_precedence(term: Term) -> int:
    if isinstance(term, Const):
        if term.value < 0:
            return 3
        return 4 if term.value.denominator == 1 else 2
    if isinstance(term, Neg):
        return 3
    return _PRECEDENCE.get(type(term), 4)


def render_compact(term: Term) -> str:
    """Minimal parentheses, no spaces: the style of functional component sugar (s+g)."""
    if isinstance(term, (Var, Const)):
        return render_term(term)
    if isinstance(term, Sqrt):
        return f"sqrt({render_compact(term.arg)})"
    if isinstance(term, Neg):
        inner = render_compact(term.arg)
        if _compact_precedence(term.arg) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    precedence = _PRECEDENCE[type(term)]
    symbol = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(term)]
    left = render_compact(term.left)  # type: ignore[attr-defined]
    right = render_compact(term.right)  # type: ignore[attr-defined]
    if _compact_precedence(term.left) < precedence:  # type: ignore[attr-defined]
        left = f"({left})"
    if _compact_precedence(term.right) <= precedence:  # type: ignore[attr-defined]
        right = f"({right})"
    return f"{left}{symbol}{right}"


def render(formula: Formula) -> str:
    """Canonical fully parenthesized rendering, bit-exact and covered by golden tests."""
    if isinstance(formula, TrueF):
        return "True"
    if isinstance(formula, FalseF):
        return "False"
    if isinstance(formula, Atom):
        return f"({render_term(formula.lhs)} {formula.op} {render_term(formula.rhs)})"
    if isinstance(formula, BoolVar):
        return formula.name
    if isinstance(formula, Not):
        return f"(~{render(formula.arg)})"
    if isinstance(formula, And):
        return "(" + " & ".join(render(arg) for arg in formula.args) + ")"
    if isinstance(formula, Or):
        return "(" + " | ".join(render(arg) for arg in formula.args) + ")"
    if isinstance(formula, Implies):
        return f"({render(formula.lhs)} --> {render(formula.rhs)})"
    if isinstance(formula, Exists):
        return f"(exists {formula.var}:{formula.sort}. {render(formula.body)})"
    if isinstance(formula, Forall):
        return f"(forall {formula.var}:{formula.sort}. {render(formula.body)})"
    raise TypeError(f"Cannot render {formula!r}")


# Evaluation


class _Undefined:
    def __repr__(self):
        return "UNDEFINED"


UNDEFINED = _Undefined()

EnvValue = Union[Fraction, float, bool, None]


class _Evaluation:
    def __init__(self, env: Mapping[str, Any], tolerance: float = FLOAT_TOLERANCE):
        self.env = env
        self.tolerance = tolerance
        self.undefined = False

    def lookup(self, name: str):
        if name not in self.env:
            raise UnboundVariable(f"No value for variable {name}")
        value = self.env[name]
        if isinstance(value, int) and not isinstance(value, bool):
            return Fraction(value)
        return value

    def term(self, term: Term):
        if isinstance(term, Var):
            return self.lookup(term.name)
        if isinstance(term, Const):
            return term.value
        if isinstance(term, Neg):
            value = self.term(term.arg)
            return value if value is UNDEFINED else -value
        if isinstance(term, Sqrt):
            value = self.term(term.arg)
            if value is UNDEFINED or value < 0:
                return UNDEFINED
            if isinstance(value, Fraction):
                root = _exact_sqrt(value)
                if root is not None:
                    return root
            return math.sqrt(value)
        left = self.term(term.left)  # type: ignore[attr-defined]
        right = self.term(term.right)  # type: ignore[attr-defined]
        if left is UNDEFINED or right is UNDEFINED:
            return UNDEFINED
        if isinstance(left, float) or isinstance(right, float):
            left, right = float(left), float(right)
        if isinstance(term, Add):
            return left + right
        if isinstance(term, Sub):
            return left - right
        if isinstance(term, Mul):
            return left * right
        if right == 0:
            return UNDEFINED
        return left / right

    def formula(self, formula: Formula) -> bool:
        if isinstance(formula, TrueF):
            return True
        if isinstance(formula, FalseF):
            return False
        if isinstance(formula, BoolVar):
            return bool(self.lookup(formula.name))
        if isinstance(formula, Atom):
            if formula.is_boolean:
                lhs, rhs = self.term(formula.lhs), self.term(formula.rhs)
                return (lhs == rhs) if formula.op in ("=", "<=") else (lhs != rhs)
            lhs, rhs = self.term(formula.lhs), self.term(formula.rhs)
            if lhs is UNDEFINED or rhs is UNDEFINED:
                self.undefined = True
                return False
            return compare(formula.op, lhs, rhs, self.tolerance)
        if isinstance(formula, Not):
            return not self.formula(formula.arg)
        if isinstance(formula, And):
            return all([self.formula(arg) for arg in formula.args])
        if isinstance(formula, Or):
            return any([self.formula(arg) for arg in formula.args])
        if isinstance(formula, Implies):
            lhs = self.formula(formula.lhs)
            rhs = self.formula(formula.rhs)
            return (not lhs) or rhs
        raise QuantifiedInput(f"Cannot evaluate quantified formula {render(formula)}")


def evaluate(
    expression: Union[Formula, Term], env: Mapping[str, Any], tolerance: float = FLOAT_TOLERANCE
):
    """
    Standard interpretation under env.  Formulas give a bool, terms give a Fraction, a float
    (irrational square roots) or UNDEFINED (square root of a negative, division by zero).

    Raises:
        UnboundVariable: a free variable has no value in env
        QuantifiedInput: the formula contains a quantifier
    """
    evaluation = _Evaluation(env, tolerance)
    if isinstance(expression, Term):
        return evaluation.term(expression)
    return evaluation.formula(expression)


def evaluate_flagged(
    formula: Formula, env: Mapping[str, Any], tolerance: float = FLOAT_TOLERANCE
) -> Tuple[bool, bool]:
    """Like evaluate, also reporting whether an undefined value poisoned an atom."""
    evaluation = _Evaluation(env, tolerance)
    value = evaluation.formula(formula)
    return value, evaluation.undefined
