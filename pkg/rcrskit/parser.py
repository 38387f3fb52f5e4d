"""
Recursive descent parser for the textual formula syntax.

Accepts the canonical rendering of rcrskit.symbolic.render and the usual infix variants:
>=, >, ==, ~ / not, & / and, | / or, -->, forall x:Real. body, exists x. body.
Used for Relation block parameters and in tests.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import re
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

from rcrskit.errors import FormulaSyntaxError
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
    Var,
)

TOKEN_PATTERN = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+(?:\.\d+)?(?:/\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<op>-->|<=|>=|!=|==|~=|[<>=~&|()+\-*/.,:])"
    r")"
)
COMPARISON_TOKENS = ("<", "<=", ">", ">=", "=", "==", "!=", "~=")
KEYWORDS = ("True", "False", "exists", "forall", "not", "and", "or", "sqrt")


def tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = TOKEN_PATTERN.match(text, position)
        if match is None or match.end() == position:
            raise FormulaSyntaxError(f"Unexpected character {text[position]!r} at {position}")
        kind = match.lastgroup
        assert kind is not None
        tokens.append((kind, match.group(kind), match.start(kind)))
        position = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str, sorts: Mapping[str, Sort]):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self.sorts: Dict[str, Sort] = dict(sorts)

    # Token helpers

    def peek(self, offset: int = 0) -> Optional[str]:
        if self.index + offset < len(self.tokens):
            return self.tokens[self.index + offset][1]
        return None

    def advance(self) -> str:
        if self.index >= len(self.tokens):
            raise FormulaSyntaxError(f"Unexpected end of input in {self.text!r}")
        value = self.tokens[self.index][1]
        self.index += 1
        return value

    def expect(self, value: str):
        found = self.advance()
        if found != value:
            position = self.tokens[self.index - 1][2]
            raise FormulaSyntaxError(f"Expected {value!r} but found {found!r} at {position}")

    def error(self, message: str) -> FormulaSyntaxError:
        if self.index < len(self.tokens):
            return FormulaSyntaxError(f"{message} at {self.tokens[self.index][2]}")
        return FormulaSyntaxError(f"{message} at end of input")

    # Formulas

    def formula(self) -> Formula:
        lhs = self.disjunction()
        if self.peek() == "-->":
            self.advance()
            return Implies(lhs, self.formula())
        return lhs

    def disjunction(self) -> Formula:
        args = [self.conjunction()]
        while self.peek() in ("|", "or"):
            self.advance()
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self) -> Formula:
        args = [self.unary()]
        while self.peek() in ("&", "and"):
            self.advance()
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self) -> Formula:
        token = self.peek()
        if token in ("~", "not"):
            self.advance()
            return Not(self.unary())
        if token in ("exists", "forall"):
            return self.quantifier()
        return self.primary()

    def quantifier(self) -> Formula:
        kind = self.advance()
        name = self.advance()
        if not re.match(r"[A-Za-z_]", name) or name in KEYWORDS:
            raise self.error(f"Bad quantified variable {name!r}")
        sort = Sort.REAL
        if self.peek() == ":":
            self.advance()
            sort_name = self.advance()
            try:
                sort = Sort(sort_name.capitalize())
            except ValueError:
                raise self.error(f"Unknown sort {sort_name!r}") from None
        self.expect(".")
        saved = self.sorts.get(name)
        self.sorts[name] = sort
        try:
            body = self.formula()
        finally:
            if saved is None:
                self.sorts.pop(name, None)
            else:
                self.sorts[name] = saved
        quantifier = Exists if kind == "exists" else Forall
        return quantifier(name, sort, body)

    def primary(self) -> Formula:
        token = self.peek()
        if token == "True":
            self.advance()
            return TRUE
        if token == "False":
            self.advance()
            return FALSE
        start = self.index
        try:
            return self.comparison()
        except FormulaSyntaxError:
            self.index = start
        if token == "(":
            self.advance()
            inner = self.formula()
            self.expect(")")
            return inner
        if token is not None and self.tokens[self.index][0] == "name" and token not in KEYWORDS:
            self.advance()
            return BoolVar(token)
        raise self.error("Expected a formula")

    def comparison(self) -> Formula:
        lhs = self.term()
        op = self.peek()
        if op not in COMPARISON_TOKENS:
            raise self.error("Expected a comparison")
        self.advance()
        rhs = self.term()
        if op == ">":
            return Atom("<", rhs, lhs)
        if op == ">=":
            return Atom("<=", rhs, lhs)
        if op == "==":
            op = "="
        if op == "~=":
            op = "!="
        return Atom(op, lhs, rhs)

    # Terms

    def term(self) -> Term:
        result = self.product()
        while self.peek() in ("+", "-"):
            op = self.advance()
            right = self.product()
            result = Add(result, right) if op == "+" else Sub(result, right)
        return result

    def product(self) -> Term:
        result = self.signed()
        while self.peek() in ("*", "/"):
            op = self.advance()
            right = self.signed()
            result = Mul(result, right) if op == "*" else Div(result, right)
        return result

    def signed(self) -> Term:
        if self.peek() == "-":
            self.advance()
            if self.index < len(self.tokens) and self.tokens[self.index][0] == "number":
                return Const(-Fraction(self.advance()))
            return Neg(self.signed())
        return self.leaf()

    def leaf(self) -> Term:
        if self.index >= len(self.tokens):
            raise self.error("Expected a term")
        kind, value, _ = self.tokens[self.index]
        if kind == "number":
            self.advance()
            return Const(Fraction(value))
        if value == "sqrt":
            self.advance()
            self.expect("(")
            arg = self.term()
            self.expect(")")
            return Sqrt(arg)
        if value == "(":
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        if kind == "name" and value not in KEYWORDS:
            self.advance()
            return Var(value, self.sorts.get(value, Sort.REAL))
        raise self.error("Expected a term")


def parse_formula(text: str, sorts: Optional[Mapping[str, Sort]] = None) -> Formula:
    """
    Parses a formula.  Variables default to sort Real unless listed in sorts; a bare name
    standing as a formula is a Bool variable.

    Raises:
        FormulaSyntaxError: text is not a well formed formula
    """
    parser = _Parser(text, sorts or {})
    if not parser.tokens:
        raise FormulaSyntaxError("Empty formula")
    result = parser.formula()
    if parser.index != len(parser.tokens):
        raise parser.error("Trailing input")
    return result


def parse_term(text: str, sorts: Optional[Mapping[str, Sort]] = None) -> Term:
    parser = _Parser(text, sorts or {})
    if not parser.tokens:
        raise FormulaSyntaxError("Empty term")
    result = parser.term()
    if parser.index != len(parser.tokens):
        raise parser.error("Trailing input")
    return result
