"""
    The component algebra: atomic components {. pre .} o [: rel :], the serial, parallel and
    feedback operators, and normalization of composition expressions to a single atomic
    component.

    Features:

    AtomicComponent with validated signatures and automatic detection of functional form
    Serial composition with the weakest precondition rule, substitution fast path when the
    first component is functional
    Parallel composition with automatic renaming of the second operand
    Feedback over the first input and output when the first output has a functional definition
    normalize(), with three valued bottom detection
    semantically_equal(), an exact check on linear formulas with a sampling fallback
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from rcrskit.errors import (
    AlgebraicLoop,
    ArityMismatch,
    FreeVariableEscape,
    NonFunctionalFeedback,
    ResourceLimit,
    SignatureMismatch,
    SortMismatch,
)
from rcrskit.linear import Mode, decide_linear, eliminate_quantifiers, find_model
from rcrskit.settings import DEFAULT_ATOM_LIMIT, AnalysisSettings
from rcrskit.symbolic import (
    FALSE,
    TRUE,
    UNDEFINED,
    Atom,
    Formula,
    Implies,
    Not,
    Sort,
    Term,
    TriBool,
    Var,
    conj,
    conjuncts,
    eq,
    evaluate,
    evaluate_flagged,
    exists_all,
    forall_all,
    fresh_var,
    render,
    render_compact,
    rename,
    rename_term,
    simplify,
    simplify_term,
    substitute,
    substitute_term,
    term_sort,
    var_sorts,
)


@dataclass(frozen=True)
class Port:
    name: str
    sort: Sort = Sort.REAL

    def __str__(self):
        return self.name


PortLike = Union[Port, str, Tuple[str, Sort]]


def as_ports(ports: Iterable[PortLike]) -> Tuple[Port, ...]:
    result = []
    for port in ports:
        if isinstance(port, Port):
            result.append(port)
        elif isinstance(port, str):
            result.append(Port(port))
        else:
            result.append(Port(port[0], port[1]))
    return tuple(result)


@dataclass(frozen=True)
class AtomicComponent:
    """
    {. pre .} o [: inputs ~> outputs . rel :].  fundefs maps every output to a term over the
    inputs when the component is functional, in which case rel is the conjunction of the
    defining equalities in output order.
    """

    name: str
    inputs: Tuple[Port, ...]
    outputs: Tuple[Port, ...]
    pre: Formula = TRUE
    rel: Formula = TRUE
    fundefs: Optional[Dict[str, Term]] = field(default=None, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", as_ports(self.inputs))
        object.__setattr__(self, "outputs", as_ports(self.outputs))
        input_names = [port.name for port in self.inputs]
        output_names = [port.name for port in self.outputs]
        if len(set(input_names)) != len(input_names):
            raise ValueError(f"Component {self.name} has duplicate input names {input_names}")
        if len(set(output_names)) != len(output_names):
            raise ValueError(f"Component {self.name} has duplicate output names {output_names}")
        if set(input_names) & set(output_names):
            raise ValueError(
                f"Component {self.name} reuses names between inputs and outputs: "
                f"{sorted(set(input_names) & set(output_names))}"
            )
        escaped = self.pre.free_vars - set(input_names)
        if escaped:
            raise FreeVariableEscape(
                f"Precondition of {self.name} mentions non-inputs {sorted(escaped)}"
            )
        escaped = self.rel.free_vars - set(input_names) - set(output_names)
        if escaped:
            raise FreeVariableEscape(
                f"Relation of {self.name} mentions unknown variables {sorted(escaped)}"
            )
        sorts = {port.name: port.sort for port in self.inputs + self.outputs}
        for formula in (self.pre, self.rel):
            for name, sort in var_sorts(formula).items():
                if sorts[name] is not sort:
                    raise SortMismatch(
                        f"Variable {name} of {self.name} is declared {sorts[name]} "
                        f"but used as {sort}"
                    )
        if self.fundefs is not None:
            if list(self.fundefs) != output_names:
                raise ValueError(f"Functional definitions of {self.name} must follow the outputs")
            for output, term in self.fundefs.items():
                if term.free_vars - set(input_names):
                    raise FreeVariableEscape(
                        f"Definition of {output} in {self.name} mentions non-inputs "
                        f"{sorted(term.free_vars - set(input_names))}"
                    )
                if term_sort(term) is not sorts[output]:
                    raise SortMismatch(f"Definition of {output} in {self.name} has the wrong sort")
            expected = conj(*(eq(Var(o, sorts[o]), t) for o, t in self.fundefs.items()))
            if self.rel != expected:
                raise ValueError(f"Relation of {self.name} does not match its definitions")
        return

    @property
    def input_names(self) -> List[str]:
        return [port.name for port in self.inputs]

    @property
    def output_names(self) -> List[str]:
        return [port.name for port in self.outputs]

    @property
    def port_names(self) -> List[str]:
        return self.input_names + self.output_names

    @property
    def is_functional(self) -> bool:
        return self.fundefs is not None

    @property
    def is_bottom(self) -> bool:
        return self.pre == FALSE

    def get_signature_dict(self) -> dict:
        return {
            "inputs": [(port.name, str(port.sort)) for port in self.inputs],
            "outputs": [(port.name, str(port.sort)) for port in self.outputs],
        }

    def __str__(self):
        return render_component(self)


def _functional_definitions(
    rel: Formula, inputs: Sequence[Port], outputs: Sequence[Port]
) -> Optional[Dict[str, Term]]:
    """Definitions when rel is exactly a conjunction of `out = term over inputs`, else None."""
    output_names = {port.name for port in outputs}
    sorts = {port.name: port.sort for port in outputs}
    found: Dict[str, Term] = {}
    for part in conjuncts(rel):
        if not isinstance(part, Atom) or part.op != "=":
            return None
        for side, other in ((part.lhs, part.rhs), (part.rhs, part.lhs)):
            if (
                isinstance(side, Var)
                and side.name in output_names
                and side.name not in found
                and not (other.free_vars & output_names)
                and term_sort(other) is sorts[side.name]
            ):
                found[side.name] = other
                break
        else:
            return None
    if set(found) != output_names:
        return None
    return {port.name: found[port.name] for port in outputs}


def mk_assert_update(
    inputs: Iterable[PortLike],
    outputs: Iterable[PortLike],
    pre: Formula = TRUE,
    rel: Formula = TRUE,
    name: str = "C",
) -> AtomicComponent:
    """
    Builds {. pre .} o [: inputs ~> outputs . rel :].  When rel is a conjunction of output
    equalities with output free right hand sides the component gets functional definitions.

    Raises:
        FreeVariableEscape: pre or rel mentions a variable outside the signature
        SortMismatch: a variable is used with a sort other than its port's
    """
    inputs, outputs = as_ports(inputs), as_ports(outputs)
    fundefs = _functional_definitions(rel, inputs, outputs)
    if fundefs is not None:
        sorts = {port.name: port.sort for port in outputs}
        rel = conj(*(eq(Var(o, sorts[o]), t) for o, t in fundefs.items()))
    return AtomicComponent(name, inputs, outputs, pre, rel, fundefs)


def mk_functional(
    inputs: Iterable[PortLike],
    definitions: Sequence[Tuple[PortLike, Term]],
    pre: Formula = TRUE,
    name: str = "C",
) -> AtomicComponent:
    """{. pre .} o [- inputs ~> terms -] from (output, term) pairs."""
    outputs = as_ports(port for port, _ in definitions)
    fundefs = {port.name: term for port, (_, term) in zip(outputs, definitions)}
    rel = conj(*(eq(Var(port.name, port.sort), fundefs[port.name]) for port in outputs))
    return AtomicComponent(name, as_ports(inputs), outputs, pre, rel, fundefs)


def bottom(inputs: Iterable[PortLike], outputs: Iterable[PortLike], name: str = "bot"):
    return AtomicComponent(name, as_ports(inputs), as_ports(outputs), FALSE, FALSE)


def rename_component(component: AtomicComponent, mapping: Mapping[str, str]) -> AtomicComponent:
    """Renames ports (parallel renaming) in the signature, formulas and definitions."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return component
    inputs = tuple(Port(mapping.get(p.name, p.name), p.sort) for p in component.inputs)
    outputs = tuple(Port(mapping.get(p.name, p.name), p.sort) for p in component.outputs)
    fundefs = None
    if component.fundefs is not None:
        fundefs = {
            mapping.get(o, o): rename_term(t, mapping) for o, t in component.fundefs.items()
        }
    return AtomicComponent(
        component.name,
        inputs,
        outputs,
        rename(component.pre, mapping),
        rename(component.rel, mapping),
        fundefs,
    )


def with_name(component: AtomicComponent, name: str) -> AtomicComponent:
    return AtomicComponent(
        name, component.inputs, component.outputs, component.pre, component.rel, component.fundefs
    )


def drop_unit_inputs(component: AtomicComponent) -> AtomicComponent:
    """Removes Unit sorted inputs; they carry no information and never occur in formulas."""
    if all(port.sort is not Sort.UNIT for port in component.inputs):
        return component
    inputs = tuple(port for port in component.inputs if port.sort is not Sort.UNIT)
    return AtomicComponent(
        component.name, inputs, component.outputs, component.pre, component.rel, component.fundefs
    )


def definition_of(component: AtomicComponent, output: str) -> Optional[Term]:
    """
    The functional definition of one output: from fundefs, or from a top level conjunct
    `output = t` of the relation where t mentions inputs only.
    """
    if component.fundefs is not None:
        return component.fundefs.get(output)
    inputs = set(component.input_names)
    sort = next(port.sort for port in component.outputs if port.name == output)
    for part in conjuncts(component.rel):
        if not isinstance(part, Atom) or part.op != "=":
            continue
        for side, other in ((part.lhs, part.rhs), (part.rhs, part.lhs)):
            if (
                isinstance(side, Var)
                and side.name == output
                and other.free_vars <= inputs
                and term_sort(other) is sort
            ):
                return other
    return None


def reduce_formula(formula: Formula, atom_limit: int = DEFAULT_ATOM_LIMIT) -> Formula:
    """eliminate_quantifiers, keeping the simplified quantified form on ResourceLimit."""
    try:
        return eliminate_quantifiers(formula, atom_limit)
    except ResourceLimit as error:
        logging.warning(f"Keeping quantified form: {error}")
        return simplify(formula)


# Composition operators


def _check_connection(c1: AtomicComponent, c2: AtomicComponent):
    if len(c1.outputs) != len(c2.inputs):
        raise ArityMismatch(
            f"Cannot compose {c1.name} ({len(c1.outputs)} outputs) with "
            f"{c2.name} ({len(c2.inputs)} inputs)"
        )
    for out_port, in_port in zip(c1.outputs, c2.inputs):
        if out_port.sort is not in_port.sort:
            raise SortMismatch(
                f"Output {out_port.name}:{out_port.sort} of {c1.name} feeds input "
                f"{in_port.name}:{in_port.sort} of {c2.name}"
            )


def serial(
    c1: AtomicComponent, c2: AtomicComponent, atom_limit: int = DEFAULT_ATOM_LIMIT
) -> AtomicComponent:
    """
    c1 o c2.  The result keeps c1's inputs and c2's outputs (renamed away from c1's inputs);
    the connecting variables take c1's output names.

    Raises:
        ArityMismatch: c1's outputs and c2's inputs differ in number
        SortMismatch: a connected pair of ports differs in sort
    """
    _check_connection(c1, c2)
    name = f"{c1.name} o {c2.name}"
    if c1.is_bottom:
        return bottom(c1.inputs, c2.outputs, name)
    used = set(c1.input_names)
    output_names = []
    for port in c2.outputs:
        new = fresh_var(port.name, used | (set(c2.output_names) - {port.name}))
        used.add(new)
        output_names.append(new)
    mids = []
    for port in c1.outputs:
        new = fresh_var(port.name, used)
        used.add(new)
        mids.append(new)
    first = rename_component(c1, dict(zip(c1.output_names, mids)))
    mapping = dict(zip(c2.input_names, mids))
    mapping.update(zip(c2.output_names, output_names))
    second = rename_component(c2, mapping)
    outputs = second.outputs
    mid_ports = [(port.name, port.sort) for port in first.outputs]

    if first.fundefs is not None:
        binding = dict(first.fundefs)
        pre = simplify(conj(first.pre, substitute(second.pre, binding)))
        if pre == FALSE:
            return bottom(first.inputs, outputs, name)
        if second.fundefs is not None:
            definitions = [
                ((o, port.sort), substitute_term(t, binding))
                for port, (o, t) in zip(outputs, second.fundefs.items())
            ]
            return mk_functional(first.inputs, definitions, pre, name)
        rel = simplify(substitute(second.rel, binding))
        return mk_assert_update(first.inputs, outputs, pre, reduce_formula(rel, atom_limit), name)

    pre = conj(first.pre, forall_all(mid_ports, Implies(first.rel, second.pre)))
    rel = exists_all(mid_ports, conj(first.rel, second.rel))
    pre = reduce_formula(pre, atom_limit)
    if pre == FALSE:
        return bottom(first.inputs, outputs, name)
    rel = reduce_formula(rel, atom_limit)
    return mk_assert_update(first.inputs, outputs, pre, rel, name)


def parallel(c1: AtomicComponent, c2: AtomicComponent) -> AtomicComponent:
    """c1 ** c2.  Ports of c2 clashing with ports of c1 are renamed with fresh_var."""
    used = set(c1.port_names) | set(c2.port_names)
    taken = set(c1.port_names)
    mapping = {}
    for port in c2.inputs + c2.outputs:
        if port.name in taken:
            new = fresh_var(port.name, used)
            used.add(new)
            mapping[port.name] = new
    second = rename_component(c2, mapping)
    name = f"{c1.name} ** {c2.name}"
    inputs = c1.inputs + second.inputs
    outputs = c1.outputs + second.outputs
    pre = simplify(conj(c1.pre, second.pre))
    if pre == FALSE:
        return bottom(inputs, outputs, name)
    if c1.fundefs is not None and second.fundefs is not None:
        terms = list(c1.fundefs.values()) + list(second.fundefs.values())
        definitions = [((port.name, port.sort), term) for port, term in zip(outputs, terms)]
        return mk_functional(inputs, definitions, pre, name)
    return mk_assert_update(inputs, outputs, pre, simplify(conj(c1.rel, second.rel)), name)


def feedback(
    component: AtomicComponent, atom_limit: int = DEFAULT_ATOM_LIMIT
) -> AtomicComponent:
    """
    Connects the first output to the first input.  When the first output has a functional
    definition t that does not mention the first input, the loop value is t.  Otherwise the
    conjuncts constraining the first output must mention neither the first input nor another
    output; the loop value is then chosen among the values they allow.

    Raises:
        ArityMismatch: no input or no output to connect
        SortMismatch: first input and first output differ in sort
        NonFunctionalFeedback: the first output is constrained together with the first input
            or with other outputs
        AlgebraicLoop: the definition of the first output mentions the first input
    """
    if not component.inputs or not component.outputs:
        raise ArityMismatch(f"Feedback of {component.name} needs at least one input and output")
    first_in, first_out = component.inputs[0], component.outputs[0]
    if first_in.sort is not first_out.sort:
        raise SortMismatch(
            f"Feedback of {component.name} connects {first_out.name}:{first_out.sort} "
            f"to {first_in.name}:{first_in.sort}"
        )
    term = definition_of(component, first_out.name)
    if term is None:
        return _relational_feedback(component, atom_limit)
    if first_in.name in term.free_vars:
        raise AlgebraicLoop(
            f"Output {first_out.name} of {component.name} depends instantaneously on "
            f"input {first_in.name}"
        )
    name = f"feedback({component.name})"
    binding = {first_in.name: term}
    inputs = component.inputs[1:]
    outputs = component.outputs[1:]
    pre = simplify(substitute(component.pre, binding))
    if component.fundefs is not None:
        definitions = [
            ((port.name, port.sort), substitute_term(component.fundefs[port.name], binding))
            for port in outputs
        ]
        return mk_functional(inputs, definitions, pre, name)
    binding[first_out.name] = term
    rel = simplify(substitute(component.rel, binding))
    return mk_assert_update(inputs, outputs, pre, rel, name)


def _aliases(component: AtomicComponent) -> Dict[str, Formula]:
    """Conjuncts `first output = other output`, keyed by the other output's name."""
    first_out = component.output_names[0]
    others = set(component.output_names[1:])
    found: Dict[str, Formula] = {}
    for part in conjuncts(component.rel):
        if not (isinstance(part, Atom) and part.op == "="):
            continue
        names = {side.name for side in (part.lhs, part.rhs) if isinstance(side, Var)}
        if len(names) == 2 and first_out in names and (names - {first_out}) <= others:
            found.setdefault((names - {first_out}).pop(), part)
    return found


def _relational_feedback(component: AtomicComponent, atom_limit: int) -> AtomicComponent:
    first_in, first_out = component.inputs[0], component.outputs[0]
    other_outputs = set(component.output_names[1:])
    # Copies of the first output (fan-out through Splits) are read through the first output.
    aliases = _aliases(component)
    copies = {name: Var(first_out.name, first_out.sort) for name in aliases}
    parts = [
        substitute(part, copies)
        for part in conjuncts(component.rel)
        if part not in aliases.values()
    ]
    defining = [part for part in parts if first_out.name in part.free_vars]
    rest = [part for part in parts if first_out.name not in part.free_vars]
    rest += aliases.values()
    for part in defining:
        if first_in.name in part.free_vars or part.free_vars & other_outputs:
            raise NonFunctionalFeedback(
                f"Output {first_out.name} of {component.name} has no functional definition "
                f"and is constrained together with {first_in.name} or other outputs"
            )
    loop = fresh_var(first_in.name, set(component.port_names))
    loop_var = Var(loop, first_in.sort)
    choice = substitute(conj(*defining), {first_out.name: loop_var})
    binding = {first_in.name: loop_var, first_out.name: loop_var}
    loop_port = [(loop, first_in.sort)]
    pre = forall_all(loop_port, Implies(choice, substitute(component.pre, binding)))
    rel = exists_all(loop_port, conj(choice, substitute(conj(*rest), binding)))
    return mk_assert_update(
        component.inputs[1:],
        component.outputs[1:],
        reduce_formula(pre, atom_limit),
        reduce_formula(rel, atom_limit),
        f"feedback({component.name})",
    )


# Composition expressions


class CompExpr:
    def __str__(self):
        return render_expression(self)


@dataclass(frozen=True)
class Atomic(CompExpr):
    component: AtomicComponent


@dataclass(frozen=True)
class Serial(CompExpr):
    left: CompExpr
    right: CompExpr


@dataclass(frozen=True)
class Parallel(CompExpr):
    left: CompExpr
    right: CompExpr


@dataclass(frozen=True)
class Feedback(CompExpr):
    operand: CompExpr


def serial_all(*expressions: CompExpr) -> CompExpr:
    result = expressions[0]
    for expression in expressions[1:]:
        result = Serial(result, expression)
    return result


def parallel_all(*expressions: CompExpr) -> CompExpr:
    result = expressions[0]
    for expression in expressions[1:]:
        result = Parallel(result, expression)
    return result


def count_feedbacks(expression: CompExpr) -> int:
    if isinstance(expression, Feedback):
        return 1 + count_feedbacks(expression.operand)
    if isinstance(expression, (Serial, Parallel)):
        return count_feedbacks(expression.left) + count_feedbacks(expression.right)
    return 0


def atomic_components(expression: CompExpr) -> List[AtomicComponent]:
    """Atomic leaves in left to right order, each name once."""
    found: Dict[str, AtomicComponent] = {}

    def visit(node: CompExpr):
        if isinstance(node, Atomic):
            found.setdefault(node.component.name, node.component)
        elif isinstance(node, Feedback):
            visit(node.operand)
        elif isinstance(node, (Serial, Parallel)):
            visit(node.left)
            visit(node.right)

    visit(expression)
    return list(found.values())


def _chain(expression: CompExpr, kind: type) -> List[CompExpr]:
    if isinstance(expression, kind):
        return _chain(expression.left, kind) + _chain(expression.right, kind)  # type: ignore
    return [expression]


def render_expression(expression: CompExpr) -> str:
    """Composition expression over atomic component names, e.g. feedback((R1 o (A ** B)))."""
    if isinstance(expression, Atomic):
        return expression.component.name
    if isinstance(expression, Feedback):
        return f"feedback({render_expression(expression.operand)})"
    if isinstance(expression, Serial):
        return "(" + " o ".join(render_expression(e) for e in _chain(expression, Serial)) + ")"
    if isinstance(expression, Parallel):
        parts = _chain(expression, Parallel)
        return "(" + " ** ".join(render_expression(e) for e in parts) + ")"
    raise TypeError(f"Not a composition expression: {expression!r}")


def _fold(expression: CompExpr, atom_limit: int) -> AtomicComponent:
    if isinstance(expression, Atomic):
        return expression.component
    if isinstance(expression, Serial):
        left, right = _fold(expression.left, atom_limit), _fold(expression.right, atom_limit)
        return serial(left, right, atom_limit)
    if isinstance(expression, Parallel):
        return parallel(_fold(expression.left, atom_limit), _fold(expression.right, atom_limit))
    if isinstance(expression, Feedback):
        return feedback(_fold(expression.operand, atom_limit), atom_limit)
    raise TypeError(f"Not a composition expression: {expression!r}")


def normalize(
    expression: Union[CompExpr, AtomicComponent],
    detect_bottom: bool = True,
    atom_limit: int = DEFAULT_ATOM_LIMIT,
    name: str = "Model",
) -> AtomicComponent:
    """
    Folds a composition expression into one atomic component, then eliminates quantifiers,
    simplifies and, if detect_bottom, replaces a component whose precondition is unsatisfiable
    by bottom.  An undecided precondition is kept and logged.
    """
    if isinstance(expression, AtomicComponent):
        expression = Atomic(expression)
    component = _fold(expression, atom_limit)
    pre = reduce_formula(component.pre, atom_limit)
    if pre == FALSE:
        return bottom(component.inputs, component.outputs, name)
    if detect_bottom:
        answer = decide_linear(pre, Mode.SATISFIABILITY, atom_limit)
        if answer is TriBool.NO:
            return bottom(component.inputs, component.outputs, name)
        if answer is TriBool.UNKNOWN:
            logging.warning(f"Could not decide whether precondition {render(pre)} is consistent")
    if component.fundefs is not None:
        definitions = [
            ((p.name, p.sort), simplify_term(component.fundefs[p.name])) for p in component.outputs
        ]
        return mk_functional(component.inputs, definitions, pre, name)
    rel = reduce_formula(component.rel, atom_limit)
    return mk_assert_update(component.inputs, component.outputs, pre, rel, name)


# Rendering


def _render_names(names: Sequence[str]) -> str:
    if len(names) == 1:
        return names[0]
    return "(" + ", ".join(names) + ")"


def render_component(component: AtomicComponent) -> str:
    """
    [- ins ~> terms -] for functional components, {. pre .} o [: ins ~> outs . rel :] in
    general, bot for bottom.
    """
    if component.is_bottom:
        return "bot"
    inputs = _render_names(component.input_names)
    assertion = "" if component.pre == TRUE else f"{{. {render(component.pre)} .}} o "
    if component.fundefs is not None:
        terms = _render_names([render_compact(t) for t in component.fundefs.values()])
        return f"{assertion}[- {inputs} ~> {terms} -]"
    outputs = _render_names(component.output_names)
    return f"{assertion}[: {inputs} ~> {outputs} . {render(component.rel)} :]"


# Semantic comparison


@dataclass
class Judgement:
    answer: TriBool
    witness: Optional[Dict[str, Any]] = None

    def get_judgement_dict(self) -> dict:
        return {"answer": str(self.answer), "witness": format_environment(self.witness)}


def format_environment(env: Optional[Mapping[str, Any]]) -> Optional[Dict[str, Any]]:
    """JSON friendly witness: rationals as "p/q" strings, floats as numbers."""
    if env is None:
        return None
    result: Dict[str, Any] = {}
    for name in sorted(env):
        value = env[name]
        if isinstance(value, Fraction):
            result[name] = str(value.numerator) if value.denominator == 1 else str(value)
        else:
            result[name] = value
    return result


def align(reference: AtomicComponent, other: AtomicComponent) -> AtomicComponent:
    """
    Renames other's ports positionally to reference's port names.

    Raises:
        SignatureMismatch: arities or port sorts differ
    """
    if len(reference.inputs) != len(other.inputs) or len(reference.outputs) != len(
        other.outputs
    ):
        raise SignatureMismatch(
            f"{reference.name} has signature {len(reference.inputs)} -> "
            f"{len(reference.outputs)}, {other.name} has {len(other.inputs)} -> "
            f"{len(other.outputs)}"
        )
    for mine, theirs in zip(reference.inputs + reference.outputs, other.inputs + other.outputs):
        if mine.sort is not theirs.sort:
            raise SignatureMismatch(
                f"Port {mine.name}:{mine.sort} of {reference.name} corresponds to "
                f"{theirs.name}:{theirs.sort} of {other.name}"
            )
    used = set(reference.port_names) | set(other.port_names)
    temporary = {}
    for port in other.inputs + other.outputs:
        temporary[port.name] = fresh_var(f"{port.name}_tmp", used)
        used.add(temporary[port.name])
    staged = rename_component(other, temporary)
    final = {
        temporary[theirs.name]: mine.name
        for mine, theirs in zip(reference.inputs + reference.outputs, other.inputs + other.outputs)
    }
    return rename_component(staged, final)


def _numeric_candidates(bound: int) -> List[Fraction]:
    return [Fraction(0), Fraction(1), Fraction(-1), Fraction(bound), Fraction(-bound)]


def search_witness(
    is_counterexample: Callable[[Dict[str, Any]], bool],
    inputs: Sequence[Port],
    outputs: Sequence[Port],
    proposers: Sequence[AtomicComponent],
    settings: AnalysisSettings,
) -> Optional[Dict[str, Any]]:
    """
    Random search for an environment over inputs and outputs satisfying is_counterexample.
    Boundary points come first, then settings.samples random rationals in
    [-sample_bound, sample_bound].  Output values are proposed alternately by the functional
    definitions of the proposers and at random.
    """
    rng = np.random.default_rng(settings.seed)
    bound = settings.sample_bound
    boundary = _numeric_candidates(bound)

    def draw() -> Fraction:
        numerator = int(rng.integers(-bound * 8, bound * 8 + 1))
        return Fraction(numerator, 8) if rng.random() < 0.5 else Fraction(numerator // 8)

    def value_for(port: Port, slot: Optional[int]):
        if port.sort is Sort.UNIT:
            return None
        if port.sort is Sort.BOOL:
            return bool(rng.integers(0, 2)) if slot is None else bool(slot % 2)
        return draw() if slot is None else boundary[slot % len(boundary)]

    proposals = [c for c in proposers if c.fundefs is not None]
    for index in range(len(boundary) + settings.samples):
        slot = index if index < len(boundary) else None
        env: Dict[str, Any] = {port.name: value_for(port, slot) for port in inputs}
        strategy = index % (len(proposals) + 1)
        if strategy < len(proposals) and outputs:
            definitions = proposals[strategy].fundefs or {}
            values = [evaluate(term, env) for term in definitions.values()]
            if any(value is UNDEFINED for value in values):
                continue
            env.update(zip((port.name for port in outputs), values))
        else:
            for position, port in enumerate(outputs):
                env[port.name] = value_for(port, None if slot is None else slot + position + 1)
        if is_counterexample(env):
            return env
    return None


def disagreement(c1: AtomicComponent, c2: AtomicComponent) -> Callable[[Dict[str, Any]], bool]:
    """Predicate: the two components (same port names) behave differently at env."""

    def check(env: Dict[str, Any]) -> bool:
        pre1, poisoned1 = evaluate_flagged(c1.pre, env)
        pre2, poisoned2 = evaluate_flagged(c2.pre, env)
        if pre1 != pre2:
            return True
        if not pre1:
            return False
        rel1, poisoned1 = evaluate_flagged(c1.rel, env)
        rel2, poisoned2 = evaluate_flagged(c2.rel, env)
        if poisoned1 or poisoned2:
            return False
        return rel1 != rel2

    return check


def _evaluable(*components: AtomicComponent) -> bool:
    return not any(c.pre.has_quantifier or c.rel.has_quantifier for c in components)


def semantically_equal(
    c1: AtomicComponent, c2: AtomicComponent, settings: Optional[AnalysisSettings] = None
) -> Judgement:
    """
    Yes when pre1 <=> pre2 and pre1 --> (rel1 <=> rel2) are valid, No with a verified witness
    environment, Unknown otherwise.

    Raises:
        SignatureMismatch: signatures differ in arity or sorts
    """
    settings = settings or AnalysisSettings()
    c2 = align(c1, c2)
    same = conj(
        Implies(c1.pre, c2.pre),
        Implies(c2.pre, c1.pre),
        Implies(c1.pre, conj(Implies(c1.rel, c2.rel), Implies(c2.rel, c1.rel))),
    )
    answer = decide_linear(same, Mode.VALIDITY, settings.atom_limit)
    if answer is TriBool.YES:
        return Judgement(TriBool.YES)
    first = c1
    second = c2
    if not _evaluable(first, second):
        first = _reduced(first, settings)
        second = _reduced(second, settings)
    if not _evaluable(first, second):
        logging.info("Skipping witness search on quantified components")
        return Judgement(TriBool.UNKNOWN)
    check = disagreement(first, second)
    try:
        model = find_model(reduce_formula(simplify(Not(same)), settings.atom_limit))
    except ResourceLimit:
        model = None
    if model is not None and check(complete_environment(model, first)):
        return Judgement(TriBool.NO, complete_environment(model, first))
    witness = search_witness(check, first.inputs, first.outputs, [first, second], settings)
    if witness is not None:
        return Judgement(TriBool.NO, witness)
    if answer is TriBool.NO:
        logging.warning("Components differ but no witness was found")
    return Judgement(TriBool.UNKNOWN)


def _reduced(component: AtomicComponent, settings: AnalysisSettings) -> AtomicComponent:
    return AtomicComponent(
        component.name,
        component.inputs,
        component.outputs,
        reduce_formula(component.pre, settings.atom_limit),
        reduce_formula(component.rel, settings.atom_limit),
        component.fundefs,
    )


def complete_environment(model: Dict[str, Any], component: AtomicComponent) -> Dict[str, Any]:
    """Adds defaults for ports the model does not mention."""
    env = dict(model)
    for port in component.inputs + component.outputs:
        if port.name not in env:
            env[port.name] = {Sort.REAL: Fraction(0), Sort.BOOL: False, Sort.UNIT: None}[port.sort]
    return {name: env[name] for name in component.port_names}
