"""
    Library of basic blocks as atomic components.

    Features:

    Id/Skip, Constant, Add, Sub, Gain, Product, Split, UnitDelay, Integrator (forward Euler),
    SqrRoot, NonDetSqrt, ReceptiveSqrt, Saturation and a user defined Relation block
    Stateful blocks expose the current state as the trailing input and the next state as the
    trailing output
    Hand coded numeric implementations of the deterministic blocks, used as an independent
    oracle by the diagram interpreter
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

from rcrskit.component import (
    AtomicComponent,
    Port,
    mk_assert_update,
    mk_functional,
    rename_component,
    with_name,
)
from rcrskit.errors import MissingParameter, NotFunctional, UnknownBlockType
from rcrskit.parser import parse_formula
from rcrskit.rk_utils import slugify
from rcrskit.symbolic import (
    TRUE,
    Const,
    Implies,
    Sort,
    Sqrt,
    Var,
    as_fraction,
    conj,
    disj,
    eq,
    fresh_var,
    ge,
    le,
)

STATEFUL_BLOCKS = ("UnitDelay", "Integrator")


@dataclass
class BlockSpec:
    """A block type name with its parameters as they appear in the diagram JSON."""

    type_name: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.type_name not in BLOCK_LIBRARY:
            raise UnknownBlockType(
                f"Unknown block type {self.type_name!r}, supported types are "
                f"{', '.join(sorted(BLOCK_LIBRARY))}"
            )
        return

    @property
    def is_stateful(self) -> bool:
        return self.type_name in STATEFUL_BLOCKS

    @property
    def state_count(self) -> int:
        return 1 if self.is_stateful else 0

    def get_params_dict(self) -> dict:
        return {"type": self.type_name, "params": dict(self.params)}


def rational_param(params: Dict[str, Any], key: str, block: str) -> Fraction:
    if key not in params:
        raise MissingParameter(f"Block {block} needs parameter {key!r}")
    value = params[key]
    try:
        if isinstance(value, float):
            return Fraction(str(value))
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as error:
        message = f"Parameter {key!r} of {block} is not a rational: {error}"
        raise MissingParameter(message) from error


def sort_param(params: Dict[str, Any], block: str) -> Sort:
    value = params.get("sort", "Real")
    try:
        return Sort(str(value).capitalize())
    except ValueError:
        raise MissingParameter(f"Parameter 'sort' of {block} must be Real or Bool") from None


def _names_param(params: Dict[str, Any], key: str, block: str) -> List[Port]:
    """Comma separated names (or a list), each optionally suffixed with :Bool or :Real."""
    if key not in params:
        raise MissingParameter(f"Block {block} needs parameter {key!r}")
    value = params[key]
    items = value.split(",") if isinstance(value, str) else list(value)
    ports = []
    for item in items:
        item = str(item).strip()
        if not item:
            continue
        name, _, sort = item.partition(":")
        ports.append(Port(name.strip(), Sort(sort.strip().capitalize()) if sort else Sort.REAL))
    return ports


# Component templates


def _identity(params: Dict[str, Any]) -> AtomicComponent:
    sort = sort_param(params, "Id")
    return mk_functional([("x", sort)], [(("y", sort), Var("x", sort))], name="Id")


def _constant(params: Dict[str, Any]) -> AtomicComponent:
    value = rational_param(params, "value", "Constant")
    return mk_functional([("u", Sort.UNIT)], [("y", Const(value))], name="Constant")


def _add(params: Dict[str, Any]) -> AtomicComponent:
    return mk_functional(["x", "y"], [("z", Var("x") + Var("y"))], name="Add")


def _sub(params: Dict[str, Any]) -> AtomicComponent:
    return mk_functional(["x", "y"], [("z", Var("x") - Var("y"))], name="Sub")


def _gain(params: Dict[str, Any]) -> AtomicComponent:
    k = rational_param(params, "k", "Gain")
    return mk_functional(["x"], [("y", Var("x") * Const(k))], name="Gain")


def _product(params: Dict[str, Any]) -> AtomicComponent:
    return mk_functional(["x", "y"], [("z", Var("x") * Var("y"))], name="Product")


def _split(params: Dict[str, Any]) -> AtomicComponent:
    sort = sort_param(params, "Split")
    count = int(params.get("n", 2))
    if count < 2:
        raise MissingParameter(f"Split needs n >= 2, got {count}")
    outputs = [((f"y{i}", sort), Var("x", sort)) for i in range(1, count + 1)]
    return mk_functional([("x", sort)], outputs, name="Split")


def _unit_delay(params: Dict[str, Any]) -> AtomicComponent:
    sort = sort_param(params, "UnitDelay")
    return mk_functional(
        [("x", sort), ("s", sort)],
        [(("y", sort), Var("s", sort)), (("s_next", sort), Var("x", sort))],
        name="UnitDelay",
    )


def _integrator(params: Dict[str, Any]) -> AtomicComponent:
    dt = rational_param(params, "dt", "Integrator")
    return mk_functional(
        ["x", "s"],
        [("y", Var("s")), ("s_next", Var("s") + Var("x") * Const(dt))],
        name="Integrator",
    )


def _sqr_root(params: Dict[str, Any]) -> AtomicComponent:
    return mk_functional(["x"], [("y", Sqrt(Var("x")))], pre=ge(Var("x"), 0), name="SqrRoot")


def _non_det_sqrt(params: Dict[str, Any]) -> AtomicComponent:
    return mk_assert_update(["x"], ["y"], ge(Var("x"), 0), ge(Var("y"), 0), name="NonDetSqrt")


def _receptive_sqrt(params: Dict[str, Any]) -> AtomicComponent:
    rel = Implies(ge(Var("x"), 0), eq(Var("y"), Sqrt(Var("x"))))
    return mk_assert_update(["x"], ["y"], TRUE, rel, name="ReceptiveSqrt")


def _saturation(params: Dict[str, Any]) -> AtomicComponent:
    lo = Const(rational_param(params, "lo", "Saturation"))
    hi = Const(rational_param(params, "hi", "Saturation"))
    x, y = Var("x"), Var("y")
    rel = disj(
        conj(eq(y, lo), le(x, lo)),
        conj(eq(y, x), le(lo, x), le(x, hi)),
        conj(eq(y, hi), le(hi, x)),
    )
    return mk_assert_update(["x"], ["y"], TRUE, rel, name="Saturation")


def _relation(params: Dict[str, Any]) -> AtomicComponent:
    inputs = _names_param(params, "inputs", "Relation")
    outputs = _names_param(params, "outputs", "Relation")
    sorts = {port.name: port.sort for port in inputs + outputs}
    pre = parse_formula(str(params.get("pre", "True")), sorts)
    rel = parse_formula(str(params.get("rel", "True")), sorts)
    return mk_assert_update(inputs, outputs, pre, rel, name=str(params.get("label", "Relation")))


BLOCK_LIBRARY: Dict[str, Callable[[Dict[str, Any]], AtomicComponent]] = {
    "Id": _identity,
    "Skip": _identity,
    "Constant": _constant,
    "Add": _add,
    "Sub": _sub,
    "Gain": _gain,
    "Product": _product,
    "Split": _split,
    "UnitDelay": _unit_delay,
    "Integrator": _integrator,
    "SqrRoot": _sqr_root,
    "NonDetSqrt": _non_det_sqrt,
    "ReceptiveSqrt": _receptive_sqrt,
    "Saturation": _saturation,
    "Relation": _relation,
}


def instantiate(
    spec: BlockSpec, tag: Optional[str] = None, avoid: Iterable[str] = ()
) -> AtomicComponent:
    """
    The block's atomic component.  With a tag, ports are named <port>_<tag> and the component
    is named after the tag; every port name is freshened against avoid.

    Raises:
        UnknownBlockType: the type is not in the library
        MissingParameter: a required parameter is absent or malformed
    """
    if spec.type_name not in BLOCK_LIBRARY:
        raise UnknownBlockType(f"Unknown block type {spec.type_name!r}")
    template = BLOCK_LIBRARY[spec.type_name](spec.params)
    used = set(avoid)
    mapping = {}
    for port in template.inputs + template.outputs:
        base = slugify(f"{port.name}_{tag}") if tag else port.name
        mapping[port.name] = fresh_var(base, used)
        used.add(mapping[port.name])
    return with_name(rename_component(template, mapping), slugify(tag) if tag else template.name)


def block_ports(spec: BlockSpec) -> Dict[str, List[Port]]:
    template = BLOCK_LIBRARY[spec.type_name](spec.params)
    return {"inputs": list(template.inputs), "outputs": list(template.outputs)}


# Numeric implementations, independent of the symbolic definitions above


def _numeric_split(params: Dict[str, Any], args: Sequence[float]) -> List[float]:
    return [args[0]] * int(params.get("n", 2))


def _numeric_saturation(params: Dict[str, Any], args: Sequence[float]) -> List[float]:
    lo = float(rational_param(params, "lo", "Saturation"))
    hi = float(rational_param(params, "hi", "Saturation"))
    return [min(max(args[0], lo), hi)]


def _numeric_receptive_sqrt(params: Dict[str, Any], args: Sequence[float]) -> List[float]:
    if args[0] < 0:
        raise NotFunctional("ReceptiveSqrt has no determined output for negative input")
    return [math.sqrt(args[0])]


NUMERIC_BLOCKS: Dict[str, Callable[[Dict[str, Any], Sequence[float]], List[float]]] = {
    "Id": lambda params, args: [args[0]],
    "Skip": lambda params, args: [args[0]],
    "Constant": lambda params, args: [float(rational_param(params, "value", "Constant"))],
    "Add": lambda params, args: [args[0] + args[1]],
    "Sub": lambda params, args: [args[0] - args[1]],
    "Gain": lambda params, args: [args[0] * float(rational_param(params, "k", "Gain"))],
    "Product": lambda params, args: [args[0] * args[1]],
    "Split": _numeric_split,
    "UnitDelay": lambda params, args: [args[1], args[0]],
    "Integrator": lambda params, args: [
        args[1],
        args[1] + args[0] * float(rational_param(params, "dt", "Integrator")),
    ],
    "SqrRoot": lambda params, args: [math.sqrt(args[0])],
    "ReceptiveSqrt": _numeric_receptive_sqrt,
    "Saturation": _numeric_saturation,
}
