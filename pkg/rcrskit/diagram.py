"""
    Hierarchical block diagrams: data model, JSON loading and rendering, structural validation
    and flattening of subsystems.

    Wire endpoints are written "<node>.<k>" with 0-based port indices, the node being a block
    id, a subsystem name, "in" (external inputs, as a source) or "out" (external outputs, as a
    target).  Stateful blocks expose only their signal ports to wires; state is threaded by
    the translator.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import jsonschema

from rcrskit.blocks import BLOCK_LIBRARY, BlockSpec, block_ports
from rcrskit.component import Port
from rcrskit.errors import SchemaError, ValidationError
from rcrskit.rk_utils import raise_error
from rcrskit.symbolic import Sort, as_fraction, fresh_var, render_rational

EXTERNAL_IN = "in"
EXTERNAL_OUT = "out"
POLYMORPHIC_BLOCKS = ("Id", "Skip", "Split", "UnitDelay")

IDENTIFIER_PATTERN = r"^[A-Za-z_][A-Za-z0-9_]*$"

DIAGRAM_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "rcrskit hierarchical block diagram",
    "type": "object",
    "required": ["name", "inputs", "outputs", "blocks", "wires"],
    "additionalProperties": False,
    "definitions": {
        "port": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string", "pattern": IDENTIFIER_PATTERN},
                "sort": {"enum": ["Real", "Bool"]},
            },
        },
        "rational": {
            "anyOf": [
                {"type": "integer"},
                {"type": "string", "pattern": r"^-?\d+(/\d+)?$"},
                {"type": "number"},
            ]
        },
        "block": {
            "type": "object",
            "required": ["id", "type"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string", "pattern": IDENTIFIER_PATTERN},
                "type": {"type": "string", "enum": sorted(BLOCK_LIBRARY)},
                "params": {"type": "object"},
                "init": {"type": "array", "items": {"$ref": "#/definitions/rational"}},
            },
        },
        "wire": {
            "type": "object",
            "required": ["from", "to"],
            "additionalProperties": False,
            "properties": {
                "from": {"type": "string", "pattern": r"^[A-Za-z_][A-Za-z0-9_]*\.\d+$"},
                "to": {"type": "string", "pattern": r"^[A-Za-z_][A-Za-z0-9_]*\.\d+$"},
                "sort": {"enum": ["Real", "Bool"]},
                "name": {"type": "string", "pattern": IDENTIFIER_PATTERN},
            },
        },
    },
    "properties": {
        "name": {"type": "string"},
        "inputs": {"type": "array", "items": {"$ref": "#/definitions/port"}},
        "outputs": {"type": "array", "items": {"$ref": "#/definitions/port"}},
        "blocks": {"type": "array", "items": {"$ref": "#/definitions/block"}},
        "subsystems": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "diagram"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": IDENTIFIER_PATTERN},
                    "diagram": {"$ref": "#"},
                },
            },
        },
        "wires": {"type": "array", "items": {"$ref": "#/definitions/wire"}},
    },
}


@dataclass(frozen=True)
class Endpoint:
    node: str
    index: int

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        node, _, index = text.rpartition(".")
        if not node or not index.isdigit():
            raise ValidationError(f"Malformed wire endpoint {text!r}")
        return cls(node, int(index))

    @property
    def is_external(self) -> bool:
        return self.node in (EXTERNAL_IN, EXTERNAL_OUT)

    def __str__(self):
        return f"{self.node}.{self.index}"


@dataclass(frozen=True)
class Wire:
    source: Endpoint
    target: Endpoint
    sort: Optional[Sort] = None
    name: Optional[str] = None

    def __str__(self):
        return f"{self.source} -> {self.target}"

    def get_wire_dict(self) -> dict:
        result: Dict[str, Any] = {"from": str(self.source), "to": str(self.target)}
        if self.sort is not None:
            result["sort"] = str(self.sort)
        if self.name is not None:
            result["name"] = self.name
        return result


@dataclass(frozen=True)
class BlockInstance:
    """A block of the diagram.  Stateful blocks carry one initial value per state port."""

    id: str
    spec: BlockSpec
    init: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        init = tuple(as_fraction(value) for value in self.init)
        if self.spec.is_stateful and not init:
            init = (Fraction(0),) * self.spec.state_count
        if len(init) != self.spec.state_count:
            raise ValidationError(
                f"Block {self.id} ({self.spec.type_name}) takes {self.spec.state_count} initial "
                f"values, got {len(init)}"
            )
        object.__setattr__(self, "init", init)
        return

    def get_block_dict(self) -> dict:
        result: Dict[str, Any] = {
            "id": self.id,
            "type": self.spec.type_name,
            "params": dict(self.spec.params),
        }
        if self.spec.is_stateful:
            result["init"] = [_rational_json(value) for value in self.init]
        return result


@dataclass(frozen=True)
class Subsystem:
    name: str
    diagram: "Diagram"


@dataclass(frozen=True)
class Diagram:
    name: str
    inputs: Tuple[Port, ...]
    outputs: Tuple[Port, ...]
    blocks: Tuple[BlockInstance, ...] = ()
    subsystems: Tuple[Subsystem, ...] = ()
    wires: Tuple[Wire, ...] = ()
    _ports: Dict[str, Tuple[List[Port], List[Port]]] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        for attribute in ("inputs", "outputs", "blocks", "subsystems", "wires"):
            object.__setattr__(self, attribute, tuple(getattr(self, attribute)))
        return

    @property
    def is_flat(self) -> bool:
        return not self.subsystems

    @property
    def node_ids(self) -> List[str]:
        return [block.id for block in self.blocks] + [sub.name for sub in self.subsystems]

    @property
    def stateful_blocks(self) -> List[BlockInstance]:
        return [block for block in self.blocks if block.spec.is_stateful]

    def block(self, block_id: str) -> BlockInstance:
        for block in self.blocks:
            if block.id == block_id:
                return block
        raise ValidationError(f"Diagram {self.name} has no block {block_id!r}")

    def node_ports(self, node: str) -> Tuple[List[Port], List[Port]]:
        """Wireable (inputs, outputs) of a node; for "in"/"out" the external ports."""
        if node not in self._ports:
            if node == EXTERNAL_IN:
                ports: Tuple[List[Port], List[Port]] = ([], list(self.inputs))
            elif node == EXTERNAL_OUT:
                ports = (list(self.outputs), [])
            else:
                ports = self._lookup_ports(node)
            self._ports[node] = ports
        return self._ports[node]

    def _lookup_ports(self, node: str) -> Tuple[List[Port], List[Port]]:
        for block in self.blocks:
            if block.id == node:
                return wired_ports(block.spec)
        for sub in self.subsystems:
            if sub.name == node:
                return list(sub.diagram.inputs), list(sub.diagram.outputs)
        raise ValidationError(
            f"Dangling endpoint: diagram {self.name} has no block or subsystem {node!r}"
        )

    def port(self, endpoint: Endpoint, as_source: bool) -> Port:
        inputs, outputs = self.node_ports(endpoint.node)
        ports = outputs if as_source else inputs
        if endpoint.index >= len(ports):
            role = "output" if as_source else "input"
            raise ValidationError(
                f"Dangling endpoint {endpoint} in {self.name}: {endpoint.node} has no {role} "
                f"{endpoint.index}"
            )
        return ports[endpoint.index]

    def driver_of(self, target: Endpoint) -> Wire:
        for wire in self.wires:
            if wire.target == target:
                return wire
        raise ValidationError(f"Input {target} of {self.name} is not driven")

    def get_summary_dict(self) -> dict:
        return {
            "name": self.name,
            "blocks": len(self.blocks),
            "subsystems": len(self.subsystems),
            "wires": len(self.wires),
            "states": sum(block.spec.state_count for block in self.blocks),
        }


def wired_ports(spec: BlockSpec) -> Tuple[List[Port], List[Port]]:
    """Block ports visible to wires: no Unit inputs, no state ports."""
    ports = block_ports(spec)
    inputs, outputs = ports["inputs"], ports["outputs"]
    if spec.is_stateful:
        inputs = inputs[: -spec.state_count]
        outputs = outputs[: -spec.state_count]
    return [port for port in inputs if port.sort is not Sort.UNIT], list(outputs)


def _rational_json(value: Fraction) -> Union[int, str]:
    return value.numerator if value.denominator == 1 else render_rational(value)


# Loading


def check_schema(document: Any):
    """
    Raises:
        SchemaError: the document does not match DIAGRAM_SCHEMA, with the JSON pointer of the
            offending element
    """
    try:
        jsonschema.validate(
            instance=document, schema=DIAGRAM_SCHEMA, cls=jsonschema.Draft7Validator
        )
    except jsonschema.ValidationError as error:
        pointer = "/" + "/".join(str(part) for part in error.absolute_path)
        raise SchemaError(error.message, pointer) from error


def _parse_port(entry: Dict[str, Any]) -> Port:
    return Port(entry["name"], Sort(entry.get("sort", "Real")))


def _parse_block(
    entry: Dict[str, Any], default_sort: Sort, default_dt: Optional[Fraction] = None
) -> BlockInstance:
    params = dict(entry.get("params", {}))
    if entry["type"] == "Integrator" and "dt" not in params and default_dt is not None:
        params["dt"] = _rational_json(default_dt)
    if (
        entry["type"] in POLYMORPHIC_BLOCKS
        and "sort" not in params
        and default_sort is not Sort.REAL
    ):
        params["sort"] = str(default_sort)
    try:
        init = tuple(
            Fraction(str(value)) if isinstance(value, float) else as_fraction(value)
            for value in entry.get("init", [])
        )
    except (ValueError, ZeroDivisionError) as error:
        raise_error(f"Block {entry['id']} has a malformed initial value", error, ValidationError)
    return BlockInstance(entry["id"], BlockSpec(entry["type"], params), init)


def from_document(
    document: Dict[str, Any],
    default_sort: Sort = Sort.REAL,
    default_dt: Optional[Fraction] = None,
) -> Diagram:
    """
    Builds, validates and fan-out normalizes a diagram from an already schema checked dict.
    default_dt is the step size of Integrator blocks that do not set their own dt.
    """
    subsystems = tuple(
        Subsystem(entry["name"], from_document(entry["diagram"], default_sort, default_dt))
        for entry in document.get("subsystems", [])
    )
    wires = tuple(
        Wire(
            Endpoint.parse(entry["from"]),
            Endpoint.parse(entry["to"]),
            Sort(entry["sort"]) if "sort" in entry else None,
            entry.get("name"),
        )
        for entry in document["wires"]
    )
    diagram = Diagram(
        document["name"],
        tuple(_parse_port(entry) for entry in document["inputs"]),
        tuple(_parse_port(entry) for entry in document["outputs"]),
        tuple(_parse_block(entry, default_sort, default_dt) for entry in document["blocks"]),
        subsystems,
        wires,
    )
    return validate(insert_pass_through(insert_splits(diagram)))


def load(
    source: Union[str, Path],
    default_sort: Sort = Sort.REAL,
    default_dt: Optional[Fraction] = None,
) -> Diagram:
    """
    Loads a diagram from a path or from JSON text.  Fan-out wires are rewritten into chains of
    Split blocks and external input to output wires get an Id block.  Integrators without a
    dt parameter take default_dt.

    Raises:
        SchemaError: the document is not JSON or does not match the schema
        ValidationError: the file cannot be read or the diagram is structurally invalid
        UnknownBlockType, MissingParameter: a block cannot be instantiated
    """
    if isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        try:
            text = Path(source).read_text()
        except OSError as error:
            raise_error(f"Cannot read diagram {source}", error, ValidationError)
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise_error("Diagram is not valid JSON", error, SchemaError)
    check_schema(document)
    diagram = from_document(document, default_sort, default_dt)
    logging.debug(f"Loaded diagram {diagram.get_summary_dict()}")
    return diagram


# Structural checks


def validate(diagram: Diagram) -> Diagram:
    """
    Checks ids, endpoints, sorts and that every block input and external output is driven by
    exactly one wire.  Returns the diagram for chaining.

    Raises:
        ValidationError: with the offending block and port identifiers
    """
    ids = diagram.node_ids
    duplicates = sorted(name for name, count in Counter(ids).items() if count > 1)
    if duplicates:
        raise ValidationError(f"Diagram {diagram.name} reuses block ids {duplicates}")
    reserved = {EXTERNAL_IN, EXTERNAL_OUT} & set(ids)
    if reserved:
        raise ValidationError(f"Block ids {sorted(reserved)} are reserved for external ports")
    for ports, kind in ((diagram.inputs, "input"), (diagram.outputs, "output")):
        names = [port.name for port in ports]
        if len(set(names)) != len(names):
            raise ValidationError(f"Diagram {diagram.name} has duplicate {kind} names {names}")
    shared = {port.name for port in diagram.inputs} & {port.name for port in diagram.outputs}
    if shared:
        raise ValidationError(f"Names {sorted(shared)} are both inputs and outputs")

    for wire in diagram.wires:
        if wire.source.node == EXTERNAL_OUT or wire.target.node == EXTERNAL_IN:
            raise ValidationError(f"Wire {wire} runs against the direction of external ports")
        source = diagram.port(wire.source, as_source=True)
        target = diagram.port(wire.target, as_source=False)
        if source.sort is not target.sort:
            raise ValidationError(
                f"Sort mismatch on wire {wire}: {source.sort} output feeds {target.sort} input"
            )
        if wire.sort is not None and wire.sort is not source.sort:
            raise ValidationError(
                f"Sort mismatch on wire {wire}: declared {wire.sort}, ports are {source.sort}"
            )

    driven = Counter(wire.target for wire in diagram.wires)
    twice = sorted(str(target) for target, count in driven.items() if count > 1)
    if twice:
        raise ValidationError(f"Double-driven input {', '.join(twice)} in {diagram.name}")
    for node in diagram.node_ids + [EXTERNAL_OUT]:
        inputs, _ = diagram.node_ports(node)
        for index, port in enumerate(inputs):
            if Endpoint(node, index) not in driven:
                raise ValidationError(
                    f"Input {node}.{index} ({port.name}) of {diagram.name} is not driven"
                )
    return diagram


def insert_splits(diagram: Diagram) -> Diagram:
    """Rewrites every source feeding k > 1 targets into a chain of k - 1 binary Split blocks."""
    groups: Dict[Endpoint, List[Wire]] = {}
    for wire in diagram.wires:
        groups.setdefault(wire.source, []).append(wire)
    if all(len(group) == 1 for group in groups.values()):
        return diagram
    taken = set(diagram.node_ids)
    blocks = list(diagram.blocks)
    wires: List[Wire] = []
    for source, group in groups.items():
        if len(group) == 1:
            wires.extend(group)
            continue
        sort = diagram.port(source, as_source=True).sort
        params: Dict[str, Any] = {"n": 2}
        if sort is not Sort.REAL:
            params["sort"] = str(sort)
        feed = source
        for position, wire in enumerate(group[:-1]):
            split_id = fresh_var(f"split_{source.node}_{source.index}_{position + 1}", taken)
            taken.add(split_id)
            blocks.append(BlockInstance(split_id, BlockSpec("Split", dict(params))))
            wires.append(Wire(feed, Endpoint(split_id, 0)))
            wires.append(Wire(Endpoint(split_id, 0), wire.target, wire.sort, wire.name))
            feed = Endpoint(split_id, 1)
        last = group[-1]
        wires.append(Wire(feed, last.target, last.sort, last.name))
        logging.debug(f"Inserted {len(group) - 1} Split blocks after {source}")
    return Diagram(
        diagram.name, diagram.inputs, diagram.outputs, blocks, diagram.subsystems, wires
    )


def insert_pass_through(diagram: Diagram) -> Diagram:
    """Puts an Id block on every wire from an external input straight to an external output."""
    if not any(
        wire.source.node == EXTERNAL_IN and wire.target.node == EXTERNAL_OUT
        for wire in diagram.wires
    ):
        return diagram
    taken = set(diagram.node_ids)
    blocks = list(diagram.blocks)
    wires: List[Wire] = []
    for wire in diagram.wires:
        if wire.source.node != EXTERNAL_IN or wire.target.node != EXTERNAL_OUT:
            wires.append(wire)
            continue
        sort = diagram.port(wire.source, as_source=True).sort
        block_id = fresh_var(f"id_{wire.source.index}_{wire.target.index}", taken)
        taken.add(block_id)
        params = {} if sort is Sort.REAL else {"sort": str(sort)}
        blocks.append(BlockInstance(block_id, BlockSpec("Id", params)))
        wires.append(Wire(wire.source, Endpoint(block_id, 0), wire.sort, wire.name))
        wires.append(Wire(Endpoint(block_id, 0), wire.target, wire.sort))
    return Diagram(
        diagram.name, diagram.inputs, diagram.outputs, blocks, diagram.subsystems, wires
    )


# Rendering


def to_document(diagram: Diagram) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "name": diagram.name,
        "inputs": [{"name": p.name, "sort": str(p.sort)} for p in diagram.inputs],
        "outputs": [{"name": p.name, "sort": str(p.sort)} for p in diagram.outputs],
        "blocks": [block.get_block_dict() for block in diagram.blocks],
    }
    if diagram.subsystems:
        document["subsystems"] = [
            {"name": sub.name, "diagram": to_document(sub.diagram)} for sub in diagram.subsystems
        ]
    document["wires"] = [wire.get_wire_dict() for wire in diagram.wires]
    return document


def render(diagram: Diagram) -> str:
    """Deterministic JSON text; load(render(d)) == d."""
    return json.dumps(to_document(diagram), indent=2) + "\n"


# Flattening


def _inner_endpoints(
    inner: Diagram, renamed: Dict[str, str]
) -> Tuple[Dict[int, Endpoint], Dict[int, Endpoint]]:
    """Where each subsystem input goes and what drives each subsystem output, after renaming."""
    entries: Dict[int, Endpoint] = {}
    exits: Dict[int, Endpoint] = {}
    for wire in inner.wires:
        if wire.source.node == EXTERNAL_IN:
            entries[wire.source.index] = Endpoint(renamed[wire.target.node], wire.target.index)
        if wire.target.node == EXTERNAL_OUT:
            exits[wire.target.index] = Endpoint(renamed[wire.source.node], wire.source.index)
    return entries, exits


def flatten(diagram: Diagram) -> Diagram:
    """
    Dissolves subsystems recursively.  Inner blocks are renamed <subsystem>_<id> and appended
    after the blocks of the enclosing level; wires crossing a subsystem boundary are joined.
    A flat diagram is returned unchanged.
    """
    if diagram.is_flat:
        return diagram
    taken = set(diagram.node_ids)
    blocks = list(diagram.blocks)
    wires = list(diagram.wires)
    for sub in diagram.subsystems:
        inner = flatten(sub.diagram)
        renamed: Dict[str, str] = {}
        for block in inner.blocks:
            new_id = fresh_var(f"{sub.name}_{block.id}", taken)
            taken.add(new_id)
            renamed[block.id] = new_id
            blocks.append(BlockInstance(new_id, block.spec, block.init))
        entries, exits = _inner_endpoints(inner, renamed)
        joined: List[Wire] = []
        for wire in wires:
            source, target = wire.source, wire.target
            if source.node == sub.name:
                source = exits[source.index]
            if target.node == sub.name:
                if target.index not in entries:
                    logging.debug(f"Input {target} of subsystem {sub.name} is unused")
                    continue
                target = entries[target.index]
            joined.append(Wire(source, target, wire.sort, wire.name))
        for wire in inner.wires:
            if wire.source.is_external or wire.target.is_external:
                continue
            joined.append(
                Wire(
                    Endpoint(renamed[wire.source.node], wire.source.index),
                    Endpoint(renamed[wire.target.node], wire.target.index),
                    wire.sort,
                    wire.name,
                )
            )
        wires = joined
    flat = Diagram(diagram.name, diagram.inputs, diagram.outputs, blocks, (), wires)
    return validate(insert_pass_through(flat))


def count_blocks(diagram: Diagram) -> int:
    """Blocks at every level of the hierarchy."""
    return len(diagram.blocks) + sum(count_blocks(sub.diagram) for sub in diagram.subsystems)
