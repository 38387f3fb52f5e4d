"""
    Translation of block diagrams into composition expressions.

    Features:

    make_router(): pure wiring components that permute, group and drop signals
    FP strategy: every internal wire becomes a feedback around routers and the parallel
    composition of all blocks
    IC strategy: blocks in topological order, composed incrementally in series with the signals
    still needed later carried alongside; one feedback per back edge
    State threading: stateful blocks read si_j and write so_j, j following the flattened
    declaration order
    Subsystems are translated recursively unless the diagram has been flattened first
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import heapq
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

from rcrskit.blocks import block_ports, instantiate
from rcrskit.component import (
    Atomic,
    AtomicComponent,
    CompExpr,
    Feedback,
    Parallel,
    Port,
    PortLike,
    as_ports,
    atomic_components,
    drop_unit_inputs,
    mk_functional,
    parallel_all,
    render_component,
    render_expression,
    serial_all,
)
from rcrskit.diagram import EXTERNAL_IN, EXTERNAL_OUT, Diagram, Endpoint, Wire, flatten
from rcrskit.errors import DuplicationRequested, UnknownVariable, ValidationError
from rcrskit.symbolic import Sort, Var, fresh_var


class Strategy(Enum):
    IC = "ic"
    FP = "fp"

    def __str__(self):
        return self.value


def make_router(
    in_vars: Iterable[PortLike],
    out_pattern: Sequence[str],
    out_names: Optional[Sequence[str]] = None,
    name: str = "Router",
) -> AtomicComponent:
    """
    [- in_vars ~> out_pattern -].  Outputs are named out_names when given (inputs clashing with
    them are renamed) and fresh names derived from the pattern otherwise.

    Raises:
        UnknownVariable: the pattern names a variable that is not an input
        DuplicationRequested: the pattern repeats a variable; duplication is Split's job
    """
    inputs = list(as_ports(in_vars))
    sorts = {port.name: port.sort for port in inputs}
    for variable in out_pattern:
        if variable not in sorts:
            raise UnknownVariable(f"Router {name} has no input {variable!r}")
    repeated = sorted({v for v in out_pattern if list(out_pattern).count(v) > 1})
    if repeated:
        raise DuplicationRequested(f"Router {name} duplicates {repeated}, use a Split block")
    pattern = list(out_pattern)
    if out_names is None:
        taken = set(sorts)
        out_names = []
        for variable in pattern:
            new = fresh_var(variable, taken)
            taken.add(new)
            out_names.append(new)
    elif set(out_names) & set(sorts):
        taken = set(sorts) | set(out_names)
        mapping = {}
        for port in inputs:
            if port.name in out_names:
                mapping[port.name] = fresh_var(port.name, taken)
                taken.add(mapping[port.name])
        inputs = [Port(mapping.get(p.name, p.name), p.sort) for p in inputs]
        pattern = [mapping.get(v, v) for v in pattern]
    if len(out_names) != len(pattern):
        raise ValueError(f"Router {name} needs one output name per pattern entry")
    definitions = [
        ((new, sorts[old]), Var(variable, sorts[old]))
        for new, old, variable in zip(out_names, out_pattern, pattern)
    ]
    return mk_functional(inputs, definitions, name=name)


# Signals are identified by hashable keys:
#   ("in", k) external input, ("out", m) value delivered to external output m,
#   ("si", j) / ("so", j) state, ("wire", i) forward internal wire,
#   ("loop", i) / ("next", i) the two ends of a wire closed by a feedback,
#   ("unused", node, k) block output wired nowhere.
Key = Tuple[Hashable, ...]


@dataclass
class _Node:
    id: str
    expression: CompExpr
    consumes: List[Key]
    produces: List[Key]


class _Signals:
    """Unique variable names for signal keys."""

    def __init__(self, reserved: Iterable[str]):
        self.taken: Set[str] = set(reserved)
        self.names: Dict[Key, str] = {}
        self.sorts: Dict[Key, Sort] = {}

    def register(self, key: Key, base: str, exact: bool = False) -> str:
        if key not in self.names:
            name = base if exact else fresh_var(base, self.taken)
            self.taken.add(name)
            self.names[key] = name
        return self.names[key]

    def ports(self, keys: Sequence[Key]) -> List[Port]:
        return [Port(self.names[key], self.sorts[key]) for key in keys]

    def name_list(self, keys: Sequence[Key]) -> List[str]:
        return [self.names[key] for key in keys]


class _Translation:
    def __init__(self, diagram: Diagram, strategy: Strategy, prefix: str, names: Set[str]):
        if not diagram.blocks and not diagram.subsystems:
            raise ValidationError(f"Diagram {diagram.name} has no blocks to translate")
        self.diagram = diagram
        self.strategy = strategy
        self.prefix = prefix
        self.component_names = names
        self.wire_index = {wire: index for index, wire in enumerate(diagram.wires)}
        self.closed: Set[int] = set()
        external = [p.name for p in diagram.inputs] + [p.name for p in diagram.outputs]
        self.signals = _Signals(external)
        self.state_total = state_count(diagram)

    # naming

    def component_name(self, base: str) -> str:
        name = fresh_var(f"{self.prefix}{base}", self.component_names)
        self.component_names.add(name)
        return name

    def _register_externals(self):
        signals = self.signals
        for k, port in enumerate(self.diagram.inputs):
            signals.register(("in", k), port.name, exact=True)
            signals.sorts[("in", k)] = port.sort
        for m, port in enumerate(self.diagram.outputs):
            signals.register(("out", m), port.name, exact=True)
            signals.sorts[("out", m)] = port.sort
        for j, sort in enumerate(state_sorts(self.diagram), start=1):
            signals.register(("si", j), f"si_{j}")
            signals.register(("so", j), f"so_{j}")
            signals.sorts[("si", j)] = signals.sorts[("so", j)] = sort

    def wire_key(self, wire: Wire, consumer: bool) -> Key:
        index = self.wire_index[wire]
        if wire.source.node == EXTERNAL_IN:
            return ("in", wire.source.index)
        if wire.target.node == EXTERNAL_OUT:
            return ("out", wire.target.index)
        if index in self.closed:
            return ("loop", index) if consumer else ("next", index)
        return ("wire", index)

    def _register_wires(self):
        counter = 0
        for wire in self.diagram.wires:
            if wire.source.is_external or wire.target.is_external:
                continue
            counter += 1
            index = self.wire_index[wire]
            base = wire.name or f"w_{counter}"
            sort = self.diagram.port(wire.source, as_source=True).sort
            if index in self.closed:
                loop = self.signals.register(("loop", index), base)
                self.signals.register(("next", index), f"{loop}_next")
                self.signals.sorts[("loop", index)] = sort
                self.signals.sorts[("next", index)] = sort
            else:
                self.signals.register(("wire", index), base)
                self.signals.sorts[("wire", index)] = sort

    # nodes

    def nodes(self) -> List[_Node]:
        diagram = self.diagram
        drivers = {wire.target: wire for wire in diagram.wires}
        fed = {wire.source: wire for wire in diagram.wires}
        used = set(self.signals.taken)
        result = []
        next_state = 1
        for node_id in diagram.node_ids:
            inputs, outputs = diagram.node_ports(node_id)
            expression, states = self._node_expression(node_id, used)
            consumes: List[Key] = []
            produces: List[Key] = []
            for k in range(len(inputs)):
                consumes.append(self.wire_key(drivers[Endpoint(node_id, k)], consumer=True))
            for k, port in enumerate(outputs):
                wire = fed.get(Endpoint(node_id, k))
                if wire is None:
                    key: Key = ("unused", node_id, k)
                    self.signals.register(key, f"unused_{node_id}_{k}")
                    self.signals.sorts[key] = port.sort
                    produces.append(key)
                else:
                    produces.append(self.wire_key(wire, consumer=False))
            for j in range(next_state, next_state + states):
                consumes.append(("si", j))
                produces.append(("so", j))
            next_state += states
            result.append(_Node(node_id, expression, consumes, produces))
        return result

    def _node_expression(self, node_id: str, used: Set[str]) -> Tuple[CompExpr, int]:
        for block in self.diagram.blocks:
            if block.id == node_id:
                tag = f"{self.prefix}{block.id}"
                component = drop_unit_inputs(instantiate(block.spec, tag, used))
                used.update(component.port_names)
                self.component_names.add(component.name)
                return Atomic(component), block.spec.state_count
        for sub in self.diagram.subsystems:
            if sub.name == node_id:
                inner = _Translation(
                    sub.diagram, self.strategy, f"{self.prefix}{sub.name}_", self.component_names
                )
                return inner.run(), state_count(sub.diagram)
        raise ValidationError(f"Diagram {self.diagram.name} has no node {node_id!r}")

    # strategies

    def run(self) -> CompExpr:
        if self.strategy is Strategy.FP:
            self.closed = {
                self.wire_index[wire]
                for wire in self.diagram.wires
                if not wire.source.is_external and not wire.target.is_external
            }
        else:
            self.closed = {self.wire_index[wire] for wire in back_edges(self.diagram)}
        self._register_externals()
        self._register_wires()
        nodes = self.nodes()
        loops = [("loop", index) for index in sorted(self.closed)]
        nexts = [("next", index) for index in sorted(self.closed)]
        inputs = loops + [("in", k) for k in range(len(self.diagram.inputs))]
        inputs += [("si", j) for j in range(1, self.state_total + 1)]
        finals = nexts + [("out", m) for m in range(len(self.diagram.outputs))]
        finals += [("so", j) for j in range(1, self.state_total + 1)]
        if self.strategy is Strategy.FP:
            body = self._parallel_body(nodes, inputs, finals)
        else:
            body = self._incremental_body(topological_order(self.diagram, nodes), inputs, finals)
        for _ in loops:
            body = Feedback(body)
        logging.debug(
            f"Translated {self.diagram.name} ({self.strategy}) with {len(loops)} feedbacks"
        )
        return body

    def _router(
        self, bundle: Sequence[Key], pattern: Sequence[Key], finals: bool = False, base: str = "R"
    ) -> CompExpr:
        """Final routers name their outputs after the signals, the others get fresh names."""
        names = self.signals.name_list(pattern)
        router = make_router(
            self.signals.ports(bundle),
            names,
            names if finals else None,
            self.component_name(base),
        )
        return Atomic(router)

    def _parallel_body(
        self, nodes: List[_Node], inputs: List[Key], finals: List[Key]
    ) -> CompExpr:
        consumed = [key for node in nodes for key in node.consumes]
        produced = [key for node in nodes for key in node.produces]
        router_in = self._router(inputs, consumed)
        router_out = self._router(produced, finals, finals=True)
        blocks = parallel_all(*(node.expression for node in nodes))
        return serial_all(router_in, blocks, router_out)

    def _incremental_body(
        self, nodes: List[_Node], inputs: List[Key], finals: List[Key]
    ) -> CompExpr:
        stages: List[CompExpr] = []
        bundle = list(inputs)
        for position, node in enumerate(nodes):
            later = {key for other in nodes[position + 1 :] for key in other.consumes}
            later.update(finals)
            carried = [key for key in bundle if key in later and key not in node.consumes]
            pattern = node.consumes + carried
            if pattern != bundle or not stages:
                stages.append(self._router(bundle, pattern))
            if carried:
                stages.append(Parallel(node.expression, self._router(carried, carried, base="Id")))
            else:
                stages.append(node.expression)
            bundle = node.produces + carried
        stages.append(self._router(bundle, finals, finals=True))
        return serial_all(*stages)


# Graph helpers


def state_count(diagram: Diagram) -> int:
    return sum(block.spec.state_count for block in diagram.blocks) + sum(
        state_count(sub.diagram) for sub in diagram.subsystems
    )


def state_sorts(diagram: Diagram) -> List[Sort]:
    """Sorts of si_1..si_n in flattened declaration order."""
    sorts = []
    for block in diagram.stateful_blocks:
        inputs = block_ports(block.spec)["inputs"]
        sorts.extend(port.sort for port in inputs[-block.spec.state_count :])
    for sub in diagram.subsystems:
        sorts.extend(state_sorts(sub.diagram))
    return sorts


def back_edges(diagram: Diagram) -> List[Wire]:
    """
    Wires closing a cycle under a depth first search started from the nodes fed by external
    inputs, then from the remaining nodes; nodes and edges are visited in lexicographic order
    of block id.
    """
    successors: Dict[str, List[Wire]] = {node: [] for node in diagram.node_ids}
    for wire in diagram.wires:
        if not wire.source.is_external and not wire.target.is_external:
            successors[wire.source.node].append(wire)
    for node in successors:
        successors[node].sort(key=lambda w: (w.target.node, w.target.index, w.source.index))
    roots = sorted({w.target.node for w in diagram.wires if w.source.node == EXTERNAL_IN})
    roots += sorted(node for node in diagram.node_ids if node not in roots)

    visited: Set[str] = set()
    on_stack: Set[str] = set()
    found: List[Wire] = []
    for root in roots:
        if root in visited:
            continue
        stack = [(root, iter(successors[root]))]
        visited.add(root)
        on_stack.add(root)
        while stack:
            node, edges = stack[-1]
            wire = next(edges, None)
            if wire is None:
                stack.pop()
                on_stack.discard(node)
                continue
            child = wire.target.node
            if child in on_stack:
                found.append(wire)
            elif child not in visited:
                visited.add(child)
                on_stack.add(child)
                stack.append((child, iter(successors[child])))
    order = {wire: index for index, wire in enumerate(diagram.wires)}
    return sorted(found, key=lambda wire: order[wire])


def topological_order(diagram: Diagram, nodes: List[_Node]) -> List[_Node]:
    """Kahn's algorithm over the forward wires, ready nodes taken in lexicographic order."""
    closed = set(back_edges(diagram))
    indegree = {node.id: 0 for node in nodes}
    successors: Dict[str, List[str]] = {node.id: [] for node in nodes}
    for wire in diagram.wires:
        if wire.source.is_external or wire.target.is_external or wire in closed:
            continue
        successors[wire.source.node].append(wire.target.node)
        indegree[wire.target.node] += 1
    ready = [node_id for node_id, degree in indegree.items() if degree == 0]
    heapq.heapify(ready)
    ordered = []
    while ready:
        node_id = heapq.heappop(ready)
        ordered.append(node_id)
        for child in successors[node_id]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    if len(ordered) != len(nodes):
        raise ValidationError(f"Forward wires of {diagram.name} are cyclic")
    by_id = {node.id: node for node in nodes}
    return [by_id[node_id] for node_id in ordered]


# Public API


def translate(diagram: Diagram, strategy: Strategy, flat: bool = False) -> CompExpr:
    """
    Composition expression for the diagram.  The result has the external inputs followed by
    si_1..si_n as inputs and the external outputs followed by so_1..so_n as outputs.

    Raises:
        ValidationError: the diagram has no blocks
    """
    if flat:
        diagram = flatten(diagram)
    return _Translation(diagram, strategy, "", set()).run()


def translate_fp(diagram: Diagram, flat: bool = False) -> CompExpr:
    return translate(diagram, Strategy.FP, flat)


def translate_ic(diagram: Diagram, flat: bool = False) -> CompExpr:
    return translate(diagram, Strategy.IC, flat)


def state_names(diagram: Diagram) -> List[Tuple[str, str]]:
    return [(f"si_{j}", f"so_{j}") for j in range(1, state_count(diagram) + 1)]


def initial_state(diagram: Diagram) -> Dict[str, Fraction]:
    """si_j -> initial value of the j-th stateful block in flattened declaration order."""
    values = [value for block in flatten(diagram).blocks for value in block.init]
    return {f"si_{j}": value for j, value in enumerate(values, start=1)}


def dump(expression: CompExpr, strategy: Strategy) -> str:
    """Atomic definitions followed by the composition, e.g. IC_Model = feedback(...)."""
    lines = [
        f"{component.name} = {render_component(component)}"
        for component in atomic_components(expression)
    ]
    lines.append(f"{str(strategy).upper()}_Model = {render_expression(expression)}")
    return "\n".join(lines) + "\n"
