"""
    Fixed step simulation of deterministic components over input traces.

    Features:

    simulate(): runs the functional definitions of a normalized component step by step, checks
    the precondition before each step and feeds so_j back into si_j
    validate_trace(): re-checks a completed run against the component relation
    interpret_diagram(): an independent interpreter propagating values along the wires of the
    diagram with the hand coded block implementations, used as a differential oracle
    read_trace() / write_result(): CSV input and output through numpy
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import io
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, TextIO, Tuple, Union

import numpy as np

from rcrskit.blocks import NUMERIC_BLOCKS
from rcrskit.component import AtomicComponent
from rcrskit.diagram import EXTERNAL_IN, EXTERNAL_OUT, Diagram, Endpoint, flatten, wired_ports
from rcrskit.errors import (
    AlgebraicLoop,
    NotFunctional,
    PreconditionViolation,
    StateMismatch,
    TraceError,
)
from rcrskit.rk_utils import raise_error
from rcrskit.settings import SimulationSettings
from rcrskit.symbolic import UNDEFINED, Sort, evaluate, evaluate_flagged, render

STATE_PATTERN = re.compile(r"^s[io]_(\d+)$")


class SimStatus(Enum):
    COMPLETED = "Completed"
    PRE_VIOLATED = "PreViolated"

    def __str__(self):
        return self.value


@dataclass
class Trace:
    """Input signals, one float64 array per external input, all of the same length."""

    signals: Dict[str, np.ndarray]

    def __post_init__(self):
        self.signals = {
            name: np.asarray(values, dtype=np.float64).reshape(-1)
            for name, values in self.signals.items()
        }
        lengths = {len(values) for values in self.signals.values()}
        if len(lengths) > 1:
            raise TraceError(f"Trace signals have different lengths {sorted(lengths)}")
        if lengths and lengths.pop() < 1:
            raise TraceError("Trace needs at least one step")
        return

    @property
    def length(self) -> Optional[int]:
        """Number of steps, None for a trace without signals."""
        for values in self.signals.values():
            return len(values)
        return None

    @classmethod
    def constant(cls, values: Mapping[str, float], steps: int) -> "Trace":
        signals = {name: np.full(steps, value, dtype=np.float64) for name, value in values.items()}
        return cls(signals)


@dataclass
class SimResult:
    outputs: Dict[str, np.ndarray]
    states: Dict[str, np.ndarray]
    status: SimStatus = SimStatus.COMPLETED
    violation: Optional[PreconditionViolation] = None
    next_states: Dict[str, str] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        """Completed steps."""
        for values in self.outputs.values():
            return len(values)
        for values in self.states.values():
            return len(values) - 1
        return 0

    @property
    def completed(self) -> bool:
        return self.status is SimStatus.COMPLETED


def state_pairs(component: AtomicComponent) -> List[Tuple[str, str]]:
    """
    (si_j, so_j) pairs in input order.

    Raises:
        StateMismatch: a state input has no matching state output or the other way round
    """
    inputs = [name for name in component.input_names if name.startswith("si_")]
    outputs = [name for name in component.output_names if name.startswith("so_")]
    pairs = []
    for name in inputs:
        match = STATE_PATTERN.match(name)
        partner = f"so_{match.group(1)}" if match else None
        if partner not in outputs:
            raise StateMismatch(f"State input {name} of {component.name} has no output {partner}")
        pairs.append((name, partner))
    unpaired = sorted(set(outputs) - {so for _, so in pairs})
    if unpaired:
        raise StateMismatch(f"State outputs {unpaired} of {component.name} have no inputs")
    return pairs


def _numeric(value: Any, sort: Sort) -> Any:
    if sort is Sort.BOOL:
        return bool(value)
    return float(value)


def _external_inputs(component: AtomicComponent, trace: Trace, steps: int) -> List[str]:
    names = [p.name for p in component.inputs if not p.name.startswith("si_")]
    missing = [name for name in names if name not in trace.signals]
    if missing:
        raise TraceError(f"Trace has no column for inputs {missing}")
    if names and steps > (trace.length or 0):
        raise TraceError(f"Trace has {trace.length} steps, {steps} requested")
    return names


def _step(
    component: AtomicComponent, env: Dict[str, Any], step: int, check_pre: bool, tolerance: float
) -> Dict[str, Any]:
    assert component.fundefs is not None
    sorts = {port.name: port.sort for port in component.outputs}
    if check_pre:
        holds, poisoned = evaluate_flagged(component.pre, env, tolerance)
        if not holds or poisoned:
            message = f"Precondition {render(component.pre)} violated at step {step}"
            raise PreconditionViolation(message, step, env)
    values = {}
    for name, term in component.fundefs.items():
        value = evaluate(term, env, tolerance)
        if value is UNDEFINED:
            raise PreconditionViolation(f"Output {name} undefined at step {step}", step, env)
        values[name] = _numeric(value, sorts[name])
    return values


def simulate(
    component: AtomicComponent,
    trace: Trace,
    init: Optional[Mapping[str, Any]] = None,
    steps: Optional[int] = None,
    settings: Optional[SimulationSettings] = None,
) -> SimResult:
    """
    Runs the component for steps steps (the trace length by default).  A violated precondition
    stops the run and is recorded in the result status; outputs cover the steps before it.

    Raises:
        NotFunctional: the component has no functional definitions
        StateMismatch: si_j and so_j ports do not pair up
        TraceError: the trace misses an input or is too short
    """
    settings = settings or SimulationSettings()
    if component.is_bottom:
        message = f"Component {component.name} is bottom, every input violates its precondition"
        logging.warning(message)
        empty = {p.name: np.zeros(0) for p in component.outputs if not p.name.startswith("so_")}
        return SimResult(empty, {}, SimStatus.PRE_VIOLATED, PreconditionViolation(message, 0))
    if component.fundefs is None:
        raise NotFunctional(f"Component {component.name} is not deterministic, cannot simulate")
    pairs = state_pairs(component)
    steps = steps or settings.steps or trace.length
    if steps is None:
        raise TraceError("Number of steps unknown: empty trace and no steps given")
    inputs = _external_inputs(component, trace, steps)
    sorts = {port.name: port.sort for port in component.inputs + component.outputs}
    init = dict(init or {})
    state = {}
    for si, _ in pairs:
        if si not in init:
            logging.info(f"No initial value for {si}, starting from 0")
        state[si] = _numeric(init.get(si, 0), sorts[si])

    outputs = [p.name for p in component.outputs if not p.name.startswith("so_")]
    out_values: Dict[str, List[Any]] = {name: [] for name in outputs}
    state_values: Dict[str, List[Any]] = {si: [state[si]] for si, _ in pairs}
    check_pre = not component.pre.has_quantifier
    if not check_pre:
        logging.warning(f"Precondition of {component.name} is quantified and left unchecked")
    status, violation = SimStatus.COMPLETED, None
    for step in range(steps):
        env: Dict[str, Any] = {
            name: _numeric(trace.signals[name][step], sorts[name]) for name in inputs
        }
        env.update(state)
        try:
            values = _step(component, env, step, check_pre, settings.tolerance)
        except PreconditionViolation as error:
            logging.warning(str(error))
            status, violation = SimStatus.PRE_VIOLATED, error
            break
        for name in outputs:
            out_values[name].append(values[name])
        for si, so in pairs:
            state[si] = values[so]
            state_values[si].append(values[so])

    return SimResult(
        {name: np.asarray(values, dtype=np.float64) for name, values in out_values.items()},
        {name: np.asarray(values, dtype=np.float64) for name, values in state_values.items()},
        status,
        violation,
        dict(pairs),
    )


def validate_trace(
    component: AtomicComponent,
    result: SimResult,
    trace: Trace,
    init: Optional[Mapping[str, Any]] = None,
    tolerance: float = 1e-9,
) -> bool:
    """
    True iff at every completed step the relation holds for the recorded inputs, states and
    outputs.  init, when given, must agree with the recorded initial states.

    Raises:
        NotFunctional: the component is not deterministic
        TraceError: the result did not complete
    """
    if component.fundefs is None:
        raise NotFunctional(f"Component {component.name} is not deterministic")
    if not result.completed:
        raise TraceError("Only completed simulation results can be validated")
    pairs = state_pairs(component)
    sorts = {port.name: port.sort for port in component.inputs + component.outputs}
    for si, _ in pairs:
        if init is not None and si in init:
            if not math.isclose(float(init[si]), result.states[si][0], abs_tol=tolerance):
                return False
    inputs = [p.name for p in component.inputs if not p.name.startswith("si_")]
    for step in range(result.steps):
        env: Dict[str, Any] = {
            name: _numeric(trace.signals[name][step], sorts[name]) for name in inputs
        }
        for si, so in pairs:
            env[si] = _numeric(result.states[si][step], sorts[si])
            env[so] = _numeric(result.states[si][step + 1], sorts[so])
        for name, values in result.outputs.items():
            env[name] = _numeric(values[step], sorts[name])
        holds, poisoned = evaluate_flagged(component.rel, env, tolerance)
        if not holds or poisoned:
            logging.info(f"Relation of {component.name} fails at step {step}")
            return False
    return True


# Independent interpreter


def _block_outputs(block_type: str, params: Dict[str, Any], args: List[float]) -> List[float]:
    if block_type not in NUMERIC_BLOCKS:
        raise NotFunctional(f"Block type {block_type} has no deterministic implementation")
    try:
        return NUMERIC_BLOCKS[block_type](params, args)
    except (ValueError, ZeroDivisionError) as error:
        raise PreconditionViolation(f"{block_type} cannot run on {args}: {error}", -1) from error


def interpret_diagram(
    diagram: Diagram, trace: Trace, steps: Optional[int] = None
) -> SimResult:
    """
    Executes the flattened diagram directly: stateful blocks emit their state first (library
    blocks with state have no direct feedthrough), then values travel along the wires until
    every block has fired, then states advance.  Initial states come from the diagram.

    Raises:
        NotFunctional: a block has no deterministic numeric implementation
        AlgebraicLoop: some blocks never receive all their inputs
        TraceError: the trace misses an input or is too short
    """
    flat = flatten(diagram)
    steps = steps or trace.length
    if steps is None:
        raise TraceError("Number of steps unknown: empty trace and no steps given")
    missing = [port.name for port in flat.inputs if port.name not in trace.signals]
    if missing:
        raise TraceError(f"Trace has no column for inputs {missing}")
    if flat.inputs and steps > (trace.length or 0):
        raise TraceError(f"Trace has {trace.length} steps, {steps} requested")
    drivers = {wire.target: wire.source for wire in flat.wires}
    state: Dict[str, List[float]] = {
        block.id: [float(value) for value in block.init] for block in flat.stateful_blocks
    }
    state_names = []
    for block in flat.stateful_blocks:
        for _ in block.init:
            state_names.append(f"si_{len(state_names) + 1}")
    out_values: Dict[str, List[float]] = {port.name: [] for port in flat.outputs}
    state_values = {name: [] for name in state_names}
    status, violation = SimStatus.COMPLETED, None

    for step in range(steps):
        current = [value for block in flat.stateful_blocks for value in state[block.id]]
        for name, value in zip(state_names, current):
            state_values[name].append(value)
        signals: Dict[Endpoint, float] = {
            Endpoint(EXTERNAL_IN, k): float(trace.signals[port.name][step])
            for k, port in enumerate(flat.inputs)
        }
        try:
            next_state = _fire_all(flat, drivers, signals, state)
        except PreconditionViolation as error:
            violation = PreconditionViolation(str(error), step, {})
            status = SimStatus.PRE_VIOLATED
            break
        for m, port in enumerate(flat.outputs):
            out_values[port.name].append(signals[drivers[Endpoint(EXTERNAL_OUT, m)]])
        state = next_state
    if status is SimStatus.COMPLETED:
        current = [value for block in flat.stateful_blocks for value in state[block.id]]
        for name, value in zip(state_names, current):
            state_values[name].append(value)
    return SimResult(
        {name: np.asarray(values, dtype=np.float64) for name, values in out_values.items()},
        {name: np.asarray(values, dtype=np.float64) for name, values in state_values.items()},
        status,
        violation,
        {name: "so" + name[2:] for name in state_names},
    )


def _fire_all(
    flat: Diagram,
    drivers: Dict[Endpoint, Endpoint],
    signals: Dict[Endpoint, float],
    state: Dict[str, List[float]],
) -> Dict[str, List[float]]:
    """One step of the worklist propagation; fills signals and returns the next states."""
    next_state: Dict[str, List[float]] = {}
    pending = []
    for block in flat.blocks:
        inputs, outputs = wired_ports(block.spec)
        if block.spec.is_stateful:
            unknown_inputs = [math.nan] * len(inputs) + state[block.id]
            emitted = _block_outputs(block.spec.type_name, block.spec.params, unknown_inputs)
            for k in range(len(outputs)):
                if math.isnan(emitted[k]):
                    raise NotFunctional(f"Stateful block {block.id} has direct feedthrough")
                signals[Endpoint(block.id, k)] = emitted[k]
        pending.append((block, len(inputs), len(outputs)))

    while pending:
        waiting = []
        for block, n_inputs, n_outputs in pending:
            sources = [drivers[Endpoint(block.id, k)] for k in range(n_inputs)]
            if any(source not in signals for source in sources):
                waiting.append((block, n_inputs, n_outputs))
                continue
            args = [signals[source] for source in sources]
            if block.spec.is_stateful:
                args += state[block.id]
            emitted = _block_outputs(block.spec.type_name, block.spec.params, args)
            for k in range(n_outputs):
                signals[Endpoint(block.id, k)] = emitted[k]
            if block.spec.is_stateful:
                next_state[block.id] = list(emitted[n_outputs:])
        if len(waiting) == len(pending):
            stuck = ", ".join(sorted(block.id for block, _, _ in waiting))
            raise AlgebraicLoop(f"Blocks {stuck} wait on each other within one step")
        pending = waiting
    return next_state


# CSV


def read_trace(source: Union[str, Path, TextIO]) -> Trace:
    """
    Reads a CSV trace: header row of input names, one row per step.

    Raises:
        TraceError: unreadable file, malformed header or non numeric values
    """
    try:
        if isinstance(source, (str, Path)):
            text = Path(source).read_text()
        else:
            text = source.read()
    except OSError as error:
        raise_error(f"Cannot read trace {source}", error, TraceError)
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TraceError("Trace has no header row")
    names = [name.strip() for name in lines[0].split(",")]
    try:
        data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
    except ValueError as error:
        raise_error("Trace contains non numeric values", error, TraceError)
    if data.size == 0:
        raise TraceError("Trace has no rows")
    if data.shape[1] != len(names):
        raise TraceError(f"Trace has {len(names)} columns in the header, {data.shape[1]} in rows")
    return Trace({name: data[:, k] for k, name in enumerate(names)})


def result_columns(
    component: AtomicComponent, result: SimResult, trace: Trace
) -> Tuple[List[str], np.ndarray]:
    """Header and matrix: external inputs, si_j then so_j, then external outputs."""
    steps = result.steps
    names: List[str] = []
    columns: List[np.ndarray] = []
    for port in component.inputs:
        if not port.name.startswith("si_"):
            names.append(port.name)
            columns.append(trace.signals[port.name][:steps])
    for si, so in result.next_states.items():
        names.append(si)
        columns.append(result.states[si][:steps])
    for si, so in result.next_states.items():
        names.append(so)
        columns.append(result.states[si][1 : steps + 1])
    for name, values in result.outputs.items():
        names.append(name)
        columns.append(values[:steps])
    matrix = np.column_stack(columns) if columns else np.zeros((steps, 0))
    return names, matrix


def write_result(
    component: AtomicComponent, result: SimResult, trace: Trace, target: Union[str, Path, TextIO]
):
    names, matrix = result_columns(component, result, trace)
    buffer = io.StringIO()
    np.savetxt(buffer, matrix, delimiter=",", fmt="%.12g", header=",".join(names), comments="")
    text = buffer.getvalue()
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)
