"""
    Static checks on composition expressions and atomic components.

    Features:

    check_compatibility(): normalizes and decides whether the inferred precondition can hold
    check_refinement(): c_abs <= c_conc, i.e. p --> p' and, on p inputs, r' implies r
    check_equivalence(): refinement in both directions
    report(): deterministic text or JSON rendering of a verdict with statistics
    Every failing verdict carries a witness environment that has been re-evaluated
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import json
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from rcrskit.component import (
    AtomicComponent,
    CompExpr,
    align,
    atomic_components,
    bottom,
    complete_environment,
    count_feedbacks,
    format_environment,
    normalize,
    reduce_formula,
    render_component,
    search_witness,
)
from rcrskit.errors import ResourceLimit
from rcrskit.linear import Mode, decide_linear, find_model
from rcrskit.settings import AnalysisSettings
from rcrskit.symbolic import (
    Formula,
    Implies,
    Not,
    TriBool,
    conj,
    evaluate_flagged,
    render,
    simplify,
)


class VerdictKind(Enum):
    COMPATIBLE = "Compatible"
    INCOMPATIBLE = "Incompatible"
    REFINEMENT_HOLDS = "RefinementHolds"
    REFINEMENT_FAILS = "RefinementFails"
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    UNKNOWN = "Unknown"

    def __str__(self):
        return self.value


POSITIVE = (VerdictKind.COMPATIBLE, VerdictKind.REFINEMENT_HOLDS, VerdictKind.EQUIVALENT)
NEGATIVE = (VerdictKind.INCOMPATIBLE, VerdictKind.REFINEMENT_FAILS, VerdictKind.NOT_EQUIVALENT)


@dataclass
class Verdict:
    kind: VerdictKind
    normal_form: AtomicComponent
    witness: Optional[Dict[str, Any]] = None
    pre: str = "True"
    notes: List[str] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=dict)
    residual: Optional[str] = None

    def __post_init__(self):
        if self.kind in (VerdictKind.REFINEMENT_FAILS, VerdictKind.NOT_EQUIVALENT):
            if self.witness is None:
                raise ValueError(f"A {self.kind} verdict needs a witness")
        return

    @property
    def exit_code(self) -> int:
        if self.kind in POSITIVE:
            return 0
        if self.kind in NEGATIVE:
            return 3
        return 4

    def get_verdict_dict(self) -> dict:
        result = {
            "verdict": str(self.kind),
            "witness": format_environment(self.witness),
            "normal_form": render_component(self.normal_form),
            "pre": self.pre,
            "stats": {
                key: self.stats.get(key, 0)
                for key in ("blocks", "feedbacks", "formula_chars", "millis", "states")
            },
            "notes": list(self.notes),
        }
        if self.residual is not None:
            result["residual"] = self.residual
        return result


def _statistics(
    component: AtomicComponent, expression: Optional[CompExpr], blocks: Optional[int], start: float
) -> Dict[str, int]:
    if blocks is None:
        blocks = len(atomic_components(expression)) if expression is not None else 1
    return {
        "blocks": blocks,
        "feedbacks": count_feedbacks(expression) if expression is not None else 0,
        "formula_chars": len(render_component(component)),
        "millis": int((time.perf_counter() - start) * 1000),
        "states": sum(1 for name in component.input_names if name.startswith("si_")),
    }


# Compatibility


def check_compatibility(
    expression: Union[CompExpr, AtomicComponent],
    settings: Optional[AnalysisSettings] = None,
    blocks: Optional[int] = None,
) -> Verdict:
    """
    Normalizes the expression and decides satisfiability of the inferred precondition.  An
    unsatisfiable precondition makes the composition Incompatible and its normal form bottom.
    An undecided precondition is settled by sampling an input that satisfies it, else the
    verdict is Unknown with the residual formula attached.
    """
    settings = settings or AnalysisSettings()
    start = time.perf_counter()
    tree = expression if isinstance(expression, CompExpr) else None
    component = normalize(expression, detect_bottom=False, atom_limit=settings.atom_limit)
    pre = component.pre
    notes: List[str] = []
    answer = decide_linear(pre, Mode.SATISFIABILITY, settings.atom_limit)
    witness = None
    if answer is TriBool.UNKNOWN and not pre.has_quantifier:
        witness = search_witness(lambda env: _holds(pre, env), component.inputs, [], [], settings)
        if witness is not None:
            answer = TriBool.YES
            notes.append("Precondition shown satisfiable by a sampled input")
    if answer is TriBool.NO:
        normal = bottom(component.inputs, component.outputs, component.name)
        kind = VerdictKind.INCOMPATIBLE
    else:
        normal = component
        kind = VerdictKind.COMPATIBLE if answer is TriBool.YES else VerdictKind.UNKNOWN
    residual = None
    if kind is VerdictKind.UNKNOWN:
        residual = render(pre)
        notes.append("Could not decide whether the precondition is satisfiable")
        logging.warning(f"Compatibility undecided, residual precondition {residual}")
    return Verdict(
        kind,
        normal,
        witness,
        render(pre),
        notes,
        _statistics(normal, tree, blocks, start),
        residual,
    )


def _holds(formula: Formula, env: Dict[str, Any]) -> bool:
    value, poisoned = evaluate_flagged(formula, env)
    return value and not poisoned


# Refinement


def refinement_counterexample(
    c_abs: AtomicComponent, c_conc: AtomicComponent
) -> Callable[[Dict[str, Any]], bool]:
    """
    Predicate on environments over the common ports: the abstract precondition holds and either
    the concrete precondition fails, or the concrete relation allows outputs the abstract one
    forbids.  Environments on which a square root is undefined never count.
    """

    def check(env: Dict[str, Any]) -> bool:
        if not _holds(c_abs.pre, env):
            return False
        pre_conc, poisoned = evaluate_flagged(c_conc.pre, env)
        if poisoned:
            return False
        if not pre_conc:
            return True
        rel_conc, poisoned_conc = evaluate_flagged(c_conc.rel, env)
        rel_abs, poisoned_abs = evaluate_flagged(c_abs.rel, env)
        if poisoned_conc or poisoned_abs:
            return False
        return rel_conc and not rel_abs

    return check


def _refinement_formula(c_abs: AtomicComponent, c_conc: AtomicComponent) -> Formula:
    return conj(
        Implies(c_abs.pre, c_conc.pre),
        Implies(conj(c_abs.pre, c_conc.rel), c_abs.rel),
    )


def _evaluable(component: AtomicComponent, settings: AnalysisSettings) -> AtomicComponent:
    if not component.pre.has_quantifier and not component.rel.has_quantifier:
        return component
    return AtomicComponent(
        component.name,
        component.inputs,
        component.outputs,
        reduce_formula(component.pre, settings.atom_limit),
        reduce_formula(component.rel, settings.atom_limit),
        component.fundefs,
    )


def _refinement(
    c_abs: AtomicComponent, c_conc: AtomicComponent, settings: AnalysisSettings
) -> Tuple[TriBool, Optional[Dict[str, Any]]]:
    """(answer, witness) for c_abs <= c_conc, c_conc already aligned to c_abs."""
    formula = _refinement_formula(c_abs, c_conc)
    answer = decide_linear(formula, Mode.VALIDITY, settings.atom_limit)
    if answer is TriBool.YES:
        return TriBool.YES, None
    first, second = _evaluable(c_abs, settings), _evaluable(c_conc, settings)
    if any(c.pre.has_quantifier or c.rel.has_quantifier for c in (first, second)):
        logging.info("Skipping witness search on quantified components")
        return TriBool.UNKNOWN, None
    check = refinement_counterexample(first, second)
    try:
        model = find_model(reduce_formula(simplify(Not(formula)), settings.atom_limit))
    except ResourceLimit:
        model = None
    if model is not None:
        env = complete_environment(model, first)
        if check(env):
            return TriBool.NO, env
    witness = search_witness(check, first.inputs, first.outputs, [second, first], settings)
    if witness is not None:
        return TriBool.NO, witness
    if answer is TriBool.NO:
        logging.warning("Refinement fails but no witness was found")
    return TriBool.UNKNOWN, None


def check_refinement(
    c_abs: AtomicComponent, c_conc: AtomicComponent, settings: Optional[AnalysisSettings] = None
) -> Verdict:
    """
    Decides c_abs <= c_conc: (p --> p') and (forall inputs outputs. p & r' --> r).  With a
    concrete component that asserts nothing (p' = True) only the relational part remains.

    Raises:
        SignatureMismatch: the components differ in arity or port sorts
    """
    settings = settings or AnalysisSettings()
    start = time.perf_counter()
    c_conc = align(c_abs, c_conc)
    answer, witness = _refinement(c_abs, c_conc, settings)
    kind = {
        TriBool.YES: VerdictKind.REFINEMENT_HOLDS,
        TriBool.NO: VerdictKind.REFINEMENT_FAILS,
        TriBool.UNKNOWN: VerdictKind.UNKNOWN,
    }[answer]
    notes = [] if answer is not TriBool.UNKNOWN else ["Refinement could not be decided"]
    return Verdict(
        kind,
        c_conc,
        witness,
        render(c_conc.pre),
        notes,
        _statistics(c_conc, None, 2, start),
    )


def check_equivalence(
    c1: AtomicComponent, c2: AtomicComponent, settings: Optional[AnalysisSettings] = None
) -> Verdict:
    """
    Refinement in both directions.  Equivalent when both hold, NotEquivalent (with the witness
    of the failing direction) when either fails, Unknown otherwise.

    Raises:
        SignatureMismatch: the components differ in arity or port sorts
    """
    settings = settings or AnalysisSettings()
    start = time.perf_counter()
    c2 = align(c1, c2)
    forward, forward_witness = _refinement(c1, c2, settings)
    if forward is TriBool.NO:
        answer, witness = TriBool.NO, forward_witness
    else:
        backward, witness = _refinement(c2, c1, settings)
        if backward is TriBool.NO:
            answer = TriBool.NO
        elif forward is TriBool.YES and backward is TriBool.YES:
            answer = TriBool.YES
        else:
            answer = TriBool.UNKNOWN
    kind = {
        TriBool.YES: VerdictKind.EQUIVALENT,
        TriBool.NO: VerdictKind.NOT_EQUIVALENT,
        TriBool.UNKNOWN: VerdictKind.UNKNOWN,
    }[answer]
    notes = []
    if answer is TriBool.UNKNOWN:
        notes.append(
            f"Equivalence undecided, no disagreement in {settings.samples} samples per direction"
        )
    return Verdict(kind, c1, witness, render(c1.pre), notes, _statistics(c1, None, 2, start))


# Reports


def report(verdict: Verdict, output_format: str = "text") -> str:
    """
    Text for people, JSON for machines.  Both are deterministic apart from stats.millis.
    """
    document = verdict.get_verdict_dict()
    if output_format == "json":
        return json.dumps(document, indent=2) + "\n"
    if output_format != "text":
        raise ValueError(f"Unknown report format {output_format!r}")
    lines = [
        f"verdict: {verdict.kind.name}",
        f"normal form: {document['normal_form']}",
        f"pre: {document['pre']}",
    ]
    if document["witness"] is not None:
        pairs = ", ".join(f"{name} = {value}" for name, value in document["witness"].items())
        lines.append(f"witness: {pairs}")
    if verdict.residual is not None:
        lines.append(f"residual: {verdict.residual}")
    stats = " ".join(f"{key}={value}" for key, value in document["stats"].items())
    lines.append(f"stats: {stats}")
    for note in verdict.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"
