"""
pytest for routers and the FP and IC translation strategies
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcrskit import diagram, translator
from rcrskit.analyzer import VerdictKind, check_compatibility, check_equivalence, report
from rcrskit.component import (
    count_feedbacks,
    normalize,
    render_component,
    render_expression,
)
from rcrskit.errors import DuplicationRequested, UnknownVariable, ValidationError
from rcrskit.settings import AnalysisSettings
from rcrskit.symbolic import evaluate
from tests.conftest import (
    chain_document,
    hierarchical_large_document,
    large_document,
    load_sample,
    series_document,
)

SUMMATION_IC = "feedback((R o (add ** Id) o delay o (split ** Id_1) o R_1))"
SUMMATION_FP = "feedback(feedback(feedback((R o (add ** delay ** split) o R_1))))"


def outputs_at(component, env):
    return {name: evaluate(term, env) for name, term in component.fundefs.items()}


def test_router_permutes_and_drops():
    router = translator.make_router(["a", "b", "c"], ["c", "a"])
    assert render_component(router) == "[- (a, b, c) ~> (c, a) -]"
    assert router.output_names == ["c_1", "a_1"]


def test_router_renames_inputs_clashing_with_outputs():
    router = translator.make_router(["a", "b"], ["b", "a"], ["a", "b"])
    assert router.output_names == ["a", "b"]
    assert render_component(router) == "[- (a_1, b_1) ~> (b_1, a_1) -]"


def test_router_errors():
    with pytest.raises(UnknownVariable, match="'z'"):
        translator.make_router(["a"], ["z"])
    with pytest.raises(DuplicationRequested, match="Split"):
        translator.make_router(["a"], ["a", "a"])


def test_back_edges(summation):
    assert [str(wire) for wire in translator.back_edges(summation)] == ["split.0 -> add.0"]
    assert translator.back_edges(load_sample("fan_out.json")) == []


def test_summation_ic(summation):
    expression = translator.translate_ic(summation)
    assert render_expression(expression) == SUMMATION_IC
    assert count_feedbacks(expression) == 1


def test_summation_fp(summation):
    expression = translator.translate_fp(summation)
    assert render_expression(expression) == SUMMATION_FP
    assert count_feedbacks(expression) == 3


def test_dump(summation):
    lines = translator.dump(translator.translate_ic(summation), translator.Strategy.IC)
    lines = lines.splitlines()
    assert "add = [- (x_add, y_add) ~> x_add+y_add -]" in lines
    assert lines[-1] == f"IC_Model = {SUMMATION_IC}"
    assert lines[0].startswith("R = ")


def test_summation_normal_form(summation):
    normal = normalize(translator.translate_ic(summation), name="IC_Model")
    assert normal.input_names == ["g", "si_1"]
    assert normal.output_names == ["h", "so_1"]
    assert render_component(normal) == "[- (g, si_1) ~> (si_1, si_1+g) -]"


def test_strategies_agree_on_summation(summation):
    ic = normalize(translator.translate_ic(summation))
    fp = normalize(translator.translate_fp(summation))
    assert check_equivalence(ic, fp).kind is VerdictKind.EQUIVALENT


def test_state_threading(summation, nested):
    assert translator.state_count(summation) == 1
    assert translator.state_names(summation) == [("si_1", "so_1")]
    assert translator.initial_state(summation) == {"si_1": Fraction(0)}
    assert translator.initial_state(nested) == {"si_1": Fraction(1)}


@pytest.mark.parametrize("flat", [False, True])
@pytest.mark.parametrize("strategy", list(translator.Strategy))
def test_nested_translation(nested, strategy, flat):
    normal = normalize(translator.translate(nested, strategy, flat))
    assert normal.input_names == ["a", "si_1"]
    assert normal.output_names == ["b", "so_1"]
    assert outputs_at(normal, {"a": 1, "si_1": 5}) == {"b": 15, "so_1": 2}


def test_fan_out_translation():
    normal = normalize(translator.translate_ic(load_sample("fan_out.json")))
    assert normal.output_names == ["y1", "y2"]
    assert outputs_at(normal, {"x": Fraction(1, 2)}) == {"y1": 1, "y2": Fraction(3, 2)}


def test_fp_loop_through_fanned_out_saturation(quick_settings):
    model = load_sample("saturated_integrator.json")
    ic = normalize(translator.translate_ic(model))
    fp = normalize(translator.translate_fp(model))
    assert fp.input_names == ["r", "si_1"]
    assert fp.output_names == ["y", "so_1"]
    assert not fp.rel.has_quantifier
    assert evaluate(fp.rel, {"r": 3, "si_1": 2, "y": 1, "so_1": 3})
    assert not evaluate(fp.rel, {"r": 3, "si_1": 2, "y": 2, "so_1": 3})
    assert not evaluate(fp.rel, {"r": 3, "si_1": 2, "y": 1, "so_1": Fraction(5, 2)})
    assert check_equivalence(ic, fp, quick_settings).kind is VerdictKind.EQUIVALENT


def test_unused_outputs_are_dropped():
    document = {
        "name": "partial",
        "inputs": [{"name": "x"}],
        "outputs": [{"name": "y"}],
        "blocks": [{"id": "split", "type": "Split", "params": {"n": 3}}],
        "wires": [{"from": "in.0", "to": "split.0"}, {"from": "split.2", "to": "out.0"}],
    }
    normal = normalize(translator.translate_ic(diagram.from_document(document)))
    assert render_component(normal) == "[- x ~> x -]"


def test_translate_requires_blocks():
    with pytest.raises(ValidationError, match="no blocks"):
        translator.translate_ic(diagram.Diagram("empty", (), ()))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=4), st.booleans())
def test_ic_and_fp_normal_forms_are_equivalent(gains, with_loop):
    model = diagram.from_document(chain_document(gains, with_loop))
    ic = normalize(translator.translate_ic(model))
    fp = normalize(translator.translate_fp(model))
    assert count_feedbacks(translator.translate_ic(model)) == int(with_loop)
    verdict = check_equivalence(ic, fp, AnalysisSettings(samples=50))
    assert verdict.kind is VerdictKind.EQUIVALENT


@pytest.mark.slow
def test_large_diagram():
    model = diagram.from_document(large_document())
    assert diagram.count_blocks(model) == 104
    expression = translator.translate_ic(model)
    assert count_feedbacks(expression) == 8
    assert translator.state_count(model) == 14
    normal = normalize(expression, name="IC_Model")
    assert normal.is_functional
    assert normal.input_names == ["x"] + [f"si_{j}" for j in range(1, 15)]


@pytest.mark.slow
def test_large_hierarchical_diagram():
    model = diagram.from_document(hierarchical_large_document())
    assert diagram.count_blocks(model) == 104
    start = time.perf_counter()
    expression = translator.translate_ic(model)
    verdict = check_compatibility(expression, AnalysisSettings(), diagram.count_blocks(model))
    assert time.perf_counter() - start < 15
    assert verdict.kind is VerdictKind.COMPATIBLE
    assert verdict.normal_form.is_functional
    stats = verdict.stats
    assert (stats["blocks"], stats["feedbacks"], stats["states"]) == (104, 8, 14)
    assert stats["formula_chars"] == len(render_component(verdict.normal_form))
    text = report(verdict)
    assert "states=14" in text
    assert f"formula_chars={stats['formula_chars']}" in text


# Hierarchy versus its flattening


def wrapped_chain(gains, with_loop, depth):
    document = chain_document(gains, with_loop, name="level0")
    for level in range(1, depth + 1):
        gain = {"id": f"pre{level}", "type": "Gain", "params": {"k": level + 1}}
        ports = (f"level{level}_in", f"level{level}_out")
        document = series_document(f"level{level}", ports, [document], [gain])
    return document


hierarchies = st.builds(
    wrapped_chain,
    st.lists(st.integers(-3, 3), min_size=1, max_size=3),
    st.booleans(),
    st.integers(1, 3),
)


@settings(max_examples=25, deadline=None)
@given(hierarchies)
def test_flatten_is_idempotent(document):
    model = diagram.from_document(document)
    flat = diagram.flatten(model)
    assert flat.is_flat
    assert diagram.flatten(flat) is flat
    again = diagram.flatten(diagram.from_document(diagram.to_document(flat)))
    assert diagram.to_document(again) == diagram.to_document(flat)
    assert diagram.count_blocks(flat) == diagram.count_blocks(model)


@settings(max_examples=25, deadline=None)
@given(hierarchies)
def test_hierarchy_and_flattening_are_equivalent(document):
    model = diagram.from_document(document)
    hierarchical = normalize(translator.translate_ic(model))
    flat = normalize(translator.translate_ic(diagram.flatten(model)))
    verdict = check_equivalence(hierarchical, flat, AnalysisSettings(samples=50))
    assert verdict.kind is VerdictKind.EQUIVALENT


# Random diagrams: loops only through UnitDelays, fan-out both implicit and through Splits

ARITIES = {"Gain": (1, 1), "Add": (2, 1), "Sub": (2, 1), "Product": (2, 1), "Split": (1, 2)}


@st.composite
def random_documents(draw):
    delays = draw(st.integers(0, 2))
    operations = draw(st.lists(st.sampled_from(sorted(ARITIES)), min_size=1, max_size=10 - delays))
    blocks = [{"id": f"d{i}", "type": "UnitDelay", "init": [i]} for i in range(delays)]
    signals = ["in.0", "in.1"] + [f"d{i}.0" for i in range(delays)]
    wires = []

    def pick() -> str:
        return signals[draw(st.integers(0, len(signals) - 1))]

    for index, kind in enumerate(operations):
        block_id = f"b{index}"
        block = {"id": block_id, "type": kind}
        if kind == "Gain":
            block["params"] = {"k": draw(st.integers(-2, 2))}
        blocks.append(block)
        inputs, outputs = ARITIES[kind]
        wires += [{"from": pick(), "to": f"{block_id}.{k}"} for k in range(inputs)]
        signals += [f"{block_id}.{k}" for k in range(outputs)]
    wires += [{"from": pick(), "to": f"d{i}.0"} for i in range(delays)]
    outputs = draw(st.integers(1, 2))
    wires += [{"from": pick(), "to": f"out.{m}"} for m in range(outputs)]
    return {
        "name": "random",
        "inputs": [{"name": "x1"}, {"name": "x2"}],
        "outputs": [{"name": f"y{m}"} for m in range(outputs)],
        "blocks": blocks,
        "wires": wires,
    }


@settings(max_examples=50, deadline=None)
@given(random_documents())
def test_random_diagrams_translate_equivalently(document):
    model = diagram.from_document(document)
    ic = normalize(translator.translate_ic(model))
    fp = normalize(translator.translate_fp(model))
    verdict = check_equivalence(ic, fp, AnalysisSettings(samples=50))
    assert verdict.kind is not VerdictKind.NOT_EQUIVALENT
