"""
pytest for atomic components, composition operators and normalization
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcrskit.blocks import BlockSpec, instantiate
from rcrskit.component import (
    Atomic,
    Feedback,
    Parallel,
    Port,
    Serial,
    align,
    atomic_components,
    bottom,
    count_feedbacks,
    feedback,
    format_environment,
    mk_assert_update,
    mk_functional,
    normalize,
    parallel,
    render_component,
    render_expression,
    search_witness,
    semantically_equal,
    serial,
    with_name,
)
from rcrskit.errors import (
    AlgebraicLoop,
    ArityMismatch,
    FreeVariableEscape,
    NonFunctionalFeedback,
    SignatureMismatch,
    SortMismatch,
)
from rcrskit.settings import AnalysisSettings
from rcrskit.symbolic import (
    FALSE,
    TRUE,
    Add,
    Const,
    Mul,
    Sort,
    TriBool,
    Var,
    conj,
    eq,
    evaluate,
    ge,
    le,
    lt,
)

x, y = Var("x"), Var("y")


def gain(k: int, name: str = "Gain"):
    return with_name(instantiate(BlockSpec("Gain", {"k": k})), name)


def test_mk_assert_update_detects_functional_relations():
    component = mk_assert_update(["x"], ["y"], TRUE, eq(y, x + 1))
    assert component.is_functional
    assert component.fundefs == {"y": Add(x, Const(1))}
    assert render_component(component) == "[- x ~> x+1 -]"


def test_mk_assert_update_relational():
    component = mk_assert_update(["x"], ["y"], ge(x, 0), le(y, x))
    assert not component.is_functional
    assert render_component(component) == "{. (0 <= x) .} o [: x ~> y . (y <= x) :]"


def test_signature_checks():
    with pytest.raises(FreeVariableEscape):
        mk_assert_update(["x"], ["y"], le(y, 0))
    with pytest.raises(FreeVariableEscape):
        mk_assert_update(["x"], ["y"], TRUE, le(Var("z"), 0))
    with pytest.raises(ValueError, match="duplicate"):
        mk_assert_update(["x", "x"], ["y"])
    with pytest.raises(ValueError, match="reuses"):
        mk_assert_update(["x"], ["x"])
    with pytest.raises(SortMismatch):
        mk_assert_update([("b", Sort.BOOL)], ["y"], TRUE, eq(y, Var("b")))


def test_serial_functional_fast_path():
    result = serial(gain(2), gain(3))
    assert result.input_names == ["x"]
    assert result.output_names == ["y"]
    assert render_component(result) == "[- x ~> x*2*3 -]"


def test_serial_weakest_precondition(library):
    result = serial(library["NonDetSqrt"], library["SqrRoot"])
    assert not result.is_bottom
    assert result.pre == ge(x, 0)
    assert not result.is_functional
    assert result.rel.has_quantifier


def test_serial_detects_incompatibility(library):
    black_box = mk_assert_update(["x"], ["y"], name="Box")
    assert serial(black_box, library["SqrRoot"]).is_bottom
    constant = mk_functional([], [("y", Const(-1))], name="Minus1")
    assert serial(constant, library["SqrRoot"]).is_bottom


def test_bottom_propagates(library):
    nothing = bottom(["x"], ["y"])
    assert serial(nothing, library["SqrRoot"]).is_bottom
    assert parallel(nothing, library["Gain"]).is_bottom
    assert render_component(nothing) == "bot"


def test_serial_connection_errors(library):
    with pytest.raises(ArityMismatch):
        serial(library["Add"], library["Add"])
    flag = mk_functional([("b", Sort.BOOL)], [(("c", Sort.BOOL), Var("b", Sort.BOOL))])
    with pytest.raises(SortMismatch):
        serial(flag, library["Gain"])


def test_parallel_renames_clashing_ports():
    result = parallel(gain(2), gain(2))
    assert result.input_names == ["x", "x_1"]
    assert result.output_names == ["y", "y_1"]
    assert render_component(result) == "[- (x, x_1) ~> (x*2, x_1*2) -]"


def test_parallel_relational(library):
    result = parallel(library["NonDetSqrt"], library["Gain"])
    assert not result.is_functional
    assert result.pre == ge(x, 0)


def test_feedback_functional(library):
    result = feedback(library["UnitDelay"])
    assert result.input_names == ["s"]
    assert result.output_names == ["s_next"]
    assert render_component(result) == "[- s ~> s -]"


def test_feedback_algebraic_loop():
    identity = instantiate(BlockSpec("Id"))
    with pytest.raises(AlgebraicLoop):
        feedback(identity)


def test_feedback_relational_chooses_loop_value():
    a, b = Var("a"), Var("b")
    rel = conj(le(0, y), le(y, 1), eq(b, a + x))
    component = mk_assert_update(["x", "a"], ["y", "b"], TRUE, rel)
    result = feedback(component)
    assert result.input_names == ["a"]
    assert result.output_names == ["b"]
    assert result.pre == TRUE
    assert not result.rel.has_quantifier
    assert evaluate(result.rel, {"a": 0, "b": Fraction(1, 2)})
    assert not evaluate(result.rel, {"a": 0, "b": 2})


def test_feedback_non_functional():
    component = mk_assert_update(["x"], ["y"], TRUE, le(y, x))
    with pytest.raises(NonFunctionalFeedback):
        feedback(component)


def test_feedback_reads_copies_through_first_output():
    b, c = Var("b"), Var("c")
    for rel in (conj(le(0, b), le(b, x), eq(c, b)), conj(eq(c, b), le(c, x), le(0, b))):
        result = feedback(mk_assert_update(["a", "x"], ["b", "c"], TRUE, rel))
        assert result.input_names == ["x"]
        assert result.output_names == ["c"]
        assert not result.rel.has_quantifier
        assert evaluate(result.rel, {"x": 2, "c": 1})
        assert not evaluate(result.rel, {"x": 2, "c": 3})
        assert not evaluate(result.rel, {"x": 2, "c": -1})
    with pytest.raises(NonFunctionalFeedback):
        feedback(mk_assert_update(["a", "x"], ["b", "c"], TRUE, conj(le(b, c), eq(c, x))))


def test_feedback_signature_errors():
    with pytest.raises(ArityMismatch):
        feedback(mk_functional([], [("y", Const(1))]))
    mixed = mk_functional([("b", Sort.BOOL)], [("y", Const(1))], name="C")
    with pytest.raises(SortMismatch):
        feedback(mixed)


def test_expression_helpers():
    a, b, c = (Atomic(gain(2, name)) for name in ("A", "B", "C"))
    expression = Feedback(Serial(a, Parallel(b, c)))
    assert render_expression(expression) == "feedback((A o (B ** C)))"
    assert count_feedbacks(expression) == 1
    assert [component.name for component in atomic_components(expression)] == ["A", "B", "C"]


def test_normalize_folds_and_names():
    expression = Serial(Atomic(gain(2, "A")), Atomic(gain(3, "B")))
    result = normalize(expression, name="Model")
    assert result.name == "Model"
    assert render_component(result) == "[- x ~> x*2*3 -]"


def test_normalize_detects_bottom():
    component = mk_assert_update(["x"], ["y"], conj(lt(x, 0), lt(0, x)))
    assert normalize(component).is_bottom
    assert not normalize(component, detect_bottom=False).is_bottom
    assert normalize(bottom(["x"], ["y"])).pre == FALSE


def test_align_renames_positionally():
    other = mk_functional(["a"], [("b", Mul(Var("a"), Const(2)))])
    aligned = align(gain(2), other)
    assert aligned.input_names == ["x"]
    assert aligned.output_names == ["y"]
    assert aligned.fundefs == {"y": Mul(x, Const(2))}
    with pytest.raises(SignatureMismatch):
        align(gain(2), instantiate(BlockSpec("Add")))


def test_semantically_equal(quick_settings):
    doubled = mk_functional(["a"], [("b", Var("a") + Var("a"))])
    assert semantically_equal(gain(2), doubled, quick_settings).answer is TriBool.YES
    judgement = semantically_equal(gain(2), gain(3), quick_settings)
    assert judgement.answer is TriBool.NO
    assert judgement.witness is not None
    witness = judgement.witness
    assert witness["y"] == 2 * witness["x"] or witness["y"] == 3 * witness["x"]
    assert witness["x"] != 0


def test_search_witness_is_deterministic():
    settings = AnalysisSettings(samples=50, seed=3)
    inputs = [Port("x")]

    def never(env):
        return False

    def beyond_ten(env):
        return env["x"] > 10

    assert search_witness(never, inputs, [], [], settings) is None
    first = search_witness(beyond_ten, inputs, [], [], settings)
    second = search_witness(beyond_ten, inputs, [], [], settings)
    assert first == second == {"x": Fraction(100)}


def test_format_environment():
    assert format_environment({"y": Fraction(1, 2), "x": Fraction(3), "b": True}) == {
        "b": True,
        "x": "3",
        "y": "1/2",
    }
    assert format_environment(None) is None


def test_constant_into_square_root(library):
    constant = instantiate(BlockSpec("Constant", {"value": 1}))
    result = normalize(Serial(Atomic(constant), Atomic(library["SqrRoot"])))
    assert render_component(result) == "[- u ~> 1 -]"


def test_weakest_precondition_through_relation(library):
    above = mk_assert_update(["x"], ["y"], TRUE, le(x + 1, y), name="A")
    result = normalize(Serial(Atomic(above), Atomic(library["SqrRoot"])))
    assert not result.pre.has_quantifier
    assert evaluate(result.pre, {"x": -1})
    assert not evaluate(result.pre, {"x": Fraction(-3, 2)})


# Algebraic laws of the composition operators

LAW_SETTINGS = AnalysisSettings(samples=50, seed=1)


def _block(kind: str, **params):
    return with_name(instantiate(BlockSpec(kind, params)), kind)


LINEAR_POOL = [
    _block("Id"),
    gain(-1),
    gain(2),
    gain(Fraction(1, 2)),
    mk_functional(["x"], [("y", x + 1)], pre=le(x, 5), name="Shift"),
    mk_assert_update(["x"], ["y"], ge(x, 0), le(y, x), name="Below"),
]
MIXED_POOL = LINEAR_POOL + [
    _block("SqrRoot"),
    _block("NonDetSqrt"),
    _block("ReceptiveSqrt"),
    _block("Saturation", lo=0, hi=10),
]
linear_components = st.sampled_from(LINEAR_POOL)
mixed_components = st.sampled_from(MIXED_POOL)


def _same(left, right) -> TriBool:
    return semantically_equal(normalize(left), normalize(right), LAW_SETTINGS).answer


@settings(max_examples=40, deadline=None)
@given(linear_components, linear_components, linear_components)
def test_serial_is_associative(first, second, third):
    left = Serial(Serial(Atomic(first), Atomic(second)), Atomic(third))
    right = Serial(Atomic(first), Serial(Atomic(second), Atomic(third)))
    assert _same(left, right) is TriBool.YES


@settings(max_examples=30, deadline=None)
@given(mixed_components, mixed_components, mixed_components)
def test_serial_association_never_differs(first, second, third):
    left = Serial(Serial(Atomic(first), Atomic(second)), Atomic(third))
    right = Serial(Atomic(first), Serial(Atomic(second), Atomic(third)))
    assert _same(left, right) is not TriBool.NO


@settings(max_examples=30, deadline=None)
@given(linear_components, linear_components, linear_components)
def test_parallel_is_associative(first, second, third):
    left = Parallel(Parallel(Atomic(first), Atomic(second)), Atomic(third))
    right = Parallel(Atomic(first), Parallel(Atomic(second), Atomic(third)))
    assert _same(left, right) is TriBool.YES


@settings(max_examples=30, deadline=None)
@given(linear_components)
def test_identity_is_a_unit(component):
    identity = Atomic(_block("Id"))
    assert _same(Serial(identity, Atomic(component)), Atomic(component)) is TriBool.YES
    assert _same(Serial(Atomic(component), identity), Atomic(component)) is TriBool.YES


@settings(max_examples=30, deadline=None)
@given(mixed_components)
def test_bottom_absorbs(component):
    # every component in the pool relates each accepted input to some output
    absorbing = Atomic(bottom(["x"], ["y"]))
    assert normalize(Serial(absorbing, Atomic(component))).is_bottom
    assert normalize(Serial(Atomic(component), absorbing)).is_bottom
    assert normalize(Parallel(Atomic(component), absorbing)).is_bottom
