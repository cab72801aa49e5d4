from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PLATEAU, F, PIECEWISE, SIN_SQRT, SLM
from equasi.errors import DomainError, ExpressionSyntaxError, NotDifferentiable, UnknownIdentifier
from equasi.funcspec import (
    HUGE,
    PLUS_INFINITY,
    BinOp,
    Box,
    Call,
    ExpressionTree,
    Neg,
    Num,
    ScalarFunc,
    Var,
    VectorFunc,
    directional_derivative,
    evaluate,
    ext_real,
    gradient,
    parse_expression,
    serialize,
)

CORPUS = [PLATEAU, SLM, PIECEWISE, SIN_SQRT, "-x^2", "sqrt(abs(x))", "x^3 + x", "-x", "sin(x)",
          "min(abs(x), 1)", "2^-x^2", "-(2)^3", "exp(-x) / (1 + log(1 + x^2))"]


# ------------------------------------------------------------------ parsing


@pytest.mark.parametrize("src", CORPUS)
def test_corpus_round_trip(src):
    tree = parse_expression(src, 1)
    assert parse_expression(serialize(tree), 1) == tree


def test_parse_examples():
    assert F("min(max(abs(abs(x1)-1), x1^2-3), 6)")([1.0]) == 0.0
    assert F("x1")([7.0]) == 7.0
    assert abs(F(SIN_SQRT)([math.pi**2])) <= 1e-12


def test_power_is_right_associative_and_binds_tighter_than_unary_minus():
    assert F("2^3^2")([0.0]) == 512.0
    assert F("-x^2")([3.0]) == -9.0
    assert F("2^-1")([0.0]) == 0.5


def test_unicode_operators():
    assert F("2 × x − 1")([3.0]) == 5.0


def test_syntax_error_reports_position_and_expected():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression("x + * 2", 1)
    assert info.value.position == 4
    assert "number" in info.value.expected


@pytest.mark.parametrize("src", ["foo(x)", "x3", "z + 1"])
def test_unknown_identifier(src):
    with pytest.raises(UnknownIdentifier):
        parse_expression(src, 2)


def test_wrong_function_arity():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("abs(x, x)", 1)
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("max(x)", 1)


leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False).map(Num),
    st.floats(-1e6, -1e-3).map(Num),
    st.integers(0, 1).map(Var),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["abs", "sqrt", "sin", "cos", "exp", "log"]), children).map(
            lambda t: Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["min", "max"]), st.lists(children, min_size=2, max_size=3)).map(
            lambda t: Call(t[0], tuple(t[1]))),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
def test_round_trip_property(root):
    tree = ExpressionTree(root, 2, ("x1", "x2"))
    assert parse_expression(serialize(tree), 2) == tree


# --------------------------------------------------------------- evaluation


def test_evaluate_examples():
    assert evaluate(F("-x^2"), [2.0]) == -4.0
    assert evaluate(F("sqrt(abs(x))"), [4.0]) == 2.0
    f = F("-x", domain=Box.interval(-math.pi, math.pi, open=True))
    assert evaluate(f, [5.0]) == PLUS_INFINITY
    assert evaluate(f, [math.pi]) == PLUS_INFINITY


def test_domain_error_inside_box():
    with pytest.raises(DomainError):
        F("sqrt(x)")([-1.0])
    with pytest.raises(DomainError):
        F("log(x)")([0.0])


def test_ext_real_rejects_minus_infinity():
    assert ext_real(math.inf) == PLUS_INFINITY
    with pytest.raises(ValueError):
        ext_real(-math.inf)


def test_unbounded_edges_use_sentinel():
    b = Box.real(2)
    assert np.all(b.hi == HUGE) and np.all(b.lo == -HUGE)
    assert F("x")([2 * HUGE]) == PLUS_INFINITY


def test_vectorised_values_match_pointwise():
    f = F(PLATEAU)
    X = np.linspace(-5, 5, 41)[:, None]
    assert np.array_equal(f.values(X), np.array([f([x]) for x in X[:, 0]]))


def test_vector_func_shares_domain():
    box = Box.interval(-1, 1)
    g = VectorFunc((F("x", domain=box), F("-x", domain=box)))
    assert g.values([[0.5]]).tolist() == [[0.5, -0.5]]
    with pytest.raises(ValueError):
        VectorFunc((F("x", domain=box), F("x")))


@given(st.sampled_from(CORPUS), st.floats(-50, 50))
def test_never_minus_infinity(src, x):
    try:
        v = F(src)([x])
    except DomainError:
        return
    assert v != -math.inf


# ------------------------------------------------------------ differentiation


def test_gradient_examples():
    assert gradient(F("x^2"), [3.0]) == pytest.approx([6.0], abs=1e-15)
    assert gradient(F("sin(x)"), [0.0]) == pytest.approx([1.0], abs=1e-15)
    with pytest.raises(NotDifferentiable):
        gradient(F("abs(x)"), [0.0])
    with pytest.raises(NotDifferentiable):
        gradient(F("max(x, 0)"), [0.0], cross_check=False)


def test_gradient_two_variables():
    g = gradient(F("x1^2 * x2 + sin(x2)", 2), [1.0, 2.0])
    assert g == pytest.approx([4.0, 1.0 + math.cos(2.0)], rel=1e-12)


SMOOTH = ["x^3 + x", "-x^2", "sin(x) * exp(-x^2 / 10)", "log(1 + x^2)", "cos(x)^2 - x / 3"]


@pytest.mark.parametrize("src", SMOOTH)
def test_gradient_agreement_100_points(src):
    f = F(src)
    xs = np.random.default_rng(7).uniform(-5, 5, 100)
    for x in xs:
        dual = gradient(f, [x], cross_check=False)
        cd = gradient(f, [x], method="central-difference", cross_check=False)
        assert abs(dual[0] - cd[0]) <= 1e-5 * (1 + abs(dual[0]))


def test_directional_derivative_examples():
    assert directional_derivative(F("abs(x)"), [0.0], [1.0]) == pytest.approx(1.0)
    assert directional_derivative(F("abs(x)"), [0.0], [-1.0]) == pytest.approx(1.0)
    assert directional_derivative(F("sqrt(abs(x))"), [0.0], [1.0]) == PLUS_INFINITY


@pytest.mark.parametrize("src", SMOOTH)
def test_directional_derivative_matches_gradient(src):
    f = F(src)
    for x, w in [(0.3, 1.0), (-1.7, -2.0), (2.2, 0.5)]:
        g = gradient(f, [x], cross_check=False)[0]
        assert directional_derivative(f, [x], [w]) == pytest.approx(g * w, abs=1e-5 * (1 + abs(g * w)))


def test_box_helpers():
    b = Box.interval(0, math.inf)
    assert b.contains(np.array([[0.0], [1e6], [-1e-9]])).tolist() == [True, True, False]
    assert not b.is_bounded
    t = b.truncate(10)
    assert t.is_bounded and t.hi[0] == pytest.approx(10.0)
    o = Box.interval(-1, 1, open=True)
    lo, hi = o.sampling_bounds()
    assert -1 < lo[0] and hi[0] < 1
    assert not o.contains(np.array([[1.0]]))[0]
