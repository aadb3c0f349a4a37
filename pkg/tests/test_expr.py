import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moserpairs.expr import ParseError, ScalarField, cos, exp, parse, sin, to_string

NAMES = ["x", "y", "t"]

leaf = st.one_of(
    st.sampled_from(NAMES).map(ScalarField.var),
    st.floats(min_value=-5, max_value=5, allow_nan=False).map(lambda v: ScalarField.const(round(v, 3))),
)


def _extend(children):
    binary = st.tuples(children, children, st.sampled_from(["+", "-", "*"])).map(
        lambda a: {"+": a[0] + a[1], "-": a[0] - a[1], "*": a[0] * a[1]}[a[2]])
    unary = st.tuples(children, st.sampled_from(["sin", "cos", "neg", "div"])).map(
        lambda a: {"sin": sin(a[0]), "cos": cos(a[0]), "neg": -a[0], "div": a[0] / (2 + cos(a[0]))}[a[1]])
    return st.one_of(binary, unary)


exprs = st.recursive(leaf, _extend, max_leaves=12)
ENV = {"x": np.array([0.3, -1.2, 2.0]), "y": np.array([1.1, 0.4, -0.7]), "t": 0.6}


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_print_parse_round_trip(e):
    text = to_string(e.node)
    back = parse(text, NAMES)
    assert to_string(back.node) == text
    np.testing.assert_allclose(np.broadcast_to(back.evaluate(ENV), 3), np.broadcast_to(e.evaluate(ENV), 3),
                               rtol=1e-12, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(exprs)
def test_forward_derivative_matches_finite_difference(e):
    x0, y0, t0 = 0.37, -0.81, 0.25
    h = 1e-5
    env = {"x": x0, "y": y0, "t": t0}
    value, grad = e.value_and_grad(env, ["x", "y"])
    for i, name in enumerate(["x", "y"]):
        up, down = dict(env), dict(env)
        up[name] += h
        down[name] -= h
        fd = (e.evaluate(up) - e.evaluate(down)) / (2 * h)
        assert abs(grad[i] - fd) <= 1e-6 * max(1.0, abs(fd))
        assert abs(float(e.diff(name).evaluate(env)) - grad[i]) <= 1e-9 * max(1.0, abs(grad[i]))
    assert abs(value - e.evaluate(env)) <= 1e-12 * max(1.0, abs(value))


def test_sum_and_product_rules():
    f, g = parse("sin(x)*y", NAMES), parse("exp(x) - y/3", NAMES)
    env = {"x": 0.4, "y": 1.3, "t": 0.0}
    assert (f + g).diff("x").evaluate(env) == pytest.approx(f.diff("x").evaluate(env) + g.diff("x").evaluate(env))
    prod = (f * g).diff("x").evaluate(env)
    assert prod == pytest.approx(f.diff("x").evaluate(env) * g.evaluate(env) + f.evaluate(env) * g.diff("x").evaluate(env))


def test_folding_keeps_zero_products_small():
    x = ScalarField.var("x")
    assert (0 * sin(x)).is_zero
    assert (1 * x) == x
    assert (ScalarField.const(2) * 3).constant_value == 6.0


def test_grammar_precedence_and_unary_minus():
    e = parse("-x*2 + 3/(1+y) - exp(t)", NAMES)
    x, y, t = 0.5, 1.0, 0.2
    assert e.evaluate({"x": x, "y": y, "t": t}) == pytest.approx(-x * 2 + 3 / (1 + y) - math.exp(t))


@pytest.mark.parametrize("text, column", [("sin(", 5), ("x +* y", 4), ("1 + q", 5), ("(x", 3)])
def test_parse_errors_report_position(text, column):
    with pytest.raises(ParseError) as info:
        parse(text, NAMES)
    assert info.value.line == 1
    assert info.value.column == column


def test_parse_error_line_numbers():
    with pytest.raises(ParseError) as info:
        parse("x +\n  * y", NAMES)
    assert info.value.line == 2


def test_unknown_function_rejected():
    with pytest.raises(ParseError):
        parse("tan(x)", NAMES)


def test_compile_is_vectorised_and_complex_safe():
    f = parse("sin(x)*exp(y)", NAMES).compile(["x", "y", "t"])
    z = np.array([0.1 + 1e-20j, 0.2])
    out = f(z, np.array([0.0, 1.0]), 0.0)
    assert out.dtype == complex
    assert out.imag[0] == pytest.approx(math.cos(0.1) * 1e-20, rel=1e-12)
