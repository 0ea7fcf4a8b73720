import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwave.jets import Jet
from gwave.netcalc import EpsilonGrid
from gwave.netexpr import (
    DomainError,
    ExprSyntaxError,
    NonScalar,
    UnknownSymbol,
    eval_array,
    eval_jet,
    eval_scalar,
    net_from_expr,
    parse,
    pretty,
    same,
)


def test_unclosed_call_reports_end():
    with pytest.raises(ExprSyntaxError) as ei:
        parse("sin(x1/eps", 1)
    assert ei.value.position == len("sin(x1/eps")
    assert ei.value.expected == "')'"


def test_unknown_symbol_position():
    with pytest.raises(UnknownSymbol) as ei:
        parse("1 + y", 1)
    assert ei.value.position == 4


def test_coordinate_beyond_dimension():
    with pytest.raises(UnknownSymbol):
        parse("x2", 1)
    parse("x2", 2)


@pytest.mark.parametrize(
    "text, value",
    [
        ("1 + 2 * 3", 7.0),
        ("-2 ^ 2", -4.0),
        ("2 ^ 3 ^ 2", 64.0),  # left-associative
        ("8 / 4 / 2", 1.0),
        ("10 - 3 - 2", 5.0),
        ("pow(2, 10)", 1024.0),
        ("abs(-3) + sqrt(16)", 7.0),
        ("exp(log(5))", 5.0),
        ("1e-3 * 1000", 1.0),
        (".5 * 4", 2.0),
    ],
)
def test_precedence(text, value):
    assert eval_scalar(text, 0.1) == pytest.approx(value)


@pytest.mark.parametrize(
    "text", ["log(eps - 1)", "sqrt(-1)", "1 / (eps - eps)", "(-2) ^ 0.5", "exp(1000)"]
)
def test_domain_errors(text):
    with pytest.raises(DomainError):
        eval_scalar(text, 0.5)


def test_negative_base_integer_power_ok():
    assert eval_scalar("(-2) ^ 3", 0.5) == -8.0


def test_nonscalar():
    with pytest.raises(NonScalar):
        eval_scalar("x1 + eps", 0.1)
    with pytest.raises(NonScalar):
        net_from_expr("x1", EpsilonGrid.default())


def test_net_from_expr():
    g = EpsilonGrid.default()
    n = net_from_expr("1 / log(1 / eps)", g)
    np.testing.assert_allclose(n.samples.real, 1 / np.log(1 / g.values))
    c = net_from_expr("3", g)
    assert np.all(c.samples == 3)


def test_array_and_jet_agree():
    node = parse("sin(x1 * x2) * exp(-x1 ^ 2) / (1 + x2 ^ 2)", 2)
    pts = np.array([[0.3, -0.4], [1.1, 0.2]])
    vals = eval_array(node, 0.1, pts)
    jet = eval_jet(node, 0.1, Jet.coordinates(pts, 3))
    np.testing.assert_allclose(jet.value, vals)
    h = 1e-5
    fd = (eval_array(node, 0.1, pts + [0, h]) - eval_array(node, 0.1, pts - [0, h])) / (2 * h)
    np.testing.assert_allclose(jet.derivative((0, 1)), fd, rtol=1e-7)


# --- properties ---------------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["eps", "x1", "x2"]),
    st.integers(0, 9).map(str),
    st.sampled_from(["0.5", "2.25"]),
)


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/^"), children).map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
        children.map(lambda c: f"-({c})"),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "abs"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        st.tuples(children, children).map(lambda t: f"pow({t[0]}, {t[1]})"),
    )


exprs = st.recursive(_leaf, _combine, max_leaves=12)


@settings(max_examples=200)
@given(exprs)
def test_pretty_roundtrip(text):
    tree = parse(text, 2)
    once = pretty(tree)
    assert same(parse(once, 2), tree)
    assert pretty(parse(once, 2)) == once


@settings(max_examples=100)
@given(a=exprs, b=exprs, c=exprs, eps=st.floats(1e-3, 0.5), x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_distributivity(a, b, c, eps, x, y):
    pt = (x, y)
    try:
        va, vb, vc = (eval_scalar(s, eps, pt) for s in (a, b, c))
        lhs = eval_scalar(f"({a}) * (({b}) + ({c}))", eps, pt)
        rhs = eval_scalar(f"({a}) * ({b}) + ({a}) * ({c})", eps, pt)
    except DomainError:
        return
    scale = abs(va) * (abs(vb) + abs(vc)) + 1.0
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9 * scale)
