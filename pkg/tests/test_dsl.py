import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khgauge.dsl import (
    BinOp,
    Call,
    Const,
    Neg,
    Num,
    Var,
    compile_expr,
    evaluate,
    free_variables,
    parse,
    to_text,
)
from khgauge.errors import EvalError, ParseError
from khgauge.library import FLAGSHIP_TEXT, flagship


def test_flagship_tree():
    e = parse("2*x*sin(1/x^2) - (2/x)*cos(1/x^2)")
    assert isinstance(e, BinOp) and e.op == "-"
    assert e.right == BinOp("*", BinOp("/", Num(2.0), Var("x")), Call("cos", (BinOp("/", Num(1.0), BinOp("^", Var("x"), Num(2.0))),)))
    x = np.linspace(0.01, 1, 50)
    assert np.allclose(compile_expr(e)(x), flagship()(x), rtol=1e-14)
    assert compile_expr(FLAGSHIP_TEXT)(0.5) == pytest.approx(float(flagship()(0.5)))


def test_constant_pi():
    e = parse("sin(2*pi*x)")
    assert e == Call("sin", (BinOp("*", BinOp("*", Num(2.0), Const("pi")), Var("x")),))


def test_error_offset():
    with pytest.raises(ParseError) as info:
        parse("x +")
    assert info.value.position == 3
    assert "number" in info.value.expected


@pytest.mark.parametrize(
    "text,pos",
    [("foo(x)", 0), ("x + bar", 4), ("sin(x", 5), ("2 $ x", 2), ("cantor(x, 1.5)", 10), ("sin(x, x)", 0), ("", 0)],
)
def test_parse_errors(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.position == pos


def test_precedence():
    assert evaluate("2^3^2", 0) == 512
    assert evaluate("-2^2", 0) == -4
    assert evaluate("2^-1", 0) == 0.5
    assert evaluate("1 - 2 - 3", 0) == -4
    assert evaluate("8 / 4 / 2", 0) == 1
    assert evaluate("2 * 3 + 4 * 5", 0) == 26
    assert evaluate("x ** 2", 3) == 9


def test_evaluate_examples():
    assert evaluate("x^2", 0.5) == 0.25
    with pytest.raises(EvalError):
        evaluate("sqrt(x)", -1)
    with pytest.raises(EvalError):
        evaluate("log(x)", 0)
    with pytest.raises(EvalError):
        evaluate("1/x", 0)
    assert evaluate("cantor(x)", 1 / 3) == pytest.approx(0.5, abs=2**-20)
    assert evaluate("cantor(x, 1)", 0.5) == 0.5
    assert evaluate("y + e", 1) == pytest.approx(1 + math.e)


def test_compiled_matches_scalar():
    e = parse("abs(sin(3*x)) + exp(-x) * cos(1/x^3) - sqrt(x) + cantor(x)")
    f = compile_expr(e)
    x = np.linspace(0.05, 1, 40)
    assert np.allclose(f(x), [evaluate(e, t) for t in x], rtol=1e-13, atol=1e-15)


def test_compiled_domain_errors_are_nan():
    f = compile_expr("log(x)")
    y = f(np.array([-1.0, 1.0]))
    assert np.isnan(y[0]) and y[1] == 0.0
    assert np.all(compile_expr("3")(np.zeros(4)) == 3.0)


def test_free_variables():
    assert free_variables(parse("x + pi")) == {"x"}
    assert free_variables(parse("sin(y) * 2")) == {"y"}
    assert free_variables(parse("e^2")) == set()


def test_printer_examples():
    assert to_text(parse("x^2")) == "x^2"
    assert to_text(parse("(x^2)^3")) == "(x^2)^3"
    assert to_text(parse("-(x+1)")) == "-(x + 1)"
    assert to_text(parse("2 - (3 - x)")) == "2 - (3 - x)"
    assert to_text(parse("(-x)^2")) == "(-x)^2"


# -- round trip on random trees ------------------------------------------------

leaves = st.one_of(
    st.builds(Num, st.one_of(st.integers(0, 1000).map(float), st.floats(0, 1e6, allow_nan=False))),
    st.builds(Var, st.sampled_from(["x", "y"])),
    st.builds(Const, st.sampled_from(["pi", "e"])),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "/", "^"]), children, children),
        st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(["sin", "cos", "exp", "log", "sqrt", "abs"]), children),
        st.builds(lambda a, n: Call("cantor", (a, Num(float(n)))), children, st.integers(0, 30)),
    )


trees = st.recursive(leaves, _extend, max_leaves=25)


@settings(max_examples=1000, deadline=None)
@given(trees)
def test_round_trip(tree):
    text = to_text(tree)
    assert parse(text) == tree
    assert to_text(parse(text)) == text
