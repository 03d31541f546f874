import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampspec.expr import ExpressionError, parse_expression


@pytest.mark.parametrize(
    "source, x, expected",
    [
        ("1 + 2 * 3", 0.0, 7.0),
        ("-x^2", 3.0, -9.0),
        ("2^3^2", 0.0, 512.0),
        ("(1 + x) / 2", 3.0, 2.0),
        ("abs(x) - 1", -4.0, 3.0),
        ("exp(0) + cos(pi)", 0.0, 0.0),
        ("if(abs(x) < 1, -1, 0.5)", 0.3, -1.0),
        ("if(abs(x) < 1, -1, 0.5)", 2.0, 0.5),
        ("min(x, 2) + max(x, 2)", 5.0, 7.0),
        ("sign(x - pi/2)", 0.1, -1.0),
        ("1e-3 * 2", 0.0, 2e-3),
        ("x >= 1", 1.0, 1.0),
        ("x != 1", 1.0, 0.0),
    ],
)
def test_evaluation(source, x, expected):
    assert parse_expression(source)(np.array([x]))[0] == pytest.approx(expected)


def test_two_variables():
    f = parse_expression("x * y + 1")
    out = f(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_array_equal(out, [4.0, 9.0])


def test_constant_broadcasts_to_grid_shape():
    out = parse_expression("2.5")(np.zeros(7))
    assert out.shape == (7,) and np.all(out == 2.5)


def test_number_input():
    assert parse_expression(-1)(np.zeros(2)).tolist() == [-1.0, -1.0]


@pytest.mark.parametrize(
    "source, token",
    [
        ("-1 + * x", "'*'"),
        ("foo(x)", "foo"),
        ("x +", "end of input"),
        ("(x + 1", "end of input"),
        ("z", "z"),
        ("if(x, 1)", "if"),
        ("1 $ 2", "$"),
    ],
)
def test_errors_name_the_token(source, token):
    with pytest.raises(ExpressionError) as exc:
        parse_expression(source)
    assert token in str(exc.value)


def test_y_without_second_axis_is_an_error():
    with pytest.raises(ExpressionError):
        parse_expression("x + y")(np.zeros(3))


@given(
    st.floats(-50, 50, allow_nan=False),
    st.floats(-50, 50, allow_nan=False),
    st.floats(-50, 50, allow_nan=False),
)
def test_matches_python_arithmetic(a, b, x):
    f = parse_expression(f"({a!r}) * x + ({b!r}) * x^2 - abs(x)")
    assert f(np.array([x]))[0] == pytest.approx(a * x + b * x**2 - abs(x), rel=1e-12, abs=1e-9)


@given(st.floats(-5, 5, allow_nan=False))
def test_piecewise_matches_python(x):
    f = parse_expression("if(x < 0, exp(x), sqrt(1 + x))")
    expected = math.exp(x) if x < 0 else math.sqrt(1 + x)
    assert f(np.array([x]))[0] == pytest.approx(expected)
