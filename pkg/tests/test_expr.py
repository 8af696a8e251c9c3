"""Expression language: parsing, evaluation, symbolic differentiation."""

import numpy as np
import numpy.testing as npt
import pytest

from carnotou.expr import (
    ExprSyntaxError,
    LogOfNonPositive,
    UnknownVariable,
    diff,
    eval_jet_at,
    expr_to_text,
    gradient_functions,
    numeric_grad,
    parse_expr,
    point_function,
    series_coefficients,
)
from carnotou.group import Point


def test_precedence_and_power():
    f = parse_expr("1 + 2*x1^2", n=1, m=1)
    fn = point_function(f, 1, 1)
    xs = np.array([[3.0]])
    zs = np.array([[0.0]])
    assert fn(xs, zs)[0] == pytest.approx(19.0)
    g = parse_expr("-x1^2", n=1, m=1)
    assert point_function(g, 1, 1)(xs, zs)[0] == pytest.approx(-9.0)


def test_functions_match_numpy():
    f = parse_expr("exp(sin(x1) + cos(z1)) + log(1 + x1^2)", n=1, m=1)
    fn = point_function(f, 1, 1)
    rng = np.random.default_rng(0)
    xs = rng.normal(size=(50, 1))
    zs = rng.normal(size=(50, 1))
    want = np.exp(np.sin(xs[:, 0]) + np.cos(zs[:, 0])) + np.log(1 + xs[:, 0] ** 2)
    npt.assert_allclose(fn(xs, zs), want, rtol=1e-14)


def test_syntax_errors_carry_offset():
    with pytest.raises(ExprSyntaxError) as exc:
        parse_expr("x1 + * 2", n=2, m=1)
    assert exc.value.offset == 5
    with pytest.raises(ExprSyntaxError):
        parse_expr("exp(x1", n=2, m=1)
    with pytest.raises(ExprSyntaxError):
        parse_expr("x1^(2)", n=2, m=1)  # exponent must be a literal integer


def test_unknown_variable_bounds():
    with pytest.raises(UnknownVariable):
        parse_expr("x3", n=2, m=1)
    with pytest.raises(UnknownVariable):
        parse_expr("z2", n=2, m=1)
    parse_expr("x3", n=3, m=1)


def test_log_requires_positive_center():
    f = parse_expr("log(x1)", n=1, m=1)
    with pytest.raises(LogOfNonPositive):
        eval_jet_at(f, np.array([-1.0, 0.0]), 2, 1, 1)


def test_symbolic_diff_matches_numeric():
    f = parse_expr("exp(x1*z1) + x2^3 - 2*sin(z1)", n=2, m=1)
    p = Point(np.array([0.3, -0.7]), np.array([0.4]))
    grads = gradient_functions(f, 2, 1)(
        np.array([[0.3, -0.7]]), np.array([[0.4]])
    )[0]
    npt.assert_allclose(grads, numeric_grad(f, p), atol=1e-8)
    dz = diff(f, "z", 1)
    val = point_function(dz, 2, 1)(np.array([[0.3, -0.7]]), np.array([[0.4]]))[0]
    assert val == pytest.approx(0.3 * np.exp(0.12) - 2 * np.cos(0.4), rel=1e-12)


def test_expr_to_text_roundtrip():
    src = "exp(x1*z1) + x2^3 - 2*sin(z1)"
    f = parse_expr(src, n=2, m=1)
    g = parse_expr(expr_to_text(f), n=2, m=1)
    pts = np.random.default_rng(1).normal(size=(20, 3))
    fa = point_function(f, 2, 1)(pts[:, :2], pts[:, 2:])
    fb = point_function(g, 2, 1)(pts[:, :2], pts[:, 2:])
    npt.assert_allclose(fa, fb, rtol=1e-15)


def test_series_coefficients_log_guard():
    with pytest.raises(LogOfNonPositive):
        series_coefficients("log", np.array(-2.0), 3)
    coefs = series_coefficients("exp", np.array(0.0), 4)
    npt.assert_allclose(coefs, [1, 1, 0.5, 1 / 6, 1 / 24])


def test_jet_matches_point_function():
    f = parse_expr("x1^2*z1 + cos(x2)", n=2, m=1)
    center = np.array([0.5, 1.2, -0.3])
    jf = eval_jet_at(f, center, 3, 2, 1)
    fn = point_function(f, 2, 1)
    assert jf.value == pytest.approx(fn(center[None, :2], center[None, 2:])[0])
