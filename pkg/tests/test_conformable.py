import math

import numpy as np
import pytest

from confcalc.conformable import (
    ExponentVec, NumericDiffConfig, anisotropic_op, chain_rule_residual, compose_orders,
    conf_deriv, conf_deriv_numeric, conf_gradient, conf_laplacian, mixed_partials_residual,
)
from confcalc.expr import Var, evaluate, parse, to_string

from _gen import positive_expr, random_point


def test_power_rule_closed_form():
    # T(x^s) = s x^(s - alpha)
    for s in (0.3, 1.0, 2.0, -1.5):
        for alpha in (0.25, 0.5, 1.0):
            d = conf_deriv(parse(f"x1^{s}", 1), 1, alpha)
            assert evaluate(d, (1.7,)) == pytest.approx(s * 1.7 ** (s - alpha), rel=1e-14)


def test_documented_examples():
    assert to_string(conf_deriv(parse("x1^2", 1), 1, 0.5)) == "2*x1^1.5"
    assert evaluate(conf_deriv(parse("x1^2", 1), 1, 0.5), (1.0,)) == 2.0
    assert to_string(conf_deriv(parse("7", 1), 1, 0.3)) == "0"


def test_alpha_one_is_ordinary_derivative():
    e = parse("sin(x1)*x1^3", 1)
    assert evaluate(conf_deriv(e, 1, 1.0), (0.9,)) == pytest.approx(
        math.cos(0.9) * 0.9 ** 3 + 3 * math.sin(0.9) * 0.9 ** 2, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_alpha_range(alpha):
    with pytest.raises(ValueError):
        conf_deriv(Var(1), 1, alpha)


def test_exponent_vec():
    pv = ExponentVec.of(2.0, 3)
    assert pv.p == (2.0, 2.0, 2.0) and pv.uniform
    assert ExponentVec((1.5, 3.0)).q == pytest.approx((3.0, 1.5))
    with pytest.raises(ValueError):
        ExponentVec((1.0,))
    with pytest.raises(ValueError):
        ExponentVec.of((2.0, 3.0), 3)


def test_numeric_config_validation():
    with pytest.raises(ValueError):
        NumericDiffConfig(step=1e-2)
    with pytest.raises(ValueError):
        NumericDiffConfig(scheme="backward")


@pytest.mark.parametrize("scheme, tol", [("central", 1e-6), ("forward", 1e-4)])
def test_limit_quotient_agrees(rng, scheme, tol):
    cfg = NumericDiffConfig(scheme=scheme)
    for _ in range(30):
        n = int(rng.integers(1, 4))
        e = positive_expr(rng, n, 3)
        pt = random_point(rng, n)
        k = int(rng.integers(1, n + 1))
        alpha = float(rng.uniform(0.1, 1.0))
        sym = evaluate(conf_deriv(e, k, alpha), pt)
        num = conf_deriv_numeric(e, k, alpha, pt, cfg)
        assert abs(sym - num) <= tol * max(1.0, abs(sym))


def test_alpha_harmonic_examples():
    a = 0.5
    e = parse("x1^0.5 + x2^0.5", 2)
    grad = [evaluate(g, (1.3, 0.8)) for g in conf_gradient(e, a, 2)]
    assert grad == pytest.approx([0.5, 0.5], rel=1e-14)
    assert evaluate(conf_laplacian(e, a, 2), (1.3, 0.8)) == pytest.approx(0.0, abs=1e-15)
    assert evaluate(anisotropic_op(parse("x1^0.5", 1), a, ExponentVec((2.0,))), (1.4,)) == \
        pytest.approx(0.0, abs=1e-15)


def test_anisotropic_op_p2_is_laplacian(rng):
    for _ in range(10):
        e = positive_expr(rng, 2, 2)
        pt = random_point(rng, 2)
        lap = evaluate(conf_laplacian(e, 0.6, 2), pt)
        op = evaluate(anisotropic_op(e, 0.6, ExponentVec((2.0, 2.0))), pt)
        assert op == pytest.approx(lap, rel=1e-10, abs=1e-12)


def test_anisotropic_op_closed_form():
    # e = x^s, p = 3: |s x^(s-a)| s x^(s-a) = s^2 x^(2s-2a); T of that = s^2 (2s-2a) x^(2s-3a)
    s, a = 1.5, 0.5
    val = evaluate(anisotropic_op(parse(f"x1^{s}", 1), a, ExponentVec((3.0,))), (1.2,))
    assert val == pytest.approx(s * s * (2 * s - 2 * a) * 1.2 ** (2 * s - 3 * a), rel=1e-13)


def test_compose_witness():
    lhs, rhs = compose_orders(parse("x1", 1), 0.5, 0.5, (1.0,))
    assert lhs == pytest.approx(1.0, abs=1e-15)
    assert rhs == pytest.approx(0.5, abs=1e-15)
    l1, r1 = compose_orders(parse("x1^3", 1), 0.4, 1.0, (1.3,))
    assert l1 == r1
    with pytest.raises(ValueError):
        compose_orders(parse("x1", 1), 0.7, 0.6, (1.0,))


def test_chain_rule_and_clairaut(rng):
    for _ in range(25):
        n = int(rng.integers(2, 4))
        inner = positive_expr(rng, n, 2)
        outer = positive_expr(rng, 1, 2)
        pt = random_point(rng, n)
        alpha = float(rng.uniform(0.1, 1.0))
        k = int(rng.integers(1, n + 1))
        assert chain_rule_residual(outer, inner, k, alpha, pt) <= 1e-9
        e = positive_expr(rng, n, 3)
        assert mixed_partials_residual(e, alpha, float(rng.uniform(0.1, 1.0)), pt) <= 1e-9


def test_numeric_grid_broadcast():
    e = parse("x1^2*x2", 2)
    d = conf_deriv(e, 2, 0.5)
    grid = [np.array([[1.0], [2.0]]), np.array([[1.0, 4.0]])]
    np.testing.assert_allclose(evaluate(d, grid), grid[0] ** 2 * grid[1] ** 0.5)
