import math

import numpy as np
import pytest
from scipy.optimize import minimize

from confcalc.expr import mul
from confcalc.hardy import (
    ExpWeightConfig, PowerWeightConfig, power_weight_instance, weighted_sides,
)
from confcalc.optimize import (
    OptimizerConfig, QuotientProblem, cosine_multi_indices, estimate_best_constant,
    nelder_mead, nested_estimates, quotient,
)
from confcalc.quadrature import BoxDomain

B1 = BoxDomain((0.5,), (2.0,))
POWER = PowerWeightConfig(2.0, 1.0, 0.5, (2.0,))
EXP = ExpWeightConfig(-1.0, 0.5, (2.0,))


def rosenbrock(x):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)


def test_nelder_mead_quadratic():
    res = nelder_mead(lambda x: float(np.sum((x - [1.0, -2.0, 0.5]) ** 2)), [0, 0, 0],
                      OptimizerConfig(max_evals=5000, xtol=1e-10, ftol=1e-16))
    np.testing.assert_allclose(res.x, [1.0, -2.0, 0.5], atol=1e-6)


def test_nelder_mead_matches_scipy_on_rosenbrock():
    ours = nelder_mead(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_evals=4000, xtol=1e-10,
                                                                 ftol=1e-14))
    ref = minimize(rosenbrock, [-1.2, 1.0], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 4000})
    np.testing.assert_allclose(ours.x, ref.x, atol=1e-5)
    assert ours.fun <= 1e-10


def test_nelder_mead_never_worse_than_start():
    f = lambda x: math.inf if x[0] > 0.1 else float(-x[0])  # noqa: E731
    res = nelder_mead(f, [0.0, 0.0])
    assert res.fun <= f(np.zeros(2))


def test_optimizer_config_ranges():
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=2)
    with pytest.raises(ValueError):
        OptimizerConfig(contraction=1.2)
    with pytest.raises(ValueError):
        OptimizerConfig(expansion=0.9)


def test_multi_indices_nested():
    assert cosine_multi_indices(1, 3) == [(1,), (2,), (3,)]
    two = cosine_multi_indices(2, 5)
    assert two == [(0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    assert cosine_multi_indices(2, 3) == two[:3]


def test_quotient_baseline_exceeds_constant():
    # baseline bump (x-0.5)(2-x) on the standard instance
    P = QuotientProblem(POWER, 1, B1, d=3)
    assert quotient(P, np.zeros(3)) >= 0.25
    assert quotient(P, ()) == quotient(P, np.zeros(3))


def test_quotient_infeasible_is_inf():
    P = QuotientProblem(POWER, 1, B1, d=2, bound=5.0)
    assert quotient(P, [-3.0, 0.0]) == math.inf     # 1 - 3 cos(pi t) < 0 near t = 0
    assert quotient(P, [2.0, 0.0]) == math.inf      # 1 + 2 cos(pi t) < 0 near t = 1
    assert quotient(P, [6.0, 0.0]) == math.inf      # outside the bound


def test_quotient_matches_expression_route_and_scaling():
    P = QuotientProblem(POWER, 2, BoxDomain.cube(0.5, 2.0, 2), d=4)
    _, ws = power_weight_instance(POWER, 2)
    theta = [0.2, -0.1, 0.05, 0.1]
    u = P.member_expr(theta)
    for c in (1.0, 0.5, 2.0):
        g, m = weighted_sides(mul(c, u), ws, 0.5, 2.0, P.box)
        assert sum(g) / sum(m) == pytest.approx(quotient(P, theta), rel=1e-12)


def test_problem_validation():
    with pytest.raises(ValueError):
        QuotientProblem(POWER, 1, B1, d=9)
    with pytest.raises(ValueError):
        QuotientProblem(POWER, 1, B1, bound=-1.0)
    with pytest.raises(ValueError):
        QuotientProblem(PowerWeightConfig(2.0, 1.0, 0.5, (2.0, 2.5)), 2, BoxDomain.cube(0.5, 2, 2))


@pytest.mark.parametrize("inst", [POWER, EXP])
def test_estimate_is_valid_and_deterministic(inst):
    P = QuotientProblem(inst, 1, B1, d=4)
    cfg = OptimizerConfig(seed=3)
    a = estimate_best_constant(P, cfg)
    b = estimate_best_constant(P, cfg)
    assert a.q_star >= a.L - 1e-6
    assert a.q_star == b.q_star and a.theta == b.theta
    assert a.q_star <= quotient(P, np.zeros(4))
    assert len(a.restart_values) == 5


def test_threads_do_not_change_result():
    P = QuotientProblem(EXP, 1, B1, d=3)
    one = estimate_best_constant(P, OptimizerConfig(threads=1))
    four = estimate_best_constant(P, OptimizerConfig(threads=4))
    assert one == four


def test_zero_dimensional_family():
    P = QuotientProblem(POWER, 1, B1, d=0)
    res = estimate_best_constant(P)
    assert res.q_star == quotient(P, ())
    assert res.theta == ()


def test_nested_bases_are_monotone():
    out = nested_estimates(lambda d: QuotientProblem(EXP, 1, B1, d=d), [0, 1, 2, 4])
    qs = [r.q_star for r in out]
    assert all(b <= a for a, b in zip(qs, qs[1:]))


def test_two_dimensional_problem():
    box = BoxDomain.cube(0.5, 2.0, 2)
    P = QuotientProblem(PowerWeightConfig(2.0, 1.0, 0.5, (2.0,)), 2, box, d=3)
    res = estimate_best_constant(P, OptimizerConfig(max_evals=400))
    assert res.q_star >= 0.25 - 1e-6
