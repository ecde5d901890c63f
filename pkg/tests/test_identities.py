import numpy as np
import pytest

from confcalc.expr import DomainError, mul, parse, power
from confcalc.identities import (
    PiconePair, gauss_mean_value_residual, green_first_residual, green_first_terms,
    green_second_residual, picone_L, picone_R, signed_power,
)
from confcalc.quadrature import BoxDomain, QuadratureSpec

from _gen import positive_expr, random_point


def test_signed_power():
    assert signed_power(-8.0, 1.0 / 3.0) == pytest.approx(-2.0)
    assert signed_power(0.0, 0.5) == 0.0
    np.testing.assert_allclose(signed_power(np.array([-4.0, 9.0]), 0.5), [-2.0, 3.0])


def test_picone_hand_example():
    # u = x, v = x^0.5, alpha = 0.5, p = 2 at x = 1:
    # D u = 1, D v = 0.5, u/v = 1: L = 1 + 1*0.25 - 2*1*0.5*1 = 0.25
    pair = PiconePair(parse("x1", 1), parse("x1^0.5", 1))
    split = picone_L(pair, 0.5, 2.0, (1.0,))
    assert split.value == pytest.approx(0.25, abs=1e-15)
    assert picone_R(pair, 0.5, 2.0, (1.0,)) == pytest.approx(0.25, abs=1e-15)


def test_picone_opposite_signs_use_a2():
    # u decreasing, v increasing: the Cauchy-Schwarz part is positive
    pair = PiconePair(parse("3 - x1", 1), parse("x1", 1))
    split = picone_L(pair, 0.7, 2.5, (1.2,))
    assert split.a2 > 0
    assert split.value == pytest.approx(split.a1 + split.a2, rel=1e-13)
    assert picone_R(pair, 0.7, 2.5, (1.2,)) == pytest.approx(split.value, rel=1e-12)


def test_picone_random_pairs(rng):
    for _ in range(60):
        n = int(rng.integers(1, 4))
        u = positive_expr(rng, n, 2)
        v = positive_expr(rng, n, 2)
        p = tuple(float(x) for x in rng.uniform(1.2, 4.0, n))
        alpha = float(rng.uniform(0.1, 1.0))
        pt = random_point(rng, n)
        try:
            split = picone_L(PiconePair(u, v), alpha, p, pt)
        except DomainError:
            continue                      # singular point with p_k < 2
        r = picone_R(PiconePair(u, v), alpha, p, pt)
        assert abs(r - split.value) <= 1e-9 * (1 + abs(split.value))
        assert split.value >= -1e-12 and split.a1 >= -1e-12 and split.a2 >= -1e-12


def test_picone_proportional_pair_is_zero(rng):
    for _ in range(20):
        n = int(rng.integers(1, 4))
        v = positive_expr(rng, n, 2)
        c = float(rng.uniform(0.1, 5.0))
        split = picone_L(PiconePair(mul(c, v), v), 0.6, 2.0, random_point(rng, n))
        assert abs(split.value) <= 1e-12


def test_picone_rejects_bad_pairs():
    with pytest.raises(DomainError):
        picone_L(PiconePair(parse("x1", 1), parse("x1 - 2", 1)), 0.5, 2.0, (1.0,))
    with pytest.raises(DomainError):
        picone_L(PiconePair(parse("x1 - 2", 1), parse("x1", 1)), 0.5, 2.0, (1.0,))
    # D v = 0 with p < 2 is singular
    with pytest.raises(DomainError):
        picone_L(PiconePair(parse("x1", 1), parse("3", 1)), 0.5, 1.5, (1.0,))


def test_green_identities_random(rng):
    for n in (1, 2, 3):
        spec = QuadratureSpec(panels=4, order=8) if n == 3 else QuadratureSpec()
        for _ in range(3):
            lo = rng.uniform(0.5, 1.0, n)
            box = BoxDomain(tuple(lo), tuple(lo + rng.uniform(0.5, 1.0, n)))
            u, v = positive_expr(rng, n, 2), positive_expr(rng, n, 2)
            alpha = float(rng.uniform(0.2, 1.0))
            vol, flux = green_first_terms(u, v, box, alpha, spec)
            assert abs(vol - flux) <= 1e-7 * (1 + abs(flux))
            assert green_second_residual(u, v, box, alpha, spec) <= 1e-7 * (1 + abs(flux))


def test_green_second_is_antisymmetric():
    box = BoxDomain.cube(1.0, 2.0, 2)
    u, v = parse("x1^2*x2", 2), parse("exp(x2)", 2)
    assert green_second_residual(u, v, box, 0.5) == pytest.approx(
        green_second_residual(v, u, box, 0.5), abs=1e-12)
    assert green_second_residual(u, u, box, 0.5) <= 1e-14


def test_gauss_mean_value():
    box = BoxDomain((1.0, 1.0), (2.0, 2.0))
    u = parse("x1^0.5 + x2^0.5", 2)
    assert gauss_mean_value_residual(u, box, 0.5) <= 1e-9
    # not alpha-harmonic: the flux equals the integral of the Laplacian, here nonzero
    assert gauss_mean_value_residual(parse("x1^2", 2), box, 0.5) > 0.1


def test_gauss_weighted_combination(rng):
    for _ in range(5):
        n = int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.2, 1.0))
        c = rng.uniform(-2, 2, n)
        u = sum((mul(float(ck), power(parse(f"x{k + 1}", n), alpha)) for k, ck in enumerate(c)),
                start=parse("0", 1))
        box = BoxDomain.cube(0.5, 1.7, n)
        assert gauss_mean_value_residual(u, box, alpha, QuadratureSpec(panels=4, order=8)) <= 1e-9


def test_green_first_with_constant_v():
    # v = 1 turns the first identity into the divergence theorem for D u
    box = BoxDomain.cube(1.0, 2.0, 2)
    assert green_first_residual(parse("x1^3*x2", 2), parse("1", 2), box, 0.4) <= 1e-9
