import math

import numpy as np
import pytest

from confcalc.expr import Const, parse
from confcalc.quadrature import (
    BoxDomain, QuadratureSpec, TensorGrid, alpha_flux, alpha_integral_1d, alpha_integral_nd,
    divergence_residual, fundamental_theorem_residuals, gauss_rule,
    integration_by_parts_residual, iter_faces,
)

from _gen import positive_expr


def test_unit_interval_moments():
    # int_0^1 x^s x^(a-1) dx = 1/(s+a); x^2.5 at a = 0.2 is s^12.5, hence 1e-10
    for a in (0.2, 0.5, 0.9, 1.0):
        for s in (0.0, 1.0, 2.5):
            got = alpha_integral_1d(parse(f"x1^{s}", 1) if s else Const(1.0), 0.0, 1.0, a)
            assert got == pytest.approx(1.0 / (s + a), rel=1e-10)


def test_box_closed_form():
    # [1,2]^2, alpha = 0.5: (int_1^2 x^-0.5 dx)^2 = (2(sqrt2 - 1))^2
    box = BoxDomain((1.0, 1.0), (2.0, 2.0))
    assert alpha_integral_nd(Const(1.0), box, 0.5) == pytest.approx(4 * (math.sqrt(2) - 1) ** 2,
                                                                     rel=1e-14)


def test_without_substitution_matches_on_smooth_interval():
    e = parse("exp(x1)", 1)
    a = alpha_integral_1d(e, 1.0, 3.0, 0.4, QuadratureSpec(substitution=True))
    b = alpha_integral_1d(e, 1.0, 3.0, 0.4, QuadratureSpec(substitution=False))
    assert a == pytest.approx(b, rel=1e-12)


def test_weights_sum_to_measure():
    x, w = gauss_rule(0.0, 2.0, 0.3, QuadratureSpec())
    assert np.all(x > 0) and np.all(w > 0)
    assert w.sum() == pytest.approx(2.0 ** 0.3 / 0.3, rel=1e-13)


def test_box_validation():
    with pytest.raises(ValueError):
        BoxDomain((0.0,), (1.0,))
    with pytest.raises(ValueError):
        BoxDomain((2.0,), (1.0,))
    with pytest.raises(ValueError):
        QuadratureSpec(panels=0)


def test_faces_and_normals():
    box = BoxDomain.cube(1.0, 2.0, 3)
    faces = list(iter_faces(box, 0.5))
    assert len(faces) == 6
    assert sorted(f.term.normal_sign for f in faces) == [-1.0] * 3 + [1.0] * 3


def test_flux_of_constant_field_cancels():
    box = BoxDomain.cube(0.5, 2.0, 2)
    assert alpha_flux([Const(1.0), Const(1.0)], box, 0.7) == pytest.approx(0.0, abs=1e-15)


def test_divergence_identity_random(rng):
    for n in (1, 2, 3):
        spec = QuadratureSpec(panels=4, order=8) if n == 3 else QuadratureSpec()
        for _ in range(4):
            lo = rng.uniform(0.5, 1.0, n)
            box = BoxDomain(tuple(lo), tuple(lo + rng.uniform(0.5, 1.0, n)))
            F = [positive_expr(rng, n, 2) for _ in range(n)]
            res, flux = divergence_residual(F, box, float(rng.uniform(0.2, 1.0)), spec)
            assert res <= 1e-7 * (1 + abs(flux))


def test_parts_closed_form():
    # f = g = x on [1, 2]: boundary value 4 - 1 = 3
    f = parse("x1", 1)
    assert integration_by_parts_residual(f, f, 1.0, 2.0, 0.5) <= 1e-10
    with pytest.raises(ValueError):
        integration_by_parts_residual(f, f, 0.0, 1.0, 0.5)


def test_ftc_exact_case():
    r1, r2 = fundamental_theorem_residuals(parse("x1^2", 1), 0.0, 1.5, 0.5)
    assert r1 <= 1e-10 and r2 <= 1e-10


@pytest.mark.parametrize("alpha", [0.3, 0.75, 0.97, 1.0])
def test_ftc_graded_origin(alpha):
    for e in ("x1^2", "exp(x1)", "cos(x1)*x1^1.7"):
        r1, r2 = fundamental_theorem_residuals(parse(e, 1), 0.0, 1.8, alpha, numeric=True)
        assert r1 <= 1e-8 and r2 <= 1e-10


def test_tensor_grid_rejects_nonfinite():
    grid = TensorGrid(BoxDomain.cube(1.0, 2.0, 2), 0.5)
    with pytest.raises(FloatingPointError):
        grid.integrate(np.full(grid.shape, np.nan))
