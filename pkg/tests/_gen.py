"""Seeded random expressions that stay smooth and defined on [0.5, 2]^n."""

from __future__ import annotations

import numpy as np

from confcalc.expr import Const, Var, cos, div, exp, log, mul, power, sin


def positive_expr(rng: np.random.Generator, n: int, depth: int = 2):
    """Expression bounded below by a positive constant on [0.5, 2]^n."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Var(int(rng.integers(1, n + 1)))
        return Const(float(np.round(rng.uniform(0.5, 3.0), 3)))
    kind = int(rng.integers(0, 6))
    a = positive_expr(rng, n, depth - 1)
    if kind == 0:
        return a + positive_expr(rng, n, depth - 1)
    if kind == 1:
        return mul(a, positive_expr(rng, n, depth - 1))
    if kind == 2:
        return div(a, positive_expr(rng, n, depth - 1))
    if kind == 3:
        return power(a, float(np.round(rng.uniform(-1.5, 2.5), 2)))
    if kind == 4:
        return exp(mul(Const(0.3), sin(a)))
    return Const(2.0) + cos(a)


def smooth_expr(rng: np.random.Generator, n: int, depth: int = 2):
    """Possibly sign-changing expression, still smooth on [0.5, 2]^n."""
    kind = int(rng.integers(0, 5))
    a = positive_expr(rng, n, depth)
    if kind == 0:
        return a - positive_expr(rng, n, depth)
    if kind == 1:
        return sin(a)
    if kind == 2:
        return log(a)
    if kind == 3:
        return mul(Const(float(np.round(rng.uniform(-2, 2), 3))), a)
    return a


def random_point(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 2.0):
    return tuple(float(v) for v in rng.uniform(lo, hi, n))
