"""Conformable derivatives of order ``alpha`` in (0, 1].

For a differentiable ``f`` the conformable partial along ``x_k`` is
``x_k**(1 - alpha) * df/dx_k``; that symbolic route is the primary one and
the limit quotient ``(f(x + delta x_k**(1-alpha) e_k) - f(x)) / delta`` is
kept as an independent numerical check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import (
    Expr, Var, abs_, as_expr, diff, evaluate, mul, power, substitute,
)

__all__ = [
    "check_alpha", "ExponentVec", "NumericDiffConfig",
    "conf_deriv", "conf_deriv_numeric", "conf_gradient", "conf_laplacian",
    "signed_power_expr", "anisotropic_op", "compose_orders",
    "chain_rule_residual", "mixed_partials_residual",
]


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"order alpha must lie in (0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True)
class ExponentVec:
    """Per-axis exponents ``p_k > 1`` with conjugates ``q_k = p_k/(p_k - 1)``."""

    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if not p:
            raise ValueError("at least one exponent is required")
        for k, pk in enumerate(p, start=1):
            if not (pk > 1.0 and math.isfinite(pk)):
                raise ValueError(f"exponent p_{k} must be > 1, got {pk}")
        object.__setattr__(self, "p", p)

    @classmethod
    def of(cls, p, n: int) -> "ExponentVec":
        """Broadcast a scalar (or length-1 sequence) to ``n`` axes."""
        if isinstance(p, ExponentVec):
            vals = p.p
        elif np.ndim(p) == 0:
            vals = (float(p),)
        else:
            vals = tuple(p)
        if len(vals) == 1:
            vals = vals * n
        if len(vals) != n:
            raise ValueError(f"expected {n} exponents, got {len(vals)}")
        return cls(vals)

    @property
    def q(self) -> tuple[float, ...]:
        return tuple(pk / (pk - 1.0) for pk in self.p)

    @property
    def uniform(self) -> bool:
        return len(set(self.p)) == 1

    def __len__(self):
        return len(self.p)

    def __iter__(self):
        return iter(self.p)

    def __getitem__(self, i):
        return self.p[i]


@dataclass(frozen=True)
class NumericDiffConfig:
    """Limit-quotient settings. ``step=None`` means ``1e-5 * max(1, x_k)``."""

    step: float | None = None
    scheme: str = "central"

    def __post_init__(self):
        if self.scheme not in ("forward", "central"):
            raise ValueError(f"scheme must be 'forward' or 'central', got {self.scheme!r}")
        if self.step is not None and not 0.0 < self.step <= 1e-3:
            raise ValueError("step must satisfy 0 < step <= 1e-3")


def conf_deriv(e: Expr, k: int, alpha: float) -> Expr:
    """Symbolic conformable partial ``D^alpha_{x_k} e = x_k^(1-alpha) * de/dx_k``."""
    alpha = check_alpha(alpha)
    return mul(power(Var(k), 1.0 - alpha), diff(as_expr(e), k))


def conf_deriv_numeric(e: Expr, k: int, alpha: float, point: Sequence[float],
                       cfg: NumericDiffConfig = NumericDiffConfig()) -> float:
    """Conformable partial at ``point`` from the limit quotient with a finite step."""
    alpha = check_alpha(alpha)
    x = [float(c) for c in point]
    xk = x[k - 1]
    delta = cfg.step if cfg.step is not None else 1e-5 * max(1.0, xk)
    shift = delta * xk ** (1.0 - alpha)

    def at(offset: float) -> float:
        y = list(x)
        y[k - 1] = xk + offset
        return evaluate(e, y)

    if cfg.scheme == "forward":
        return (at(shift) - at(0.0)) / delta
    return (at(shift) - at(-shift)) / (2.0 * delta)


def conf_gradient(e: Expr, alpha: float, n: int) -> list[Expr]:
    return [conf_deriv(e, k, alpha) for k in range(1, n + 1)]


def conf_laplacian(e: Expr, alpha: float, n: int) -> Expr:
    """``sum_k D^alpha_{x_k} D^alpha_{x_k} e``; its zeros are the alpha-harmonic functions."""
    total = as_expr(0.0)
    for k in range(1, n + 1):
        total = total + conf_deriv(conf_deriv(e, k, alpha), k, alpha)
    return total


def signed_power_expr(z: Expr, p: float) -> Expr:
    """``|z|^(p-2) z`` as a tree; for ``p < 2`` it is singular where ``z = 0``."""
    return mul(power(abs_(z), p - 2.0), z)


def anisotropic_op(e: Expr, alpha: float, p) -> Expr:
    """Divergence-form operator ``sum_k D_k(|D_k e|^(p_k-2) D_k e)``.

    ``p_k = 2`` for every axis gives the conformable Laplacian.
    """
    alpha = check_alpha(alpha)
    if isinstance(p, ExponentVec):
        pv = p
    else:
        pv = ExponentVec(tuple(np.atleast_1d(p)))
    total = as_expr(0.0)
    for k, pk in enumerate(pv, start=1):
        inner = signed_power_expr(conf_deriv(e, k, alpha), pk)
        total = total + conf_deriv(inner, k, alpha)
    return total


def compose_orders(e: Expr, alpha: float, beta: float,
                   point: Sequence[float]) -> tuple[float, float]:
    """Compare ``T^(alpha+beta) e`` with ``T^alpha(T^beta e)`` in one variable.

    Only ``alpha + beta <= 1`` is given a direct meaning; ``beta == 1`` uses
    the convention ``T^(alpha+1) := T^alpha o T^1`` so both sides agree.
    """
    alpha = check_alpha(alpha)
    beta = check_alpha(beta)
    nested = conf_deriv(conf_deriv(e, 1, beta), 1, alpha)
    rhs = evaluate(nested, point)
    if beta == 1.0:
        return rhs, rhs
    if alpha + beta > 1.0:
        raise ValueError(f"order alpha+beta={alpha + beta} exceeds 1 and is not defined here")
    lhs = evaluate(conf_deriv(e, 1, alpha + beta), point)
    return lhs, rhs


def chain_rule_residual(outer: Expr, inner: Expr, k: int, alpha: float,
                        point: Sequence[float]) -> float:
    """``|T_x(f(v)) - (T_v f)(v) * v^(alpha-1) * T_x v|`` at ``point``.

    ``outer`` is a function of ``x1`` alone (standing for ``v``); the left
    side differentiates the composed tree directly.
    """
    alpha = check_alpha(alpha)
    composed = substitute(outer, {1: inner})
    lhs = evaluate(conf_deriv(composed, k, alpha), point)
    v = evaluate(inner, point)
    if v <= 0.0:
        raise ValueError("inner function must be positive at the point")
    outer_rate = evaluate(conf_deriv(outer, 1, alpha), [v])
    rhs = outer_rate * v ** (alpha - 1.0) * evaluate(conf_deriv(inner, k, alpha), point)
    return abs(lhs - rhs)


def mixed_partials_residual(e: Expr, alpha: float, beta: float,
                            point: Sequence[float], axes: tuple[int, int] = (1, 2)) -> float:
    i, j = axes
    a = conf_deriv(conf_deriv(e, j, beta), i, alpha)
    b = conf_deriv(conf_deriv(e, i, alpha), j, beta)
    return abs(evaluate(a, point) - evaluate(b, point))
