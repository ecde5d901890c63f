"""Pointwise Picone identities and integral identities on boxes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .conformable import ExponentVec, check_alpha, conf_deriv, conf_gradient, conf_laplacian
from .expr import DomainError, Expr, evaluate, mul, power, div
from .quadrature import BoxDomain, QuadratureSpec, TensorGrid, alpha_flux

__all__ = [
    "ExponentVec", "PiconePair", "PiconeSplit", "signed_power",
    "picone_R", "picone_L", "green_first_terms", "green_first_residual",
    "green_second_terms", "green_second_residual", "gauss_mean_value_residual",
]


def signed_power(z, q: float):
    """``sign(z) |z|**q``; equals ``|z|**(q-1) z`` without negative-base trouble."""
    z = np.asarray(z, dtype=float)
    out = np.sign(z) * np.abs(z) ** q
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PiconePair:
    """Functions ``u >= 0`` and ``v > 0`` entering the Picone identity."""

    u: Expr
    v: Expr


class PiconeSplit(NamedTuple):
    value: float
    a1: float
    a2: float


def _pair_values(pair: PiconePair, point: Sequence[float]) -> tuple[float, float]:
    u = evaluate(pair.u, point)
    v = evaluate(pair.v, point)
    if v <= 0.0:
        raise DomainError(f"v must be positive, got v={v} at {tuple(point)}")
    if u < 0.0:
        raise DomainError(f"u must be non-negative, got u={u} at {tuple(point)}")
    return u, v


def _check_singular(dv: float, pk: float, k: int, point) -> None:
    if pk < 2.0 and dv == 0.0:
        raise DomainError(
            f"D_{k} v vanishes at {tuple(point)} while p_{k}={pk} < 2 (singular point)")


def picone_R(pair: PiconePair, alpha: float, p, point: Sequence[float]) -> float:
    """``sum_k |D_k u|^p_k - sum_k D_k(u^p_k / v^(p_k-1)) |D_k v|^(p_k-2) D_k v``.

    The inner derivative is taken symbolically on the quotient tree, so
    this route does not share arithmetic with :func:`picone_L`.
    """
    alpha = check_alpha(alpha)
    n = len(point)
    pv = ExponentVec.of(p, n)
    _pair_values(pair, point)
    total = 0.0
    for k, pk in enumerate(pv, start=1):
        du = evaluate(conf_deriv(pair.u, k, alpha), point)
        dv = evaluate(conf_deriv(pair.v, k, alpha), point)
        _check_singular(dv, pk, k, point)
        ratio = div(power(pair.u, pk), power(pair.v, pk - 1.0))
        dratio = evaluate(conf_deriv(ratio, k, alpha), point)
        total += abs(du) ** pk - dratio * signed_power(dv, pk - 1.0)
    return total


def picone_L(pair: PiconePair, alpha: float, p, point: Sequence[float]) -> PiconeSplit:
    """Expanded Picone form together with its non-negative parts ``A_1`` and ``A_2``.

    ``A_1`` is the Young's-inequality part and ``A_2`` the Cauchy-Schwarz
    part; both vanish when ``u`` is a constant multiple of ``v``.
    """
    alpha = check_alpha(alpha)
    n = len(point)
    pv = ExponentVec.of(p, n)
    u, v = _pair_values(pair, point)
    r = u / v
    value = a1 = a2 = 0.0
    for k, pk in enumerate(pv, start=1):
        du = evaluate(conf_deriv(pair.u, k, alpha), point)
        dv = evaluate(conf_deriv(pair.v, k, alpha), point)
        _check_singular(dv, pk, k, point)
        adu, adv = abs(du), abs(dv)
        value += (adu ** pk + (pk - 1.0) * r ** pk * adv ** pk
                  - pk * r ** (pk - 1.0) * signed_power(dv, pk - 1.0) * du)
        a1 += adu ** pk - pk * r ** (pk - 1.0) * adv ** (pk - 1.0) * adu + (pk - 1.0) * (r * adv) ** pk
        if adv > 0.0:
            a2 += pk * r ** (pk - 1.0) * adv ** (pk - 2.0) * (adv * adu - du * dv)
    return PiconeSplit(value, a1, a2)


def _field_values(exprs: Sequence[Expr], grid: TensorGrid) -> list[np.ndarray]:
    return [grid.values(e) for e in exprs]


def green_first_terms(u: Expr, v: Expr, box: BoxDomain, alpha: float,
                      spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """``(volume, flux)`` for ``int (D u . D v + v Lap u) d_alpha x = flux(v D u)``."""
    n = box.n
    grid = TensorGrid(box, alpha, spec)
    gu = conf_gradient(u, alpha, n)
    gv = conf_gradient(v, alpha, n)
    dot = sum(a * b for a, b in zip(_field_values(gu, grid), _field_values(gv, grid)))
    vol = grid.integrate(dot + grid.values(v) * grid.values(conf_laplacian(u, alpha, n)))
    flux = alpha_flux([mul(v, g) for g in gu], box, alpha, spec)
    return vol, flux


def green_first_residual(u: Expr, v: Expr, box: BoxDomain, alpha: float,
                         spec: QuadratureSpec = QuadratureSpec()) -> float:
    vol, flux = green_first_terms(u, v, box, alpha, spec)
    return abs(vol - flux)


def green_second_terms(u: Expr, v: Expr, box: BoxDomain, alpha: float,
                       spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """``(volume, flux)`` for ``int (u Lap v - v Lap u) = flux(u D v) - flux(v D u)``."""
    n = box.n
    grid = TensorGrid(box, alpha, spec)
    uu, vv = grid.values(u), grid.values(v)
    vol = grid.integrate(uu * grid.values(conf_laplacian(v, alpha, n))
                         - vv * grid.values(conf_laplacian(u, alpha, n)))
    flux_u = alpha_flux([mul(u, g) for g in conf_gradient(v, alpha, n)], box, alpha, spec)
    flux_v = alpha_flux([mul(v, g) for g in conf_gradient(u, alpha, n)], box, alpha, spec)
    return vol, flux_u - flux_v


def green_second_residual(u: Expr, v: Expr, box: BoxDomain, alpha: float,
                          spec: QuadratureSpec = QuadratureSpec()) -> float:
    vol, flux = green_second_terms(u, v, box, alpha, spec)
    return abs(vol - flux)


def gauss_mean_value_residual(u: Expr, box: BoxDomain, alpha: float,
                              spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Net flux of ``D u`` through the box; zero for alpha-harmonic ``u``."""
    return abs(alpha_flux(conf_gradient(u, alpha, box.n), box, alpha, spec))
