"""Weighted Hardy-type inequalities on boxes, built from Picone's identity.

Given weights ``W_k, H_k >= 0``, constants ``L_k`` and a positive ``v`` with

    -D_k(W_k |D_k v|^(p_k-2) D_k v) >= L_k H_k v^(p_k-1)

every ``u >= 0`` satisfies

    sum_k int W_k |D_k u|^p_k  >=  sum_k L_k int H_k u^p_k  +  boundary flux,

the flux being that of ``(u^p_k / v^(p_k-1)) W_k |D_k v|^(p_k-2) D_k v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .conformable import ExponentVec, check_alpha, conf_deriv, signed_power_expr
from .expr import (
    ONE, Const, DomainError, Expr, Var, cos, div, evaluate, exp, mul, power,
)
from .quadrature import BoxDomain, QuadratureSpec, TensorGrid, alpha_flux

__all__ = [
    "WeightSystem", "PowerWeightConfig", "ExpWeightConfig", "InequalityReport",
    "SubsolutionError", "verify_subsolution", "hardy_general",
    "power_weight_instance", "exp_weight_instance", "weighted_sides",
    "corollary_38_bound", "corollary_39_bound", "remark_37_bound",
    "hpw_check", "hpw_cauchy_schwarz", "hpw_anisotropic_check",
    "bump_suite", "positive_suite", "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-7
SUBSOLUTION_TOL = 1e-10


class SubsolutionError(ValueError):
    """The auxiliary function fails the subsolution inequality, or cannot be evaluated."""


@dataclass(frozen=True)
class WeightSystem:
    W: tuple[Expr, ...]
    H: tuple[Expr, ...]
    L: tuple[float, ...]

    def __post_init__(self):
        if not len(self.W) == len(self.H) == len(self.L):
            raise ValueError("W, H and L must have one entry per axis")
        L = tuple(float(c) for c in self.L)
        for k, c in enumerate(L, start=1):
            if not (math.isfinite(c) and c >= 0.0):
                raise ValueError(f"L_{k} must be finite and >= 0, got {c}")
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return len(self.W)


@dataclass(frozen=True)
class PowerWeightConfig:
    """Power weights ``W_k = x_k^m`` and ``H_k = x_k^(m - alpha p_k)``.

    ``regime="standard"`` enforces ``a > alpha``, ``1 < p_k < a+m`` and
    ``p_k(1-alpha) >= a-alpha``. Those force ``m > alpha(p_k-1)``, so they
    exclude ``m = 0`` and ``alpha = 1``. ``regime="mirrored"`` flips the
    last two (``p_k > a+m``, ``p_k(1-alpha) <= a-alpha``); then ``beta_k > 0``
    and the same auxiliary function is still a subsolution.
    """

    m: float
    a: float
    alpha: float
    p: tuple[float, ...]
    regime: str = "standard"

    def __post_init__(self):
        check_alpha(self.alpha)
        pv = ExponentVec(tuple(np.atleast_1d(self.p)))
        object.__setattr__(self, "p", pv.p)
        if self.regime not in ("standard", "mirrored"):
            raise ValueError(f"regime must be 'standard' or 'mirrored', got {self.regime!r}")
        if not self.a > self.alpha:
            raise ValueError(f"requires a>α (a={self.a}, α={self.alpha})")
        for k, pk in enumerate(pv, start=1):
            lhs, rhs = pk * (1.0 - self.alpha), self.a - self.alpha
            if self.regime == "standard":
                if not pk < self.a + self.m:
                    raise ValueError(f"requires 1<p_k<a+m (p_{k}={pk}, a+m={self.a + self.m})")
                if not lhs >= rhs:
                    raise ValueError(f"requires p_k(1−α) ≥ a−α (k={k}: {lhs} < {rhs})")
            else:
                if not pk > self.a + self.m:
                    raise ValueError(f"mirrored regime requires p_k>a+m (p_{k}={pk}, a+m={self.a + self.m})")
                if not lhs <= rhs:
                    raise ValueError(f"mirrored regime requires p_k(1−α) ≤ a−α (k={k}: {lhs} > {rhs})")

    @property
    def beta(self) -> tuple[float, ...]:
        return tuple(-(self.m + self.a - pk) / pk for pk in self.p)

    @property
    def L(self) -> tuple[float, ...]:
        return tuple(abs((self.m + self.a - pk) / pk) ** pk for pk in self.p)


@dataclass(frozen=True)
class ExpWeightConfig:
    """``W_k = 1``, ``H_k = x_k^(p_k(1-alpha))``, ``L_k = (p_k-1)|m|^p_k`` with ``m < 0``."""

    m: float
    alpha: float
    p: tuple[float, ...]

    def __post_init__(self):
        check_alpha(self.alpha)
        object.__setattr__(self, "p", ExponentVec(tuple(np.atleast_1d(self.p))).p)
        if not self.m < 0.0:
            raise ValueError(f"requires m<0 (m={self.m})")

    @property
    def L(self) -> tuple[float, ...]:
        return tuple((pk - 1.0) * abs(self.m) ** pk for pk in self.p)


@dataclass
class InequalityReport:
    theorem: str
    alpha: float
    p: tuple[float, ...]
    lhs: float
    rhs_interior: float
    boundary_term: float
    subsolution_min_slack: float | None = None
    params: dict[str, Any] = field(default_factory=dict)
    panels: int = 0
    order: int = 0
    tol: float = DEFAULT_TOL

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs_interior - self.boundary_term

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol * (1.0 + abs(self.lhs))

    def to_dict(self) -> dict[str, Any]:
        return {
            "theorem": self.theorem,
            "alpha": self.alpha,
            "p": list(self.p),
            "params": dict(self.params),
            "lhs": self.lhs,
            "rhs_interior": self.rhs_interior,
            "boundary_term": self.boundary_term,
            "margin": self.margin,
            "subsolution_min_slack": self.subsolution_min_slack,
            "quadrature": {"panels": self.panels, "order": self.order},
            "pass": self.passed,
        }


# ---------------------------------------------------------------- subsolution

def _flux_fields(v: Expr, ws: WeightSystem, alpha: float, pv: ExponentVec) -> list[Expr]:
    """``W_k |D_k v|^(p_k-2) D_k v`` for each axis."""
    return [mul(ws.W[k - 1], signed_power_expr(conf_deriv(v, k, alpha), pk))
            for k, pk in enumerate(pv, start=1)]


def _sample_grid(box: BoxDomain, samples: int) -> list[np.ndarray]:
    n = box.n
    out = []
    for i in range(n):
        shape = [1] * n
        shape[i] = samples
        out.append(np.linspace(box.lower[i], box.upper[i], samples).reshape(shape))
    return out


def _locate_bad(e: Expr, coords: list[np.ndarray]) -> tuple[float, ...] | None:
    full = np.broadcast_arrays(*coords)
    for idx in np.ndindex(full[0].shape):
        pt = tuple(float(c[idx]) for c in full)
        try:
            val = evaluate(e, pt)
        except (DomainError, ZeroDivisionError, FloatingPointError):
            return pt
        if not math.isfinite(val):
            return pt
    return None


def _sampled(e: Expr, coords: list[np.ndarray], what: str) -> np.ndarray:
    try:
        with np.errstate(all="ignore"):
            vals = np.asarray(evaluate(e, coords), dtype=float)
    except (DomainError, ZeroDivisionError):
        vals = None
    if vals is None or not np.all(np.isfinite(vals)):
        pt = _locate_bad(e, coords)
        raise SubsolutionError(f"{what} is singular at x={pt}")
    return vals


def verify_subsolution(v: Expr, ws: WeightSystem, alpha: float, p, box: BoxDomain,
                       grid_samples: int = 20) -> float:
    """Minimum over a ``grid_samples^n`` grid and over ``k`` of the subsolution slack.

    The slack is ``-D_k(W_k |D_k v|^(p_k-2) D_k v) - L_k H_k v^(p_k-1)``; a
    non-negative result certifies the inequality at every sample.
    """
    alpha = check_alpha(alpha)
    n = box.n
    pv = ExponentVec.of(p, n)
    if ws.n != n:
        raise ValueError(f"weight system has {ws.n} axes, box has {n}")
    coords = _sample_grid(box, grid_samples)
    vv = _sampled(v, coords, "v")
    if np.any(vv <= 0.0):
        raise SubsolutionError("v must be positive on the box")
    worst = math.inf
    for k, (pk, G) in enumerate(zip(pv, _flux_fields(v, ws, alpha, pv)), start=1):
        divergence = _sampled(conf_deriv(G, k, alpha), coords, f"D_{k}(W_{k}|D_{k}v|^(p-2)D_{k}v)")
        H = _sampled(ws.H[k - 1], coords, f"H_{k}")
        slack = -divergence - ws.L[k - 1] * H * vv ** (pk - 1.0)
        worst = min(worst, float(np.min(slack)))
    return worst


# ---------------------------------------------------------------- main harness

def _check_nonnegative(e: Expr, grid: TensorGrid, name: str) -> np.ndarray:
    vals = grid.values(e)
    if np.any(vals < 0.0):
        raise ValueError(f"{name} must be non-negative on the box")
    return vals


def weighted_sides(u: Expr, ws: WeightSystem, alpha: float, p, box: BoxDomain,
                   spec: QuadratureSpec = QuadratureSpec()) -> tuple[list[float], list[float]]:
    """Per-axis ``int W_k |D_k u|^p_k`` and ``int H_k |u|^p_k`` (without ``L_k``)."""
    alpha = check_alpha(alpha)
    pv = ExponentVec.of(p, box.n)
    grid = TensorGrid(box, alpha, spec)
    au = np.abs(grid.values(u))
    grads, masses = [], []
    for k, pk in enumerate(pv, start=1):
        W = _check_nonnegative(ws.W[k - 1], grid, f"W_{k}")
        H = _check_nonnegative(ws.H[k - 1], grid, f"H_{k}")
        du = grid.values(conf_deriv(u, k, alpha))
        grads.append(grid.integrate(W * np.abs(du) ** pk))
        masses.append(grid.integrate(H * au ** pk))
    return grads, masses


def hardy_general(u: Expr, v: Expr, ws: WeightSystem, alpha: float, p, box: BoxDomain,
                  spec: QuadratureSpec = QuadratureSpec(), *, theorem: str = "3.2",
                  params: dict | None = None, require_subsolution: bool = True,
                  subsolution_tol: float = SUBSOLUTION_TOL, grid_samples: int = 20,
                  tol: float = DEFAULT_TOL) -> InequalityReport:
    """Evaluate the three terms of the weighted inequality for one ``u``.

    With ``require_subsolution`` the grid certificate for ``v`` must reach
    ``-subsolution_tol``; otherwise its value is only recorded.
    """
    alpha = check_alpha(alpha)
    pv = ExponentVec.of(p, box.n)
    slack = verify_subsolution(v, ws, alpha, pv, box, grid_samples)
    if require_subsolution and slack < -subsolution_tol:
        raise SubsolutionError(
            f"auxiliary function violates the subsolution inequality: min slack {slack:.3e}")
    grid = TensorGrid(box, alpha, spec)
    if np.any(grid.values(u) < 0.0):
        raise ValueError("u must be non-negative on the box")
    grads, masses = weighted_sides(u, ws, alpha, pv, box, spec)
    lhs = math.fsum(grads)
    rhs = math.fsum(c * mass for c, mass in zip(ws.L, masses))
    field_ = [mul(div(power(u, pk), power(v, pk - 1.0)), G)
              for pk, G in zip(pv, _flux_fields(v, ws, alpha, pv))]
    boundary = alpha_flux(field_, box, alpha, spec)
    return InequalityReport(theorem=theorem, alpha=alpha, p=pv.p, lhs=lhs, rhs_interior=rhs,
                            boundary_term=boundary, subsolution_min_slack=slack,
                            params=dict(params or {}), panels=spec.panels, order=spec.order,
                            tol=tol)


def power_weight_instance(cfg: PowerWeightConfig, n: int) -> tuple[Expr, WeightSystem]:
    pv = ExponentVec.of(cfg.p, n)
    cfg = PowerWeightConfig(cfg.m, cfg.a, cfg.alpha, pv.p, cfg.regime)
    v: Expr = ONE
    for k, b in enumerate(cfg.beta, start=1):
        v = mul(v, power(Var(k), b))
    W = tuple(power(Var(k), cfg.m) for k in range(1, n + 1))
    H = tuple(power(Var(k), cfg.m - cfg.alpha * pk) for k, pk in enumerate(pv, start=1))
    return v, WeightSystem(W, H, cfg.L)


def exp_weight_instance(cfg: ExpWeightConfig, n: int) -> tuple[Expr, WeightSystem]:
    pv = ExponentVec.of(cfg.p, n)
    cfg = ExpWeightConfig(cfg.m, cfg.alpha, pv.p)
    v: Expr = ONE
    for k in range(1, n + 1):
        v = mul(v, exp(mul(Const(cfg.m), Var(k))))
    W = (ONE,) * n
    H = tuple(power(Var(k), pk * (1.0 - cfg.alpha)) for k, pk in enumerate(pv, start=1))
    return v, WeightSystem(W, H, cfg.L)


# ---------------------------------------------------------------- corollaries

def corollary_38_bound(u: Expr, alpha: float, p, a: float, box: BoxDomain,
                       spec: QuadratureSpec = QuadratureSpec(),
                       regime: str = "mirrored") -> tuple[float, float]:
    """Unweighted form with constant ``|(a-p_k)/p_k|^p_k`` and weight ``x_k^(-alpha p_k)``."""
    pv = ExponentVec.of(p, box.n)
    _, ws = power_weight_instance(PowerWeightConfig(0.0, a, alpha, pv.p, regime), box.n)
    grads, masses = weighted_sides(u, ws, alpha, pv, box, spec)
    return math.fsum(grads), math.fsum(c * m for c, m in zip(ws.L, masses))


def corollary_39_bound(u: Expr, alpha: float, p, box: BoxDomain,
                       spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """``sum int |D_k u|^p_k`` against ``sum (alpha(p_k-1)/p_k)^p_k int |u|^p_k x_k^(-alpha p_k)``."""
    alpha = check_alpha(alpha)
    n = box.n
    pv = ExponentVec.of(p, n)
    W = (ONE,) * n
    H = tuple(power(Var(k), -alpha * pk) for k, pk in enumerate(pv, start=1))
    L = tuple((alpha * (pk - 1.0) / pk) ** pk for pk in pv)
    grads, masses = weighted_sides(u, WeightSystem(W, H, L), alpha, pv, box, spec)
    return math.fsum(grads), math.fsum(c * m for c, m in zip(L, masses))


def _euclid(coords: Sequence[np.ndarray]) -> np.ndarray:
    return np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))


def _grad_sq(u: Expr, grid: TensorGrid, alpha: float) -> np.ndarray:
    return sum(grid.values(conf_deriv(u, k, alpha)) ** 2 for k in range(1, grid.box.n + 1))


def remark_37_bound(u: Expr, alpha: float, box: BoxDomain,
                    spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """Isotropic bound ``int |D u|^2 >= ((n-2)/2)^2 int u^2 / |x|^(2(alpha-1))``, Euclidean ``|x|``."""
    alpha = check_alpha(alpha)
    n = box.n
    if n < 3:
        raise ValueError("requires n ≥ 3")
    grid = TensorGrid(box, alpha, spec)
    lhs = grid.integrate(_grad_sq(u, grid, alpha))
    weight = _euclid(grid.coords) ** (2.0 * (1.0 - alpha))
    rhs = ((n - 2) / 2.0) ** 2 * grid.integrate(weight * grid.values(u) ** 2)
    return lhs, rhs


def hpw_cauchy_schwarz(u: Expr, alpha: float, box: BoxDomain,
                       spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """``int u^2 <= sqrt(int u^2 |x|^(2(1-alpha))) * sqrt(int u^2 |x|^(2(alpha-1)))``."""
    alpha = check_alpha(alpha)
    grid = TensorGrid(box, alpha, spec)
    u2 = grid.values(u) ** 2
    r = _euclid(grid.coords)
    mass = grid.integrate(u2)
    lo = grid.integrate(u2 * r ** (2.0 * (1.0 - alpha)))
    hi = grid.integrate(u2 * r ** (2.0 * (alpha - 1.0)))
    return mass, math.sqrt(lo * hi)


def hpw_check(u: Expr, alpha: float, box: BoxDomain,
              spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """Return ``(product, bound)`` for the uncertainty product; expect ``product >= bound``."""
    alpha = check_alpha(alpha)
    n = box.n
    if n <= 2:
        raise ValueError("requires n > 2")
    grid = TensorGrid(box, alpha, spec)
    u2 = grid.values(u) ** 2
    position = grid.integrate(_euclid(grid.coords) ** (2.0 * (alpha - 1.0)) * u2)
    energy = grid.integrate(_grad_sq(u, grid, alpha))
    mass = grid.integrate(u2)
    return position * energy, ((n - 2) / 2.0) ** 2 * mass ** 2


def hpw_anisotropic_check(u: Expr, alpha: float, p, m: float, box: BoxDomain,
                          spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """Mixed-exponent uncertainty sum; the position weight uses ``x_k`` on axis ``k``."""
    alpha = check_alpha(alpha)
    if not m < 0.0:
        raise ValueError(f"requires m<0 (m={m})")
    pv = ExponentVec.of(p, box.n)
    grid = TensorGrid(box, alpha, spec)
    au = np.abs(grid.values(u))
    grad = np.sqrt(_grad_sq(u, grid, alpha))
    lhs = rhs = 0.0
    for k, (pk, qk) in enumerate(zip(pv, pv.q), start=1):
        position = grid.integrate(grid.coords[k - 1] ** (qk * (alpha - 1.0)) * au ** pk)
        energy = grid.integrate(grad ** pk)
        lhs += position ** (1.0 / qk) * energy ** (1.0 / pk)
        rhs += (pk - 1.0) * abs(m) * grid.integrate(au ** pk)
    return lhs, rhs


# ---------------------------------------------------------------- test functions

def _perturbation(rng: np.random.Generator, n: int, terms: int = 3) -> Expr:
    """Random trig sum normalised so that ``|s| <= 1``."""
    coefs = rng.uniform(-1.0, 1.0, terms)
    coefs /= np.sum(np.abs(coefs))
    s: Expr = Const(0.0)
    for c in coefs:
        phase: Expr = Const(float(rng.uniform(0.0, 2.0 * math.pi)))
        for k in range(1, n + 1):
            phase = phase + mul(Const(float(rng.uniform(0.5, 3.0))), Var(k))
        s = s + mul(Const(float(c)), cos(phase))
    return s


def bump_suite(box: BoxDomain, count: int, seed: int = 0, eps_max: float = 0.3) -> list[Expr]:
    """``prod_k (x_k-a_k)(b_k-x_k) (1 + eps s(x))``: non-negative, zero on the boundary."""
    rng = np.random.default_rng(seed)
    base: Expr = ONE
    for k, (lo, hi) in enumerate(zip(box.lower, box.upper), start=1):
        base = mul(base, mul(Var(k) - Const(lo), Const(hi) - Var(k)))
    out = []
    for _ in range(count):
        eps = float(rng.uniform(0.0, eps_max))
        out.append(mul(base, ONE + mul(Const(eps), _perturbation(rng, box.n))))
    return out


def positive_suite(box: BoxDomain, count: int, seed: int = 0, eps_max: float = 0.3) -> list[Expr]:
    """Strictly positive functions that do not vanish on the boundary."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        e: Expr = ONE + mul(Const(float(rng.uniform(0.0, eps_max))), _perturbation(rng, box.n))
        for k in range(1, box.n + 1):
            e = mul(e, Var(k) + Const(float(rng.uniform(0.0, 1.0))))
        out.append(e)
    return out
