"""Best-constant probing: minimise the Hardy quotient over a small family.

``u_theta = B(x) (1 + sum_j theta_j phi_j(x))`` where ``B`` is the product
bump vanishing on the box and ``phi_j`` are cosines in coordinates
rescaled to ``[0, 1]``. Everything is tabulated once on the quadrature
grid, so a quotient evaluation is a few array operations.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .conformable import check_alpha, conf_deriv
from .expr import ONE, Const, Expr, Var, cos, mul
from .hardy import ExpWeightConfig, PowerWeightConfig, exp_weight_instance, power_weight_instance
from .quadrature import BoxDomain, QuadratureSpec, TensorGrid

__all__ = [
    "QuotientProblem", "OptimizerConfig", "NelderMeadResult", "BestConstant",
    "nelder_mead", "quotient", "estimate_best_constant", "nested_estimates",
    "cosine_multi_indices",
]

MAX_BASIS = 8
DENOM_FLOOR = 1e-14


def cosine_multi_indices(n: int, d: int) -> list[tuple[int, ...]]:
    """First ``d`` non-zero frequency vectors ordered by total degree, then lexicographically."""
    out: list[tuple[int, ...]] = []
    total = 1
    while len(out) < d:
        level = [idx for idx in itertools.product(range(total + 1), repeat=n) if sum(idx) == total]
        out.extend(sorted(level))
        total += 1
    return out[:d]


class QuotientProblem:
    """Tabulated quotient for one theorem instance and a ``d``-term family."""

    def __init__(self, instance: PowerWeightConfig | ExpWeightConfig, n: int, box: BoxDomain,
                 d: int = 4, bound: float = 1.0, spec: QuadratureSpec = QuadratureSpec(),
                 check_samples: int = 20):
        if box.n != n:
            raise ValueError(f"box has {box.n} axes, expected {n}")
        if not 0 <= d <= MAX_BASIS:
            raise ValueError(f"basis size d must lie in [0, {MAX_BASIS}], got {d}")
        if not (math.isfinite(bound) and bound > 0.0):
            raise ValueError(f"parameter bound must be positive and finite, got {bound}")
        if isinstance(instance, PowerWeightConfig):
            v, ws = power_weight_instance(instance, n)
        elif isinstance(instance, ExpWeightConfig):
            v, ws = exp_weight_instance(instance, n)
        else:
            raise TypeError("instance must be a PowerWeightConfig or ExpWeightConfig")
        ps = set(instance.p)
        if len(ps) != 1:
            raise ValueError("the quotient needs a uniform exponent p")
        self.instance = instance
        self.alpha = check_alpha(instance.alpha)
        self.p = ps.pop()
        self.L = ws.L[0]
        self.box, self.n, self.d, self.bound, self.spec = box, n, d, float(bound), spec
        self.frequencies = cosine_multi_indices(n, d)

        grid = TensorGrid(box, self.alpha, spec)
        self._weights = grid.weights
        base: Expr = ONE
        for k, (lo, hi) in enumerate(zip(box.lower, box.upper), start=1):
            base = mul(base, mul(Var(k) - Const(lo), Const(hi) - Var(k)))
        self._B = grid.values(base)
        self._dB = [grid.values(conf_deriv(base, k, self.alpha)) for k in range(1, n + 1)]
        self._W = [grid.values(w) for w in ws.W]
        self._H = [grid.values(h) for h in ws.H]
        self._phi, self._dphi = self._basis(grid.coords)
        sample = [np.linspace(lo, hi, check_samples).reshape([-1 if i == j else 1 for i in range(n)])
                  for j, (lo, hi) in enumerate(zip(box.lower, box.upper))]
        self._phi_check, _ = self._basis(sample, derivatives=False)
        self._base = base

    def member_expr(self, theta: Sequence[float]) -> Expr:
        """``u_theta`` as an expression tree (for cross-checks and reports)."""
        g: Expr = ONE
        for c, freq in zip(theta, self.frequencies):
            term: Expr = Const(float(c))
            for k, f in enumerate(freq, start=1):
                if f:
                    lo, hi = self.box.lower[k - 1], self.box.upper[k - 1]
                    arg = mul(Const(math.pi * f / (hi - lo)), Var(k) - Const(lo))
                    term = mul(term, cos(arg))
            g = g + term
        return mul(self._base, g)

    def _basis(self, coords: Sequence[np.ndarray], derivatives: bool = True):
        lo, hi = self.box.lower, self.box.upper
        t = [(np.asarray(c) - a) / (b - a) for c, a, b in zip(coords, lo, hi)]
        phis, dphis = [], []
        for freq in self.frequencies:
            factors = [np.cos(math.pi * f * tk) for f, tk in zip(freq, t)]
            phis.append(_product(factors))
            if derivatives:
                dk = []
                for k, (f, tk, c) in enumerate(zip(freq, t, coords)):
                    # conformable derivative: x^(1-alpha) d/dx
                    slope = -math.pi * f / (hi[k] - lo[k]) * np.sin(math.pi * f * tk)
                    scale = np.asarray(c, dtype=float) ** (1.0 - self.alpha)
                    dk.append(_product(factors[:k] + [slope * scale] + factors[k + 1:]))
                dphis.append(dk)
        return phis, dphis

    def feasible(self, theta: Sequence[float]) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,) or not np.all(np.isfinite(theta)):
            return False
        if np.any(np.abs(theta) > self.bound):
            return False
        factor_q = 1.0 + sum(c * ph for c, ph in zip(theta, self._phi))
        factor_c = 1.0 + sum(c * ph for c, ph in zip(theta, self._phi_check))
        return bool(np.all(np.asarray(factor_q) >= 0.0) and np.all(np.asarray(factor_c) >= 0.0))

    def sides(self, theta: Sequence[float]) -> tuple[float, float]:
        """Numerator and denominator of the quotient at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        g = 1.0 + sum(c * ph for c, ph in zip(theta, self._phi))
        u = self._B * g
        num = den = 0.0
        for k in range(self.n):
            dg = sum(c * dph[k] for c, dph in zip(theta, self._dphi))
            du = self._dB[k] * g + self._B * dg
            num += float(np.sum(self._W[k] * np.abs(du) ** self.p * self._weights))
            den += float(np.sum(self._H[k] * np.abs(u) ** self.p * self._weights))
        return num, den


def _product(factors):
    out = factors[0]
    for f in factors[1:]:
        out = out * f
    return out


def quotient(problem: QuotientProblem, theta: Sequence[float] = ()) -> float:
    """Weighted energy over weighted mass; ``+inf`` for an infeasible ``theta``."""
    theta = np.zeros(problem.d) if len(theta) == 0 and problem.d else np.asarray(theta, dtype=float)
    if not problem.feasible(theta):
        return math.inf
    num, den = problem.sides(theta)
    if not den > DENOM_FLOOR:
        return math.inf
    return num / den


@dataclass(frozen=True)
class OptimizerConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    init_scale: float = 0.1
    restarts: int = 5
    max_evals: int = 2000
    xtol: float = 1e-8
    ftol: float = 1e-12
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if not self.reflection > 0.0:
            raise ValueError("reflection coefficient must be > 0")
        if not self.expansion > max(1.0, self.reflection):
            raise ValueError("expansion coefficient must exceed 1 and the reflection coefficient")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction coefficient must lie in (0, 1)")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink coefficient must lie in (0, 1)")
        if not self.init_scale > 0.0:
            raise ValueError("init_scale must be > 0")
        if self.restarts < 3:
            raise ValueError("at least 3 restarts are required")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")


class NelderMeadResult(NamedTuple):
    x: np.ndarray
    fun: float
    evals: int
    iterations: int


def nelder_mead(f: Callable[[np.ndarray], float], x0: Sequence[float],
                cfg: OptimizerConfig = OptimizerConfig()) -> NelderMeadResult:
    """Plain Nelder-Mead with configurable coefficients.

    ``f`` may return ``+inf`` as a penalty. The result is never worse than
    ``f(x0)``, since ``x0`` is a vertex of the initial simplex.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        return float(f(x))

    simplex = [x0.copy()]
    for i in range(dim):
        y = x0.copy()
        y[i] += cfg.init_scale
        simplex.append(y)
    values = [call(x) for x in simplex]
    it = 0
    while evals < cfg.max_evals:
        order = sorted(range(dim + 1), key=lambda i: values[i])
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        best, worst = values[0], values[-1]
        diameter = max(float(np.max(np.abs(x - simplex[0]))) for x in simplex[1:]) if dim else 0.0
        spread = worst - best if math.isfinite(worst) else math.inf
        if dim == 0 or (diameter <= cfg.xtol and spread <= cfg.ftol):
            break
        it += 1
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + cfg.reflection * (centroid - simplex[-1])
        fr = call(xr)
        if fr < best:
            xe = centroid + cfg.expansion * (xr - centroid)
            fe = call(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < worst:
            xc = centroid + cfg.contraction * (xr - centroid)
            fc = call(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + cfg.contraction * (simplex[-1] - centroid)
            fc = call(xc)
            if fc < worst:
                simplex[-1], values[-1] = xc, fc
                continue
        for i in range(1, dim + 1):
            simplex[i] = simplex[0] + cfg.shrink * (simplex[i] - simplex[0])
            values[i] = call(simplex[i])
    i = int(np.argmin(values))
    return NelderMeadResult(simplex[i], values[i], evals, it)


class BestConstant(NamedTuple):
    q_star: float
    theta: tuple[float, ...]
    L: float
    gap: float
    restart_values: tuple[float, ...]


def _threads(cfg: OptimizerConfig) -> int:
    if cfg.threads is not None:
        return max(1, cfg.threads)
    env = os.environ.get("CONFCALC_THREADS")
    return max(1, int(env)) if env else 1


def estimate_best_constant(problem: QuotientProblem, cfg: OptimizerConfig = OptimizerConfig(),
                           warm_start: Sequence[float] | None = None) -> BestConstant:
    """Minimise the quotient from ``cfg.restarts`` seeded starting points.

    Restart 0 starts at ``warm_start`` (zero-padded) or at ``theta = 0``;
    the others are drawn from the seeded generator before any run starts,
    so the outcome does not depend on thread scheduling.
    """
    d = problem.d
    if d == 0:
        q = quotient(problem, ())
        if not math.isfinite(q):
            raise ValueError("baseline function is infeasible")
        return BestConstant(q, (), problem.L, q - problem.L, (q,))
    rng = np.random.default_rng(cfg.seed)
    start0 = np.zeros(d)
    if warm_start is not None:
        ws = np.asarray(warm_start, dtype=float)[:d]
        start0[: ws.size] = ws
    starts = [start0] + [rng.uniform(-1.0, 1.0, d) * (0.5 * problem.bound / d)
                         for _ in range(cfg.restarts - 1)]

    def run(x0):
        return nelder_mead(lambda th: quotient(problem, th), x0, cfg)

    workers = min(_threads(cfg), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(x0) for x0 in starts]
    values = tuple(r.fun for r in results)
    if not any(math.isfinite(v) for v in values):
        raise ValueError("every restart stayed in the infeasible region")
    best = results[int(np.argmin(values))]
    return BestConstant(best.fun, tuple(float(t) for t in best.x), problem.L,
                        best.fun - problem.L, values)


def nested_estimates(make_problem: Callable[[int], QuotientProblem], dims: Sequence[int],
                     cfg: OptimizerConfig = OptimizerConfig()) -> list[BestConstant]:
    """Run growing bases, each warm-started from the previous optimum."""
    out: list[BestConstant] = []
    prev: tuple[float, ...] = ()
    for d in dims:
        res = estimate_best_constant(make_problem(d), cfg, warm_start=prev)
        out.append(res)
        prev = res.theta
    return out
