"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a verification fails,
2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .conformable import (
    ExponentVec, chain_rule_residual, compose_orders, conf_deriv, mixed_partials_residual,
)
from .expr import DomainError, Expr, ExprSyntaxError, evaluate, max_var, parse, to_string
from .hardy import (
    ExpWeightConfig, InequalityReport, PowerWeightConfig, SubsolutionError, bump_suite,
    exp_weight_instance, hardy_general, hpw_anisotropic_check, hpw_check, positive_suite,
    power_weight_instance, remark_37_bound,
)
from .identities import (
    PiconePair, gauss_mean_value_residual, green_first_terms, green_second_terms,
    picone_L, picone_R,
)
from .optimize import OptimizerConfig, QuotientProblem, estimate_best_constant
from .quadrature import (
    BoxDomain, QuadratureSpec, divergence_residual, fundamental_theorem_residuals,
    integration_by_parts_residual,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

CHECK_TOLERANCES = {
    "picone": 1e-9, "green1": 1e-7, "green2": 1e-7, "divergence": 1e-7, "parts": 1e-8,
    "ftc": 1e-8, "clairaut": 1e-9, "chain": 1e-9, "compose": 1e-12, "gauss": 1e-9,
}
HARDY_TOL = 1e-7
CONSTANT_TOL = 1e-6
MAX_DIM = 16  # largest variable index accepted in expressions


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- output

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return "%.17g" % x


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float at 17 significant digits; key order is preserved."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _flatten(obj: Any, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, (list, tuple)) and all(not isinstance(v, (dict, list, tuple)) for v in obj):
        out[prefix] = ";".join(_cell(v) for v in obj)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}.{i}"))
    else:
        out[prefix] = obj
    return out


def _cell(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else "%.17g" % v
    return str(v)


def to_csv(rows: Sequence[dict[str, Any]]) -> str:
    flat = [_flatten(r) for r in rows]
    columns: list[str] = []
    for r in flat:
        columns.extend(k for k in r if k not in columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in flat:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _manifest(args: argparse.Namespace) -> dict[str, Any]:
    skip = {"func", "out", "command"}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {
        "command": args.command,
        "params": params,
        "seed": args.seed,
        "quadrature": {"panels": args.panels, "order": args.order},
        "version": __version__,
        "timestamp": _timestamp(),
    }


# ---------------------------------------------------------------- parsing helpers

def parse_box(text: str, n: int | None = None) -> BoxDomain:
    """``"a:b,c:d"``; one interval is repeated for every axis when ``n`` is given."""
    try:
        pairs = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"bad box {text!r}; expected a:b[,c:d...]") from None
    if any(len(p) != 2 for p in pairs):
        raise UsageError(f"bad box {text!r}; expected a:b[,c:d...]")
    if n is not None and len(pairs) == 1:
        pairs = pairs * n
    if n is not None and len(pairs) != n:
        raise UsageError(f"box has {len(pairs)} intervals, expected {n}")
    return BoxDomain(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _spec(args) -> QuadratureSpec:
    return QuadratureSpec(panels=args.panels, order=args.order)


def _threads() -> int:
    env = os.environ.get("CONFCALC_THREADS")
    if not env:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        raise UsageError(f"CONFCALC_THREADS must be an integer, got {env!r}") from None


def _parallel_map(fn: Callable, items: Sequence) -> list:
    workers = min(_threads(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _dims(*exprs: Expr, at: Sequence[float] = ()) -> int:
    return max([len(at), 1] + [max_var(e) for e in exprs])


# ---------------------------------------------------------------- commands

def cmd_deriv(args) -> tuple[dict, int]:
    at = _floats(args.at) if args.at else ()
    n = max(_dims(at=at), args.var)
    e = parse(args.expr, MAX_DIM)
    n = max(n, max_var(e))
    if not at:
        at = (1.0,) * n
    elif len(at) == 1:
        at = at * n
    if len(at) != n:
        raise UsageError(f"--at has {len(at)} coordinates, expression needs {n}")
    d = conf_deriv(e, args.var, args.alpha)
    value = evaluate(d, at)
    return {"expr": to_string(e), "var": args.var, "alpha": args.alpha, "at": list(at),
            "symbolic": to_string(d), "value": value, "pass": True}, EXIT_OK


def _check_picone(args, tol):
    u, v = parse(args.u, MAX_DIM), parse(args.v, MAX_DIM)
    n = _dims(u, v)
    box = parse_box(args.box, n)
    pair = PiconePair(u, v)
    rng = np.random.default_rng(args.seed)
    worst_rel, min_l, min_a = 0.0, math.inf, math.inf
    for _ in range(args.points):
        pt = tuple(float(rng.uniform(lo, hi)) for lo, hi in zip(box.lower, box.upper))
        r = picone_R(pair, args.alpha, _floats(args.p), pt)
        split = picone_L(pair, args.alpha, _floats(args.p), pt)
        worst_rel = max(worst_rel, abs(r - split.value) / (1.0 + abs(split.value)))
        min_l = min(min_l, split.value)
        min_a = min(min_a, split.a1, split.a2)
    ok = worst_rel <= tol and min_l >= -1e-12 and min_a >= -1e-12
    return {"residual": worst_rel, "min_L": min_l, "min_A": min_a, "points": args.points}, ok


def _check_green(args, tol, which):
    u, v = parse(args.u, MAX_DIM), parse(args.v, MAX_DIM)
    box = parse_box(args.box, _dims(u, v))
    terms = green_first_terms if which == 1 else green_second_terms
    vol, flux = terms(u, v, box, args.alpha, _spec(args))
    res = abs(vol - flux)
    return {"volume": vol, "flux": flux, "residual": res}, res <= tol * (1.0 + abs(flux))


def _check_divergence(args, tol):
    fields = [parse(f, MAX_DIM) for f in args.field]
    n = len(fields)
    box = parse_box(args.box, n)
    res, flux = divergence_residual(fields, box, args.alpha, _spec(args))
    return {"flux": flux, "residual": res}, res <= tol * (1.0 + abs(flux))


def _check_parts(args, tol):
    f, g = parse(args.f, 1), parse(args.g, 1)
    res = integration_by_parts_residual(f, g, args.a, args.b, args.alpha, _spec(args))
    return {"residual": res}, res <= tol


def _check_ftc(args, tol):
    f = parse(args.f, 1)
    r1, r2 = fundamental_theorem_residuals(f, args.a, args.t, args.alpha, _spec(args),
                                           numeric=args.numeric)
    return {"r1": r1, "r2": r2, "residual": max(r1, r2)}, max(r1, r2) <= tol


def _check_clairaut(args, tol):
    f = parse(args.f, MAX_DIM)
    at = _floats(args.at)
    if len(at) < 2:
        raise UsageError("clairaut needs a point with at least two coordinates")
    res = mixed_partials_residual(f, args.alpha, args.beta, at)
    return {"residual": res}, res <= tol


def _check_chain(args, tol):
    outer, inner = parse(args.outer, 1), parse(args.inner, MAX_DIM)
    at = _floats(args.at)
    res = chain_rule_residual(outer, inner, args.var, args.alpha, at)
    return {"residual": res}, res <= tol


def _check_compose(args, tol):
    f = parse(args.f, 1)
    lhs, rhs = compose_orders(f, args.alpha, args.beta, _floats(args.at))
    diff = abs(lhs - rhs)
    composable = diff <= tol
    # A non-zero difference is the expected witness, not a failure.
    return {"lhs": lhs, "rhs": rhs, "difference": diff,
            "status": "composable" if composable else "not-composable"}, True


def _check_gauss(args, tol):
    u = parse(args.u, MAX_DIM)
    box = parse_box(args.box, _dims(u))
    res = gauss_mean_value_residual(u, box, args.alpha, _spec(args))
    return {"residual": res}, res <= tol


CHECKS = {
    "picone": _check_picone,
    "green1": lambda a, t: _check_green(a, t, 1),
    "green2": lambda a, t: _check_green(a, t, 2),
    "divergence": _check_divergence,
    "parts": _check_parts,
    "ftc": _check_ftc,
    "clairaut": _check_clairaut,
    "chain": _check_chain,
    "compose": _check_compose,
    "gauss": _check_gauss,
}


def cmd_check(args) -> tuple[dict, int]:
    tol = args.tol if args.tol is not None else CHECK_TOLERANCES[args.identity]
    result, ok = CHECKS[args.identity](args, tol)
    out = {"identity": args.identity, "tolerance": tol}
    out.update(result)
    out["pass"] = bool(ok)
    return out, EXIT_OK if ok else EXIT_FAIL


def _hardy_instance(args, n: int):
    p = ExponentVec.of(_floats(args.p), n).p
    th = args.theorem
    if th in ("3.2", "3.3", "3.4", "3.5"):
        m = {"3.4": 0.0, "3.5": args.alpha}.get(th, args.m)
        if m is None or args.a is None:
            raise UsageError(f"theorem {th} needs --a" + ("" if th in ("3.4", "3.5") else " and --m"))
        cfg = PowerWeightConfig(m, args.a, args.alpha, p, args.regime)
        v, ws = power_weight_instance(cfg, n)
        return v, ws, p, {"m": m, "a": args.a, "regime": args.regime, "L": list(cfg.L)}
    if th == "3.7":
        if n < 3:
            raise UsageError("theorem 3.7 requires n ≥ 3")
        m = -(n - 2) / 2.0
        p = (2.0,) * n
    else:
        m = args.m
        if m is None:
            raise UsageError("theorem 3.6 needs --m")
    cfg = ExpWeightConfig(m, args.alpha, p)
    v, ws = exp_weight_instance(cfg, n)
    return v, ws, p, {"m": m, "L": list(cfg.L)}


def cmd_hardy(args) -> tuple[dict, int]:
    th = args.theorem
    n = args.n
    box = parse_box(args.box, n)
    spec = _spec(args)
    tol = args.tol if args.tol is not None else HARDY_TOL
    suite_fn = positive_suite if (th == "3.2" or args.boundary) else bump_suite
    suite = suite_fn(box, args.suite, seed=args.seed)

    if th in ("hpw", "hpw-aniso"):
        if th == "hpw":
            def one(u):
                prod, bound = hpw_check(u, args.alpha, box, spec)
                return InequalityReport("hpw", args.alpha, (2.0,) * n, prod, bound, 0.0,
                                        panels=spec.panels, order=spec.order, tol=tol)
        else:
            if args.m is None:
                raise UsageError("hpw-aniso needs --m")
            p = ExponentVec.of(_floats(args.p), n).p

            def one(u):
                lhs, rhs = hpw_anisotropic_check(u, args.alpha, p, args.m, box, spec)
                return InequalityReport("hpw-aniso", args.alpha, p, lhs, rhs, 0.0,
                                        params={"m": args.m}, panels=spec.panels,
                                        order=spec.order, tol=tol)
    else:
        v, ws, p, params = _hardy_instance(args, n)

        def one(u):
            return hardy_general(u, v, ws, args.alpha, p, box, spec, theorem=th, params=params,
                                 require_subsolution=not args.no_subsolution_check, tol=tol)

    reports = _parallel_map(one, suite)
    rows = [r.to_dict() for r in reports]
    extra: dict[str, Any] = {}
    if th == "3.7":
        printed = [remark_37_bound(u, args.alpha, box, spec) for u in suite]
        extra["isotropic_printed_form"] = [
            {"lhs": l, "rhs": r, "pass": l - r >= -tol * (1.0 + abs(l))} for l, r in printed]
    ok = all(r.passed for r in reports) and all(e["pass"] for e in extra.get("isotropic_printed_form", []))
    out = {"theorem": th, "count": len(rows), "pass": ok, "reports": rows}
    out.update(extra)
    return out, EXIT_OK if ok else EXIT_FAIL


def cmd_constant(args) -> tuple[dict, int]:
    n = args.n
    box = parse_box(args.box, n)
    p = ExponentVec.of(_floats(args.p), n).p
    if args.theorem == "3.3":
        if args.a is None or args.m is None:
            raise UsageError("theorem 3.3 needs --a and --m")
        inst = PowerWeightConfig(args.m, args.a, args.alpha, p, args.regime)
    else:
        if args.m is None:
            raise UsageError("theorem 3.6 needs --m")
        inst = ExpWeightConfig(args.m, args.alpha, p)
    problem = QuotientProblem(inst, n, box, d=args.basis, bound=args.bound, spec=_spec(args))
    cfg = OptimizerConfig(restarts=args.restarts, max_evals=args.max_evals, seed=args.seed,
                          threads=_threads())
    res = estimate_best_constant(problem, cfg)
    tol = args.tol if args.tol is not None else CONSTANT_TOL
    ok = res.q_star >= res.L - tol
    return {"theorem": args.theorem, "L": res.L, "q_star": res.q_star, "gap": res.gap,
            "theta": list(res.theta), "restart_values": list(res.restart_values),
            "pass": ok}, EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="also write the report to this .json or .csv file")
    common.add_argument("--tol", type=float, default=None, help="override the pass tolerance")
    common.add_argument("--panels", type=int, default=8)
    common.add_argument("--order", type=int, default=10)
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="confcalc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"confcalc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("deriv", parents=[common], help="symbolic conformable derivative")
    d.add_argument("--expr", required=True)
    d.add_argument("--var", type=int, default=1)
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("--at", default=None, help="comma-separated point (default: all ones)")
    d.set_defaults(func=cmd_deriv)

    c = sub.add_parser("check", parents=[common], help="verify one identity")
    c.add_argument("identity", choices=sorted(CHECKS))
    c.add_argument("--alpha", type=float, default=0.5)
    c.add_argument("--beta", type=float, default=0.5)
    c.add_argument("--p", default="2")
    c.add_argument("--u", default="x1")
    c.add_argument("--v", default="x1^0.5")
    c.add_argument("--f", default="x1")
    c.add_argument("--g", default="x1")
    c.add_argument("--outer", default="x1^2")
    c.add_argument("--inner", default="x1")
    c.add_argument("--field", action="append", default=None)
    c.add_argument("--var", type=int, default=1)
    c.add_argument("--a", type=float, default=1.0)
    c.add_argument("--b", type=float, default=2.0)
    c.add_argument("--t", type=float, default=2.0)
    c.add_argument("--at", default="1")
    c.add_argument("--box", default="0.5:2")
    c.add_argument("--points", type=int, default=200)
    c.add_argument("--numeric", action="store_true", help="ftc: use the limit quotient for r1")
    c.set_defaults(func=cmd_check)

    h = sub.add_parser("hardy", parents=[common], help="run a Hardy or uncertainty suite")
    h.add_argument("theorem", choices=["3.2", "3.3", "3.4", "3.5", "3.6", "3.7", "hpw", "hpw-aniso"])
    h.add_argument("--n", type=int, default=1)
    h.add_argument("--alpha", type=float, default=0.5)
    h.add_argument("--p", default="2")
    h.add_argument("--a", type=float, default=None)
    h.add_argument("--m", type=float, default=None)
    h.add_argument("--regime", choices=["standard", "mirrored"], default="standard")
    h.add_argument("--box", default="0.5:2")
    h.add_argument("--suite", type=int, default=50)
    h.add_argument("--boundary", action="store_true",
                   help="use test functions that do not vanish on the boundary")
    h.add_argument("--no-subsolution-check", action="store_true",
                   help="record the subsolution slack instead of aborting on a violation")
    h.set_defaults(func=cmd_hardy)

    k = sub.add_parser("constant", parents=[common], help="estimate the best constant")
    k.add_argument("theorem", choices=["3.3", "3.6"])
    k.add_argument("--n", type=int, default=1)
    k.add_argument("--alpha", type=float, default=0.5)
    k.add_argument("--p", default="2")
    k.add_argument("--a", type=float, default=None)
    k.add_argument("--m", type=float, default=None)
    k.add_argument("--regime", choices=["standard", "mirrored"], default="standard")
    k.add_argument("--box", default="0.5:2")
    k.add_argument("--basis", type=int, default=4)
    k.add_argument("--bound", type=float, default=1.0)
    k.add_argument("--restarts", type=int, default=5)
    k.add_argument("--max-evals", type=int, default=2000)
    k.set_defaults(func=cmd_constant)
    return parser


def _write(path: str, report: dict) -> None:
    if path.lower().endswith(".csv"):
        rows = report["result"].get("reports") or [report["result"]]
        text = to_csv(rows)
    else:
        text = dumps(report) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "check" and args.identity == "divergence" and not args.field:
        args.field = ["x1"]
    try:
        result, code = args.func(args)
    except SubsolutionError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, ExprSyntaxError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {"manifest": _manifest(args), "result": result}
    sys.stdout.write(dumps(report) + "\n")
    if args.out:
        try:
            _write(args.out, report)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
