"""Expression trees over the variables x1..xn.

Trees are immutable. They are built through the module-level constructors
(:func:`add`, :func:`mul`, :func:`power`, ...) or the overloaded operators,
which fold constants and merge powers of the same variable so that derived
trees stay small and print readably::

    >>> e = parse("x1^2", 1)
    >>> str(diff(e, 1))
    '2*x1'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg", "Func",
    "FUNCTIONS", "ExprSyntaxError", "DomainError",
    "as_expr", "add", "sub", "mul", "div", "power", "neg", "func",
    "parse", "to_string", "evaluate", "diff", "substitute", "max_var",
]

FUNCTIONS = ("abs", "exp", "log", "sin", "cos")

Number = Union[int, float]


class ExprSyntaxError(ValueError):
    """Raised by :func:`parse`; ``position`` is the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class DomainError(ArithmeticError):
    """An expression was evaluated outside its domain (log of x <= 0, 1/0, ...)."""


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, exponent: Number):
        if isinstance(exponent, Expr):
            raise TypeError("exponents must be real literals")
        return power(self, exponent)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, slots=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: float


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)) and not isinstance(obj, bool):
        return Const(float(obj))
    raise TypeError(f"cannot convert {type(obj).__name__} to Expr")


# ---------------------------------------------------------------------------
# constructors (constant folding and power merging)


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def _flatten_product(e: Expr, coef: float, factors: list, var_pows: dict) -> float:
    if isinstance(e, Mul):
        coef = _flatten_product(e.left, coef, factors, var_pows)
        return _flatten_product(e.right, coef, factors, var_pows)
    if isinstance(e, Const):
        return coef * e.value
    if isinstance(e, Neg):
        return _flatten_product(e.arg, -coef, factors, var_pows)
    if isinstance(e, Var) or (isinstance(e, Pow) and isinstance(e.base, Var)):
        k, q = (e.index, 1.0) if isinstance(e, Var) else (e.base.index, e.exponent)
        if k not in var_pows:
            var_pows[k] = 0.0
            factors.append(k)
        var_pows[k] += q
        return coef
    factors.append(e)
    return coef


def mul(a: Expr, b: Expr) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    factors: list = []
    var_pows: dict = {}
    coef = _flatten_product(a, 1.0, factors, var_pows)
    coef = _flatten_product(b, coef, factors, var_pows)
    if coef == 0.0:
        return ZERO
    built = []
    for f in factors:
        if isinstance(f, int):
            q = var_pows[f]
            if q == 0.0:
                continue
            built.append(Var(f) if q == 1.0 else Pow(Var(f), q))
        else:
            built.append(f)
    if not built:
        return Const(coef)
    if coef == -1.0:
        prod = built[0]
        for f in built[1:]:
            prod = Mul(prod, f)
        return Neg(prod)
    prod = built[0] if coef == 1.0 else Mul(Const(coef), built[0])
    for f in built[1:]:
        prod = Mul(prod, f)
    return prod


def div(a: Expr, b: Expr) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0):
        return ZERO
    return Div(a, b)


def _pow_defined(base: float, q: float) -> bool:
    if base == 0.0:
        return q >= 0.0
    return base > 0.0 or float(q).is_integer()


def power(base: Expr, q: Number) -> Expr:
    q = float(q)
    if not math.isfinite(q):
        raise ValueError("exponent must be finite")
    if q == 0.0:
        return ONE
    if q == 1.0:
        return base
    if isinstance(base, Const) and _pow_defined(base.value, q):
        return Const(base.value ** q)
    if isinstance(base, Pow) and isinstance(base.base, Var):
        # x_k > 0 on the evaluation domain, so (x^r)^q = x^(rq)
        return power(base.base, base.exponent * q)
    return Pow(base, q)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, Mul):
        return mul(Const(-1.0), a)
    return Neg(a)


_FOLD = {
    "abs": (abs, lambda c: True),
    "exp": (math.exp, lambda c: c < 700.0),
    "log": (math.log, lambda c: c > 0.0),
    "sin": (math.sin, lambda c: True),
    "cos": (math.cos, lambda c: True),
}


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(a, Const):
        fn, ok = _FOLD[name]
        if ok(a.value):
            return Const(fn(a.value))
    return Func(name, a)


def abs_(a: Expr) -> Expr:
    return func("abs", a)


def exp(a: Expr) -> Expr:
    return func("exp", a)


def log(a: Expr) -> Expr:
    return func("log", a)


def sin(a: Expr) -> Expr:
    return func("sin", a)


def cos(a: Expr) -> Expr:
    return func("cos", a)


# ---------------------------------------------------------------------------
# printing

_PREC_SUM, _PREC_PRODUCT, _PREC_FACTOR, _PREC_ATOM = 1, 2, 3, 5


def _fmt_number(c: float) -> str:
    if c.is_integer() and abs(c) < 1e15:
        return str(int(c)) if c != 0.0 or math.copysign(1.0, c) > 0 else "-0"
    return repr(c)


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_SUM
    if isinstance(e, (Mul, Div)):
        return _PREC_PRODUCT
    if isinstance(e, Neg) or (isinstance(e, Const) and math.copysign(1.0, e.value) < 0):
        return _PREC_FACTOR
    if isinstance(e, Pow):
        return _PREC_FACTOR + 1
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_string(e)
    return s if _prec(e) >= min_prec else f"({s})"


def to_string(e: Expr) -> str:
    """Render ``e`` in the grammar accepted by :func:`parse`."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Add):
        return f"{_wrap(e.left, _PREC_SUM)}+{_wrap(e.right, _PREC_PRODUCT)}"
    if isinstance(e, Sub):
        return f"{_wrap(e.left, _PREC_SUM)}-{_wrap(e.right, _PREC_PRODUCT)}"
    if isinstance(e, Mul):
        return f"{_wrap(e.left, _PREC_PRODUCT)}*{_wrap(e.right, _PREC_FACTOR)}"
    if isinstance(e, Div):
        return f"{_wrap(e.left, _PREC_PRODUCT)}/{_wrap(e.right, _PREC_FACTOR)}"
    if isinstance(e, Neg):
        return f"-{_wrap(e.arg, _PREC_FACTOR)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{_fmt_number(e.exponent)}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def factor(self) -> Expr:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return neg(self.factor())
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return power(base, self.exponent())
        return base

    def exponent(self) -> float:
        sign = 1.0
        kind, val, pos = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1.0 if val == "-" else 1.0
            kind, val, pos = self.peek()
        if kind != "num":
            raise ExprSyntaxError("expected a numeric exponent", pos)
        self.take()
        return sign * float(val)

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "var":
            k = int(val[1:])
            if not 1 <= k <= self.n:
                raise ExprSyntaxError(f"variable {val} out of range 1..{self.n}", pos)
            return Var(k)
        if kind == "name":
            if val not in FUNCTIONS:
                raise ExprSyntaxError(f"unknown function {val!r}", pos)
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(")")
            return func(val, arg)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {val!r}", pos)


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` into an expression over x1..xn.

    Raises :class:`ExprSyntaxError` with the offending offset on bad input
    or on a variable index outside ``1..n``.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return _Parser(text, n).parse()


# ---------------------------------------------------------------------------
# evaluation


def max_var(e: Expr) -> int:
    """Largest variable index occurring in ``e`` (0 for constants)."""
    stack, best = [e], 0
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            best = max(best, node.index)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, (Neg, Func)):
            stack.append(node.arg)
    return best


_UFUNC = {"abs": np.abs, "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos}


def evaluate(e: Expr, x: Sequence, *, strict: bool = True):
    """Evaluate ``e`` at the point (or broadcastable grid) ``x``.

    ``x[k-1]`` holds the values of ``xk``. With ``strict`` every coordinate
    must lie in the open positive orthant. Domain violations raise
    :class:`DomainError` instead of producing NaN.
    """
    coords = [np.asarray(c, dtype=float) for c in x]
    k = max_var(e)
    if k > len(coords):
        raise ValueError(f"expression uses x{k} but only {len(coords)} coordinates given")
    if strict:
        for i, c in enumerate(coords):
            if np.any(c <= 0.0):
                raise DomainError(f"x{i + 1} must be positive")
    memo: dict[int, np.ndarray] = {}
    with np.errstate(all="ignore"):
        out = _eval(e, coords, memo)
    shape = np.broadcast_shapes(*(c.shape for c in coords)) if coords else ()
    if shape == ():
        return float(out)
    return np.broadcast_to(out, shape)


def _eval(e: Expr, coords, memo):
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(e, Const):
        val = np.float64(e.value)
    elif isinstance(e, Var):
        val = coords[e.index - 1]
    elif isinstance(e, Add):
        val = _eval(e.left, coords, memo) + _eval(e.right, coords, memo)
    elif isinstance(e, Sub):
        val = _eval(e.left, coords, memo) - _eval(e.right, coords, memo)
    elif isinstance(e, Mul):
        val = _eval(e.left, coords, memo) * _eval(e.right, coords, memo)
    elif isinstance(e, Div):
        den = _eval(e.right, coords, memo)
        if np.any(den == 0.0):
            raise DomainError(f"division by zero in {to_string(e)}")
        val = _eval(e.left, coords, memo) / den
    elif isinstance(e, Pow):
        b = _eval(e.base, coords, memo)
        q = e.exponent
        if q < 0.0 and np.any(b == 0.0):
            raise DomainError(f"zero raised to negative power in {to_string(e)}")
        if not float(q).is_integer() and np.any(b < 0.0):
            raise DomainError(f"negative base with fractional exponent in {to_string(e)}")
        val = np.power(b, q)
    elif isinstance(e, Neg):
        val = -_eval(e.arg, coords, memo)
    elif isinstance(e, Func):
        a = _eval(e.arg, coords, memo)
        if e.name == "log" and np.any(a <= 0.0):
            raise DomainError(f"log of non-positive value in {to_string(e)}")
        val = _UFUNC[e.name](a)
    else:
        raise TypeError(f"not an expression: {e!r}")
    memo[key] = val
    return val


# ---------------------------------------------------------------------------
# classical differentiation


def diff(e: Expr, k: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``xk``.

    ``abs(g)`` differentiates to ``g/abs(g) * g'``, which raises
    :class:`DomainError` at zeros of ``g`` when evaluated.
    """
    cache: dict[int, Expr] = {}
    return _diff(e, k, cache)


def _diff(e: Expr, k: int, cache) -> Expr:
    key = id(e)
    if key in cache:
        return cache[key]
    if isinstance(e, Const):
        d = ZERO
    elif isinstance(e, Var):
        d = ONE if e.index == k else ZERO
    elif isinstance(e, Add):
        d = add(_diff(e.left, k, cache), _diff(e.right, k, cache))
    elif isinstance(e, Sub):
        d = sub(_diff(e.left, k, cache), _diff(e.right, k, cache))
    elif isinstance(e, Mul):
        d = add(mul(_diff(e.left, k, cache), e.right), mul(e.left, _diff(e.right, k, cache)))
    elif isinstance(e, Div):
        da, db = _diff(e.left, k, cache), _diff(e.right, k, cache)
        if _is_const(db, 0.0):
            d = div(da, e.right)
        else:
            d = div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))
    elif isinstance(e, Pow):
        db = _diff(e.base, k, cache)
        d = ZERO if _is_const(db, 0.0) else mul(
            mul(Const(e.exponent), power(e.base, e.exponent - 1.0)), db)
    elif isinstance(e, Neg):
        d = neg(_diff(e.arg, k, cache))
    elif isinstance(e, Func):
        g = e.arg
        dg = _diff(g, k, cache)
        if _is_const(dg, 0.0):
            d = ZERO
        elif e.name == "abs":
            d = mul(div(g, e), dg)
        elif e.name == "exp":
            d = mul(e, dg)
        elif e.name == "log":
            d = div(dg, g)
        elif e.name == "sin":
            d = mul(cos(g), dg)
        else:
            d = neg(mul(sin(g), dg))
    else:
        raise TypeError(f"not an expression: {e!r}")
    cache[key] = d
    return d


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace variables ``x_k`` by ``mapping[k]``, rebuilding through the constructors."""
    cache: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in cache:
            return cache[key]
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Var):
            out = mapping.get(node.index, node)
        elif isinstance(node, Add):
            out = add(go(node.left), go(node.right))
        elif isinstance(node, Sub):
            out = sub(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = mul(go(node.left), go(node.right))
        elif isinstance(node, Div):
            out = div(go(node.left), go(node.right))
        elif isinstance(node, Pow):
            out = power(go(node.base), node.exponent)
        elif isinstance(node, Neg):
            out = neg(go(node.arg))
        else:
            out = func(node.name, go(node.arg))
        cache[key] = out
        return out

    return go(e)


def lambdify(e: Expr) -> Callable[[Sequence], np.ndarray]:
    """Return ``f(coords) -> values`` evaluating ``e`` without the positivity check."""
    return lambda coords: evaluate(e, coords, strict=False)
