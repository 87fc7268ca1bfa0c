"""Numeric evaluation of expressions: scalar, exact, vectorised and compiled."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import Add, Apply, Const, Div, Expr, ExprError, JetVar, Mul, Neg, Param, Pow, Var

__all__ = [
    "Assignment", "EvalError", "UnboundError", "DomainError",
    "evaluate", "eval_exact", "evaluate_batch", "lambdify", "var_ident",
]


class EvalError(ExprError):
    pass


class UnboundError(EvalError):
    def __init__(self, what: str) -> None:
        super().__init__(f"unbound {what}")
        self.what = what


class DomainError(EvalError):
    def __init__(self, message: str, subtree: Expr) -> None:
        super().__init__(f"{message} in {subtree}")
        self.subtree = subtree


@dataclass
class Assignment:
    vars: Mapping[JetVar, float] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)

    def param(self, name: str) -> float:
        if name in self.params:
            return self.params[name]
        if name == "pi":
            return math.pi
        raise UnboundError(f"parameter {name!r}")


_FN = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log}


def evaluate(e: Expr, a: Assignment) -> float:
    """IEEE double evaluation; singularities raise DomainError naming the subtree."""
    memo: dict[int, float] = {}

    def go(x: Expr) -> float:
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if isinstance(x, Const):
            r = float(x.value)
        elif isinstance(x, Param):
            r = float(a.param(x.name))
        elif isinstance(x, Var):
            if x.var not in a.vars:
                raise UnboundError(f"variable {x.var.name}")
            r = float(a.vars[x.var])
        elif isinstance(x, Neg):
            r = -go(x.arg)
        elif isinstance(x, Add):
            r = math.fsum(go(t) for t in x.terms)
        elif isinstance(x, Mul):
            r = 1.0
            for f in x.factors:
                r *= go(f)
        elif isinstance(x, Div):
            d = go(x.den)
            if d == 0.0:
                raise DomainError("division by zero", x)
            r = go(x.num) / d
        elif isinstance(x, Pow):
            b, p = go(x.base), go(x.exp)
            if b == 0.0 and p < 0:
                raise DomainError("zero to a negative power", x)
            if b < 0 and p != int(p):
                raise DomainError("negative base to a fractional power", x)
            try:
                r = b ** p
            except OverflowError:
                raise DomainError("overflow", x) from None
        elif isinstance(x, Apply):
            v = go(x.arg)
            if x.fn == "log" and v <= 0:
                raise DomainError("log of a non-positive value", x)
            try:
                r = _FN[x.fn](v)
            except OverflowError:
                raise DomainError("overflow", x) from None
        else:  # pragma: no cover
            raise TypeError(type(x))
        if not math.isfinite(r):
            raise DomainError("non-finite value", x)
        memo[id(x)] = r
        return r

    return go(e)


def eval_exact(e: Expr, vars: Mapping[JetVar, Fraction], params: Mapping[str, Fraction] = {}) -> Fraction:
    """Exact rational evaluation; only defined for rational (polynomial/quotient) trees."""
    memo: dict[int, Fraction] = {}

    def go(x: Expr) -> Fraction:
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if isinstance(x, Const):
            r = x.value
        elif isinstance(x, Param):
            if x.name not in params:
                raise UnboundError(f"parameter {x.name!r}")
            r = Fraction(params[x.name])
        elif isinstance(x, Var):
            if x.var not in vars:
                raise UnboundError(f"variable {x.var.name}")
            r = Fraction(vars[x.var])
        elif isinstance(x, Neg):
            r = -go(x.arg)
        elif isinstance(x, Add):
            r = sum((go(t) for t in x.terms), Fraction(0))
        elif isinstance(x, Mul):
            r = Fraction(1)
            for f in x.factors:
                r *= go(f)
        elif isinstance(x, Div):
            d = go(x.den)
            if d == 0:
                raise DomainError("division by zero", x)
            r = go(x.num) / d
        elif isinstance(x, Pow):
            p = go(x.exp)
            if p.denominator != 1:
                raise EvalError(f"no exact value for fractional power in {x}")
            b = go(x.base)
            if b == 0 and p < 0:
                raise DomainError("zero to a negative power", x)
            r = b ** int(p)
        else:
            raise EvalError(f"no exact value for {x}")
        memo[id(x)] = r
        return r

    return go(e)


_NP_FN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log}


def evaluate_batch(e: Expr, env: Mapping, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised evaluation over ``n`` samples.

    ``env`` maps JetVar and parameter names to arrays (or scalars).
    Returns ``(values, scale, bad)``: ``scale`` is the largest absolute
    value of any evaluated subterm per sample and ``bad`` flags samples
    where some subterm was non-finite or outside its domain.
    """
    memo: dict[int, np.ndarray] = {}
    scale = np.zeros(n)
    bad = np.zeros(n, dtype=bool)

    def lookup(key, label: str) -> np.ndarray:
        if key in env:
            return np.broadcast_to(np.asarray(env[key], dtype=float), (n,))
        if key == "pi":
            return np.full(n, math.pi)
        raise UnboundError(label)

    def go(x: Expr) -> np.ndarray:
        nonlocal scale, bad
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if isinstance(x, Const):
            r = np.full(n, float(x.value))
        elif isinstance(x, Param):
            r = lookup(x.name, f"parameter {x.name!r}")
        elif isinstance(x, Var):
            r = lookup(x.var, f"variable {x.var.name}")
        elif isinstance(x, Neg):
            r = -go(x.arg)
        elif isinstance(x, Add):
            r = go(x.terms[0]).copy()
            for t in x.terms[1:]:
                r = r + go(t)
        elif isinstance(x, Mul):
            r = go(x.factors[0])
            for f in x.factors[1:]:
                r = r * go(f)
        elif isinstance(x, Div):
            d = go(x.den)
            bad |= d == 0
            r = go(x.num) / d
        elif isinstance(x, Pow):
            b, p = go(x.base), go(x.exp)
            bad |= (b < 0) & (p != np.round(p))
            bad |= (b == 0) & (p < 0)
            r = np.power(b, p)
        elif isinstance(x, Apply):
            v = go(x.arg)
            if x.fn == "log":
                bad |= v <= 0
            r = _NP_FN[x.fn](v)
        else:  # pragma: no cover
            raise TypeError(type(x))
        bad |= ~np.isfinite(r)
        scale = np.fmax(scale, np.abs(r))
        memo[id(x)] = r
        return r

    with np.errstate(all="ignore"):
        values = go(e)
    return np.array(values, dtype=float), scale, bad


def var_ident(v: JetVar) -> str:
    off = f"m{-v.offset}" if v.offset < 0 else f"p{v.offset}"
    return f"{v.family.value}_{off}_{v.order}"


def lambdify(e: Expr, args: Sequence[JetVar | str], *, vectorized: bool = False) -> Callable:
    """Compile ``e`` to a Python function of the given jet variables / parameters.

    The generated code uses ``math`` (scalar) or ``numpy`` (vectorized)
    and reuses shared subtrees through temporaries.
    """
    names = {}
    for a in args:
        names[a] = var_ident(a) if isinstance(a, JetVar) else f"p_{a}"
    lib = "np" if vectorized else "math"
    lines: list[str] = []
    temps: dict[int, str] = {}

    def emit(x: Expr) -> str:
        hit = temps.get(id(x))
        if hit is not None:
            return hit
        if isinstance(x, Const):
            return repr(float(x.value))
        if isinstance(x, Param):
            if x.name in names:
                return names[x.name]
            if x.name == "pi":
                return repr(math.pi)
            raise UnboundError(f"parameter {x.name!r}")
        if isinstance(x, Var):
            if x.var not in names:
                raise UnboundError(f"variable {x.var.name}")
            return names[x.var]
        if isinstance(x, Neg):
            code = f"(-{emit(x.arg)})"
        elif isinstance(x, Add):
            code = "(" + " + ".join(emit(t) for t in x.terms) + ")"
        elif isinstance(x, Mul):
            code = "(" + " * ".join(emit(f) for f in x.factors) + ")"
        elif isinstance(x, Div):
            code = f"({emit(x.num)} / {emit(x.den)})"
        elif isinstance(x, Pow):
            if isinstance(x.exp, Const) and x.exp.value.denominator == 1 and abs(x.exp.value) <= 4:
                k = int(x.exp.value)
                b = emit(x.base)
                prod = " * ".join([b] * abs(k))
                code = f"({prod})" if k > 0 else f"(1.0 / ({prod}))"
            else:
                code = f"({emit(x.base)} ** {emit(x.exp)})"
        elif isinstance(x, Apply):
            code = f"{lib}.{x.fn}({emit(x.arg)})"
        else:  # pragma: no cover
            raise TypeError(type(x))
        name = f"_{len(temps)}"
        lines.append(f"    {name} = {code}")
        temps[id(x)] = name
        return name

    result = emit(e)
    src = f"def _f({', '.join(names.values())}):\n" + "\n".join(lines) + f"\n    return {result}\n"
    ns: dict = {"math": math, "np": np}
    exec(compile(src, "<lambdify>", "exec"), ns)
    fn = ns["_f"]
    fn.source = src
    return fn
