"""Exact partial differentiation with respect to a jet variable."""

from __future__ import annotations

from .expr import (
    ONE, ZERO, Add, Apply, Const, Div, Expr, JetVar, Mul, Neg, Param, Pow, Var,
    add, apply_fn, div, mul, neg, power, sub,
)

__all__ = ["diff"]


def diff(e: Expr, v: JetVar) -> Expr:
    """∂e/∂v with every other jet variable held fixed."""
    memo: dict[int, Expr] = {}

    def go(x: Expr) -> Expr:
        if v not in x.free_vars:
            return ZERO
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if isinstance(x, Var):
            r = ONE if x.var == v else ZERO
        elif isinstance(x, Neg):
            r = neg(go(x.arg))
        elif isinstance(x, Add):
            r = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            fs = x.factors
            r = add(*(
                mul(*fs[:i], go(f), *fs[i + 1:])
                for i, f in enumerate(fs)
                if v in f.free_vars
            ))
        elif isinstance(x, Div):
            dn = go(x.num)
            den = x.den
            if isinstance(den, Pow) and isinstance(den.exp, Const):
                # a/b^k keeps the power visible: -k*a*b'/b^(k+1)
                k = den.exp.value
                corr = div(mul(Const(k), x.num, go(den.base)), power(den.base, Const(k + 1)))
            else:
                corr = div(mul(x.num, go(den)), power(den, Const(2)))
            r = sub(div(dn, den), corr)
        elif isinstance(x, Pow):
            db = go(x.base)
            if v not in x.exp.free_vars:
                r = mul(x.exp, power(x.base, add(x.exp, Const(-1))), db)
            else:
                de = go(x.exp)
                r = mul(x, add(mul(de, apply_fn("log", x.base)), div(mul(x.exp, db), x.base)))
        elif isinstance(x, Apply):
            da = go(x.arg)
            if x.fn == "sin":
                r = mul(apply_fn("cos", x.arg), da)
            elif x.fn == "cos":
                r = neg(mul(apply_fn("sin", x.arg), da))
            elif x.fn == "exp":
                r = mul(x, da)
            else:
                r = div(da, x.arg)
        elif isinstance(x, (Const, Param)):
            r = ZERO
        else:  # pragma: no cover
            raise TypeError(type(x))
        memo[id(x)] = r
        return r

    return go(e)
