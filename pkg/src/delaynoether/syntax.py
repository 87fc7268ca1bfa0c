"""Parser and canonical printer for the expression grammar.

Grammar (whitespace-insensitive)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | IDENT | FN '(' expr ')' | '(' expr ')'

Jet variables are spelled ``t tm tp tmm tpp`` and ``u um up du dum dup ddu
ddum ddup d3u ...``; the underscore forms ``u_m``, ``du_p`` are accepted on
input.  ``tau`` and ``pi`` are always known parameters; other parameter
names must be declared by the caller.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable

from .expr import (
    Add, Apply, Const, DEFAULT_BOUNDS, Div, Expr, ExprError, FUNCTIONS, Family,
    JetBounds, JetVar, Mul, Neg, Param, Pow, Var, mul, simplify_basic, split_coeff,
)

__all__ = ["ParseError", "parse", "to_text", "parse_var_name", "BUILTIN_PARAMS"]

BUILTIN_PARAMS = frozenset({"tau", "pi"})


class ParseError(ExprError):
    def __init__(self, message: str, offset: int, text: str = "") -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)
_UVAR = re.compile(r"^(?:d(?P<n>\d+)|(?P<ds>d*))u(?:_?(?P<sh>m+|p+))?$")
_TVAR = re.compile(r"^t(?:_?(?P<sh>m+|p+))?$")


def parse_var_name(name: str) -> JetVar | None:
    m = _TVAR.match(name)
    if m:
        return JetVar(Family.T, _offset(m.group("sh")), 0)
    m = _UVAR.match(name)
    if m:
        order = int(m.group("n")) if m.group("n") is not None else len(m.group("ds"))
        return JetVar(Family.U, _offset(m.group("sh")), order)
    return None


def _offset(sh: str | None) -> int:
    if not sh:
        return 0
    return -len(sh) if sh[0] == "m" else len(sh)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, params: frozenset[str], bounds: JetBounds) -> None:
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.params = params
        self.bounds = bounds

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op: str) -> None:
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val or 'end of input'!r}", pos, self.text)

    def expr(self) -> Expr:
        left = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                right = self.term()
                left = Add((left, right if val == "+" else Neg(right)))
            else:
                return left

    def term(self) -> Expr:
        # a*b*c is kept as one n-ary product: building it pairwise would let the
        # canonical builders distribute 3 over (a + b) in 3*(a + b)*c
        factors = [self.unary()]

        def product() -> Expr:
            if len(factors) == 1:
                return factors[0]
            if isinstance(factors[0], Neg):
                # -(a + b)*c: the sign belongs to the whole product
                return Mul((Const(-1), factors[0].arg, *factors[1:]))
            return Mul(tuple(factors))

        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                right = self.unary()
                if val == "*":
                    factors.append(right)
                else:
                    if isinstance(right, Const) and right.value == 0:
                        raise ParseError("division by the literal 0", pos, self.text)
                    factors = [Div(product(), right)]
            else:
                return product()

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "id":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Apply(val, arg)
            if val in self.params:
                return Param(val)
            jv = parse_var_name(val)
            if jv is not None:
                try:
                    self.bounds.check(jv)
                except ExprError as exc:
                    raise ParseError(str(exc), pos, self.text) from None
                return Var(jv)
            raise ParseError(f"unknown identifier {val!r}", pos, self.text)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos, self.text)


def parse(
    text: str,
    params: Iterable[str] = (),
    *,
    simplify: bool = True,
    bounds: JetBounds = DEFAULT_BOUNDS,
) -> Expr:
    """Parse ``text``; by default the result is in canonical simplified form."""
    p = _Parser(text, BUILTIN_PARAMS | frozenset(params), bounds)
    if p.peek()[0] == "end":
        raise ParseError("empty expression", 0, text)
    e = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", pos, text)
    return simplify_basic(e) if simplify else e


# ---------------------------------------------------------------------------
# printing

_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _paren(text: str, prec: int, need: int) -> str:
    return f"({text})" if prec < need else text


def _fmt_const(v: Fraction) -> tuple[str, int]:
    if v.denominator == 1:
        return (str(v.numerator), _ATOM) if v >= 0 else (f"-{-v.numerator}", _UNARY)
    if v > 0:
        return f"{v.numerator}/{v.denominator}", _MUL
    return f"-{-v.numerator}/{v.denominator}", _MUL


def _is_negative(e: Expr) -> bool:
    if isinstance(e, Const):
        return e.value < 0
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return e.factors[0].value < 0
    return False


def _fmt(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Param):
        return e.name, _ATOM
    if isinstance(e, Var):
        return e.var.name, _ATOM
    if isinstance(e, Apply):
        return f"{e.fn}({_fmt(e.arg)[0]})", _ATOM
    if isinstance(e, Neg):
        s, p = _fmt(e.arg)
        return "-" + _paren(s, p, _POW), _UNARY
    if isinstance(e, Pow):
        bs, bp = _fmt(e.base)
        es, ep = _fmt(e.exp)
        if isinstance(e.exp, Const) and e.exp.value.denominator == 1 and e.exp.value >= 0:
            ex = es
        else:
            ex = f"({es})" if not (ep >= _POW and not es.startswith("-")) else es
        return f"{_paren(bs, bp, _ATOM)}^{ex}", _POW
    if isinstance(e, Div):
        ns, np_ = _fmt(e.num)
        ds, dp = _fmt(e.den)
        return f"{_paren(ns, np_, _MUL)}/{_paren(ds, dp, _POW)}", _MUL
    if isinstance(e, Mul):
        c, core = split_coeff(e)
        rest = core.factors if isinstance(core, Mul) else (core,)
        if len(rest) == 1 and isinstance(rest[0], Div):
            body = _fmt(rest[0])[0]
            num = rest[0].num
            lead = num.factors[0] if isinstance(num, Mul) else num
            # "2*(a + b)*x/y" would reparse with the 2 distributed over the sum
            if c != 1 and isinstance(lead, Add):
                body = f"({body})"
        else:
            body = "*".join(_paren(*_fmt(f), _POW) for f in rest)
        if c == 1:
            return body, _MUL
        if c == -1:
            return "-" + body, _MUL
        cs, _ = _fmt_const(c)
        return f"{cs}*{body}", _MUL
    if isinstance(e, Add):
        parts: list[str] = []
        terms = list(e.terms)
        # lead with a positive term when there is one: "up - u" rather than "-u + up"
        first = next((i for i, t in enumerate(terms) if not _is_negative(t)), 0)
        terms.insert(0, terms.pop(first))
        for i, term in enumerate(terms):
            if i > 0 and _is_negative(term):
                parts.append(" - " + _paren(*_fmt(mul(Const(-1), term)), _MUL))
            elif i > 0:
                parts.append(" + " + _paren(*_fmt(term), _MUL))
            else:
                parts.append(_paren(*_fmt(term), _ADD))
        return "".join(parts), _ADD
    raise TypeError(type(e))  # pragma: no cover


def to_text(e: Expr) -> str:
    """Canonical text; ``parse(to_text(e))`` rebuilds ``e`` when ``e`` is canonical."""
    return _fmt(e)[0]
