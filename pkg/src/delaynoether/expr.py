"""Immutable expression trees over delay-jet variables.

Equality and hashing are structural; the hash, free-variable set and
canonical text are cached on each node.  The lower-case builders
(`add`, `mul`, `div`, `power`, `apply_fn`) apply the light canonical
simplification used throughout the package; the node classes themselves
build raw trees (the parser uses them when asked not to simplify).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Union

__all__ = [
    "Family", "JetVar", "JetBounds", "DEFAULT_BOUNDS",
    "ExprError", "BoundsError",
    "Expr", "Const", "Param", "Var", "Neg", "Add", "Mul", "Div", "Pow", "Apply",
    "FUNCTIONS", "ZERO", "ONE",
    "const", "param", "var", "add", "mul", "neg", "sub", "div", "power", "apply_fn",
    "as_expr", "simplify_basic", "substitute", "map_vars", "expand",
    "T", "TM", "TP", "U", "UM", "UP", "DU", "DUM", "DUP", "DDU", "DDUM", "DDUP",
]


class ExprError(Exception):
    """Base class for expression-level failures."""


class BoundsError(ExprError):
    """A jet variable falls outside the configured offset/order bounds."""


class Family(enum.Enum):
    U = "u"
    T = "t"


@dataclass(frozen=True)
class JetVar:
    """Jet coordinate: family, shift offset and derivative order.

    ``JetVar(Family.U, -1, 1)`` is the delayed velocity (``dum``).
    """

    family: Family
    offset: int = 0
    order: int = 0

    def __post_init__(self) -> None:
        if self.order < 0:
            raise BoundsError(f"negative derivative order {self.order}")
        if self.family is Family.T and self.order != 0:
            raise BoundsError("t-family variables carry no derivative order")

    def shifted(self, k: int) -> "JetVar":
        return JetVar(self.family, self.offset + k, self.order)

    def raised(self, by: int = 1) -> "JetVar":
        return JetVar(self.family, self.offset, self.order + by)

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (0 if self.family is Family.T else 1, self.order, self.offset)

    @property
    def name(self) -> str:
        suffix = {0: "", -1: "m", 1: "p"}.get(self.offset)
        if suffix is None:
            suffix = ("m" if self.offset < 0 else "p") * abs(self.offset)
        if self.family is Family.T:
            return "t" + suffix
        prefix = {0: "", 1: "d", 2: "dd"}.get(self.order, f"d{self.order}")
        return prefix + "u" + suffix

    def __repr__(self) -> str:
        return f"JetVar({self.name})"


@dataclass(frozen=True)
class JetBounds:
    max_offset: int = 2
    max_order: int = 4

    def check(self, v: JetVar) -> JetVar:
        if abs(v.offset) > self.max_offset:
            raise BoundsError(f"{v.name}: |offset| {abs(v.offset)} exceeds {self.max_offset}")
        if v.order > self.max_order:
            raise BoundsError(f"{v.name}: order {v.order} exceeds {self.max_order}")
        return v


DEFAULT_BOUNDS = JetBounds()

FUNCTIONS = ("sin", "cos", "exp", "log")

Number = Union[int, Fraction]


class Expr:
    """Base node. Subclasses define ``_key``; children live in ``args``."""

    __slots__ = ("_hash", "_vars", "_params", "_text", "__weakref__")

    def _init_cache(self) -> None:
        self._hash = hash((type(self).__name__, self._key()))
        self._vars = None
        self._params = None
        self._text = None

    def _key(self) -> tuple:
        raise NotImplementedError

    @property
    def args(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return self._hash == other._hash and self._key() == other._key()

    def __ne__(self, other: object) -> bool:
        return not self == other

    @property
    def free_vars(self) -> frozenset[JetVar]:
        if self._vars is None:
            out: set[JetVar] = set()
            for a in self.args:
                out |= a.free_vars
            self._vars = frozenset(out)
        return self._vars

    @property
    def free_params(self) -> frozenset[str]:
        if self._params is None:
            out: set[str] = set()
            for a in self.args:
                out |= a.free_params
            self._params = frozenset(out)
        return self._params

    def sorted_vars(self) -> list[JetVar]:
        return sorted(self.free_vars, key=lambda v: v.sort_key)

    def offsets(self) -> list[int]:
        return sorted({v.offset for v in self.free_vars})

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0

    def __str__(self) -> str:
        if self._text is None:
            from .syntax import to_text

            self._text = to_text(self)
        return self._text

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{self}>"

    # arithmetic sugar, always through the simplifying builders
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

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number) -> None:
        self.value = Fraction(value)
        self._init_cache()

    def _key(self) -> tuple:
        return (self.value,)

    @property
    def free_vars(self) -> frozenset[JetVar]:
        return frozenset()

    @property
    def free_params(self) -> frozenset[str]:
        return frozenset()


class Param(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str) -> None:
        self.name = name
        self._init_cache()

    def _key(self) -> tuple:
        return (self.name,)

    @property
    def free_vars(self) -> frozenset[JetVar]:
        return frozenset()

    @property
    def free_params(self) -> frozenset[str]:
        return frozenset((self.name,))


class Var(Expr):
    __slots__ = ("var",)

    def __init__(self, v: JetVar) -> None:
        self.var = v
        self._init_cache()

    def _key(self) -> tuple:
        return (self.var,)

    @property
    def free_vars(self) -> frozenset[JetVar]:
        return frozenset((self.var,))

    @property
    def free_params(self) -> frozenset[str]:
        return frozenset()


class Neg(Expr):
    """Raw unary minus; the builders rewrite it as ``-1 * x``."""

    __slots__ = ("arg",)

    def __init__(self, arg: Expr) -> None:
        self.arg = arg
        self._init_cache()

    def _key(self) -> tuple:
        return (self.arg,)

    @property
    def args(self) -> tuple[Expr, ...]:
        return (self.arg,)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[Expr]) -> None:
        self.terms = tuple(terms)
        self._init_cache()

    def _key(self) -> tuple:
        return self.terms

    @property
    def args(self) -> tuple[Expr, ...]:
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: Iterable[Expr]) -> None:
        self.factors = tuple(factors)
        self._init_cache()

    def _key(self) -> tuple:
        return self.factors

    @property
    def args(self) -> tuple[Expr, ...]:
        return self.factors


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr) -> None:
        if isinstance(den, Const) and den.value == 0:
            raise ExprError("division by the literal constant 0")
        self.num = num
        self.den = den
        self._init_cache()

    def _key(self) -> tuple:
        return (self.num, self.den)

    @property
    def args(self) -> tuple[Expr, ...]:
        return (self.num, self.den)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Expr) -> None:
        self.base = base
        self.exp = exp
        self._init_cache()

    def _key(self) -> tuple:
        return (self.base, self.exp)

    @property
    def args(self) -> tuple[Expr, ...]:
        return (self.base, self.exp)


class Apply(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: Expr) -> None:
        if fn not in FUNCTIONS:
            raise ExprError(f"unknown function {fn!r}")
        self.fn = fn
        self.arg = arg
        self._init_cache()

    def _key(self) -> tuple:
        return (self.fn, self.arg)

    @property
    def args(self) -> tuple[Expr, ...]:
        return (self.arg,)


ZERO = Const(0)
ONE = Const(1)
MINUS_ONE = Const(-1)


def const(value: Number | float | str) -> Const:
    if isinstance(value, float):
        value = Fraction(repr(value))
    return Const(Fraction(value))


def param(name: str) -> Param:
    return Param(name)


def var(family: Family | str, offset: int = 0, order: int = 0) -> Var:
    if isinstance(family, str):
        family = Family(family)
    return Var(JetVar(family, offset, order))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, JetVar):
        return Var(x)
    if isinstance(x, (int, Fraction, float)) and not isinstance(x, bool):
        return const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


T, TM, TP = var("t"), var("t", -1), var("t", 1)
U, UM, UP = var("u"), var("u", -1), var("u", 1)
DU, DUM, DUP = var("u", 0, 1), var("u", -1, 1), var("u", 1, 1)
DDU, DDUM, DDUP = var("u", 0, 2), var("u", -1, 2), var("u", 1, 2)


# ---------------------------------------------------------------------------
# canonical builders


def _sort_key(e: Expr) -> str:
    return str(e)


def split_coeff(e: Expr) -> tuple[Fraction, Expr]:
    """Split ``c * core``; the core carries no numeric factor."""
    if isinstance(e, Const):
        return e.value, ONE
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        core = rest[0] if len(rest) == 1 else Mul(rest)
        return e.factors[0].value, core
    return Fraction(1), e


def _scale(c: Fraction, core: Expr) -> Expr:
    if c == 1:
        return core
    if isinstance(core, Const):
        return Const(c * core.value)
    if isinstance(core, Mul):
        return Mul((Const(c),) + core.factors)
    return Mul((Const(c), core))


def add(*terms: Expr) -> Expr:
    coeffs: dict[Expr, Fraction] = {}
    constant = Fraction(0)

    def visit(t: Expr) -> None:
        nonlocal constant
        if isinstance(t, Add):
            for s in t.terms:
                visit(s)
            return
        if isinstance(t, Const):
            constant += t.value
            return
        c, core = split_coeff(t)
        coeffs[core] = coeffs.get(core, Fraction(0)) + c

    for t in terms:
        visit(as_expr(t))
    out = [_scale(c, core) for core, c in coeffs.items() if c != 0]
    out.sort(key=lambda e: _sort_key(split_coeff(e)[1]))
    if constant != 0:
        out.append(Const(constant))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(out)


def mul(*factors: Expr) -> Expr:
    coef = Fraction(1)
    exps: dict[Expr, Fraction] = {}
    opaque: list[Expr] = []

    def visit(f: Expr) -> None:
        nonlocal coef
        if isinstance(f, Const):
            coef *= f.value
        elif isinstance(f, Mul):
            for g in f.factors:
                visit(g)
        elif isinstance(f, Pow) and isinstance(f.exp, Const):
            exps[f.base] = exps.get(f.base, Fraction(0)) + f.exp.value
        else:
            exps[f] = exps.get(f, Fraction(0)) + 1

    for f in factors:
        visit(as_expr(f))
    if coef == 0:
        return ZERO
    out: list[Expr] = []
    for base, e in exps.items():
        if e == 0:
            continue
        out.append(base if e == 1 else power(base, Const(e)))
    out.extend(opaque)
    # numeric scaling of a lone sum is distributed so that a - a cancels
    if len(out) == 1 and isinstance(out[0], Add) and coef != 1:
        return add(*(mul(Const(coef), t) for t in out[0].terms))
    flat: list[Expr] = []
    for f in out:
        if isinstance(f, Const):
            coef *= f.value
        elif isinstance(f, Mul):
            c, core = split_coeff(f)
            coef *= c
            flat.extend(core.factors if isinstance(core, Mul) else (core,))
        else:
            flat.append(f)
    if coef == 0:
        return ZERO
    divs = [f for f in flat if isinstance(f, Div)]
    if divs and len(flat) > 1:
        # a product with quotients becomes one quotient
        nums = [f.num if isinstance(f, Div) else f for f in flat]
        dens = [f.den for f in divs]
        return mul(Const(coef), div(mul(*nums), mul(*dens)))
    flat.sort(key=_sort_key)
    if not flat:
        return Const(coef)
    if coef == 1 and len(flat) == 1:
        return flat[0]
    if coef == 1:
        return Mul(flat)
    return Mul([Const(coef)] + flat)


def neg(x: Expr) -> Expr:
    return mul(MINUS_ONE, x)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def _factor_powers(e: Expr) -> dict[Expr, Fraction]:
    out: dict[Expr, Fraction] = {}
    for f in (e.factors if isinstance(e, Mul) else (e,)):
        if isinstance(f, Pow) and isinstance(f.exp, Const):
            out[f.base] = out.get(f.base, Fraction(0)) + f.exp.value
        elif not (isinstance(f, Const) and f.value == 1):
            out[f] = out.get(f, Fraction(0)) + 1
    return out


def _from_powers(powers: dict[Expr, Fraction]) -> Expr:
    return mul(*(power(b, Const(e)) for b, e in powers.items() if e != 0))


def div(num: Expr, den: Expr) -> Expr:
    num, den = as_expr(num), as_expr(den)
    if isinstance(den, Const):
        if den.value == 0:
            raise ExprError("division by the literal constant 0")
        return mul(Const(1 / den.value), num)
    if num.is_zero():
        return ZERO
    if num == den:
        return ONE
    if isinstance(num, Div):
        return div(num.num, mul(num.den, den))
    if isinstance(den, Div):
        return div(mul(num, den.den), den.num)
    cn, n_core = split_coeff(num)
    cd, d_core = split_coeff(den)
    c = cn / cd
    if isinstance(n_core, Div) or isinstance(d_core, Div):
        return mul(Const(c), div(n_core, d_core))
    if not isinstance(n_core, Add) and not isinstance(d_core, Add):
        pn, pd = _factor_powers(n_core), _factor_powers(d_core)
        common = [b for b in pn if b in pd]
        if common:
            for b in common:
                k = min(pn[b], pd[b]) if pn[b] > 0 and pd[b] > 0 else Fraction(0)
                pn[b] -= k
                pd[b] -= k
            n_core, d_core = _from_powers(pn), _from_powers(pd)
    elif not isinstance(d_core, Add):
        pd = _factor_powers(d_core)
        if n_core in pd and pd[n_core] >= 1:
            pd[n_core] -= 1
            n_core, d_core = ONE, _from_powers(pd)
    elif not isinstance(n_core, Add):
        pn = _factor_powers(n_core)
        if d_core in pn and pn[d_core] >= 1:
            pn[d_core] -= 1
            n_core, d_core = _from_powers(pn), ONE
    if isinstance(d_core, Const):
        return mul(Const(c / d_core.value), n_core)
    if isinstance(n_core, Const):
        c *= n_core.value
        n_core = ONE
    return mul(Const(c), Div(n_core, d_core))


def power(base: Expr, exp: Expr) -> Expr:
    base, exp = as_expr(base), as_expr(exp)
    if isinstance(exp, Const):
        e = exp.value
        if e == 0:
            return ONE
        if e == 1:
            return base
        if isinstance(base, Const):
            if e.denominator == 1:
                if base.value == 0 and e < 0:
                    raise ExprError("zero raised to a negative power")
                return Const(base.value ** int(e))
            if base.value == 1:
                return ONE
            return Pow(base, exp)
        if e.denominator == 1:
            if isinstance(base, Pow) and isinstance(base.exp, Const):
                return power(base.base, Const(base.exp.value * e))
            if isinstance(base, Mul):
                return mul(*(power(f, exp) for f in base.factors))
            if isinstance(base, Div):
                return div(power(base.num, exp), power(base.den, exp))
    if isinstance(base, Const) and base.value == 1:
        return ONE
    return Pow(base, exp)


def apply_fn(fn: str, arg: Expr) -> Expr:
    arg = as_expr(arg)
    if isinstance(arg, Const):
        if arg.value == 0 and fn in ("sin",):
            return ZERO
        if arg.value == 0 and fn in ("cos", "exp"):
            return ONE
        if arg.value == 1 and fn == "log":
            return ZERO
    return Apply(fn, arg)


# ---------------------------------------------------------------------------
# structural rewriting


def rebuild(e: Expr, leaf: Callable[[Expr], Expr], memo: dict | None = None) -> Expr:
    """Rebuild ``e`` bottom-up through the canonical builders.

    ``leaf`` maps each leaf (Const/Param/Var) to its replacement.
    """
    if memo is None:
        memo = {}

    def go(x: Expr) -> Expr:
        key = id(x)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        if isinstance(x, (Const, Param, Var)):
            out = leaf(x)
        elif isinstance(x, Neg):
            out = neg(go(x.arg))
        elif isinstance(x, Add):
            out = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            out = mul(*(go(f) for f in x.factors))
        elif isinstance(x, Div):
            out = div(go(x.num), go(x.den))
        elif isinstance(x, Pow):
            out = power(go(x.base), go(x.exp))
        elif isinstance(x, Apply):
            out = apply_fn(x.fn, go(x.arg))
        else:  # pragma: no cover
            raise TypeError(type(x))
        memo[key] = (x, out)
        return out

    return go(e)


def simplify_basic(e: Expr) -> Expr:
    """Constant folding, 0/1 absorption, flattening and like-term collection.

    No trigonometric or rational normalisation: ``sin(t)^2 + cos(t)^2``
    stays as it is.
    """
    return rebuild(e, lambda x: x)


def map_vars(e: Expr, fn: Callable[[JetVar], Expr]) -> Expr:
    return rebuild(e, lambda x: fn(x.var) if isinstance(x, Var) else x)


def substitute(
    e: Expr,
    bindings: Mapping[Union[JetVar, str], Expr],
    bounds: JetBounds = DEFAULT_BOUNDS,
) -> Expr:
    """Simultaneous replacement of jet variables (and named parameters)."""
    if not bindings:
        return e
    table: dict = {}
    for k, v in bindings.items():
        v = as_expr(v)
        for jv in v.free_vars:
            bounds.check(jv)
        table[k] = v

    def leaf(x: Expr) -> Expr:
        if isinstance(x, Var):
            return table.get(x.var, x)
        if isinstance(x, Param):
            return table.get(x.name, x)
        return x

    if not any(isinstance(k, JetVar) and k in e.free_vars for k in table) and not any(
        isinstance(k, str) and k in e.free_params for k in table
    ):
        return e
    return rebuild(e, leaf)


def expand(e: Expr, max_terms: int = 256) -> Expr:
    """Distribute products over sums and gather terms over shared denominators.

    Denominators and powers of sums are left alone so that factors such
    as ``(u - um)^2`` stay visible.
    """

    def regroup(x: Expr) -> Expr:
        terms = x.terms if isinstance(x, Add) else (x,)
        plain: list[Expr] = []
        over: dict[Expr, list[Expr]] = {}
        for t in terms:
            c, core = split_coeff(t)
            if isinstance(core, Div):
                over.setdefault(core.den, []).append(mul(Const(c), core.num))
            else:
                plain.append(t)
        if not over:
            return x
        return add(*plain, *(div(go(add(*nums)), den) for den, nums in over.items()))

    def go(x: Expr) -> Expr:
        if isinstance(x, Add):
            return regroup(add(*(go(t) for t in x.terms)))
        if isinstance(x, Mul):
            parts = [go(f) for f in x.factors]
            acc: list[Expr] = [ONE]
            for p in parts:
                items = p.terms if isinstance(p, Add) else (p,)
                if len(acc) * len(items) > max_terms:
                    return mul(*parts)
                acc = [mul(a, b) for a in acc for b in items]
            return regroup(add(*acc))
        if isinstance(x, Div):
            return regroup(div(go(x.num), x.den))
        if isinstance(x, Neg):
            return go(neg(x.arg))
        return x

    return go(e)
