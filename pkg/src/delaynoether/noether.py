"""Noether identity, differential-difference relations and first integrals."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .delay import Generator, prolong, shift, total_derivative
from .diff import diff
from .expr import (
    ZERO, Const, Expr, ExprError, Family, JetVar, Param, Var, add, as_expr, expand,
    mul, sub, substitute,
)
from .variational import (
    DelayLagrangian, SolveRule, VariationalEquation, _elsgolts_expr,
    _horizontal_expr, divergence_residual, invariance_defect, locally_extremal,
)
from .zerotest import ZeroTestConfig, constant_value, is_zero, prob_zero_test

__all__ = [
    "NoetherError", "IntegralKind", "VerifyResult", "FirstIntegral", "DDRelation",
    "density_C", "density_P", "identity_residual", "dd_relation",
    "to_differential_integral", "to_difference_integral", "ConditionalIntegrals",
    "conditional_integrals", "modified_invariance_defect", "modified_integral",
    "verify_first_integral", "constant_delay", "RecursionRelation", "derive_recursion",
]

_t = lambda k=0: JetVar(Family.T, k)
_u = lambda k=0, d=0: JetVar(Family.U, k, d)


class NoetherError(ExprError):
    pass


class IntegralKind(enum.Enum):
    DIFFERENTIAL = "differential"
    DIFFERENCE = "difference"


_SIGNATURE = {
    IntegralKind.DIFFERENTIAL: ((-1, 1), 1),
    IntegralKind.DIFFERENCE: ((-1, 0), 2),
}


@dataclass(frozen=True)
class VerifyResult:
    verdict: bool
    max_residual: float
    seed: int = 0

    def __bool__(self) -> bool:
        return self.verdict


@dataclass(frozen=True)
class FirstIntegral:
    """A differential (D̄I = 0) or difference ((S₊−1)J = 0) first integral.

    ``constraint`` is set for conditional integrals: it must vanish
    (``constraint_kind == "vanishes"``) or stay constant (``"constant"``)
    along the solutions considered.
    """

    kind: IntegralKind
    expr: Expr
    equation: VariationalEquation | None = None
    constraint: Expr | None = None
    constraint_kind: str | None = None
    label: str = ""
    verification: VerifyResult | None = None

    def __post_init__(self) -> None:
        (lo, hi), max_order = _SIGNATURE[self.kind]
        for v in self.expr.free_vars:
            if not lo <= v.offset <= hi or v.order > max_order:
                raise NoetherError(
                    f"{v.name} is outside the {self.kind.value} first-integral signature"
                )

    @property
    def conditional(self) -> bool:
        return self.constraint is not None


def density_C(g: Generator, L: DelayLagrangian) -> Expr:
    """C = ξL + (η − u̇ξ)(L_u̇ + L⁺_u̇)."""
    du = _u(0, 1)
    mom = add(diff(L.expr, du), diff(L.shifted, du))
    return expand(add(mul(g.xi, L.expr), mul(sub(g.eta, mul(Var(du), g.xi)), mom)))


def density_P(g: Generator, L: DelayLagrangian) -> Expr:
    """P = ξ⁻L_{t⁻} + η⁻L_{u⁻} + ζ₁⁻L_{u̇⁻}."""
    pg = prolong(g)
    return expand(add(*(
        mul(pg.coeff(v), diff(L.expr, v))
        for v in (_t(-1), _u(-1), _u(-1, 1))
    )))


def identity_residual(g: Generator, L: DelayLagrangian) -> Expr:
    """(XL + L·D_tξ) − (ξ·δL/δt + η·δL/δu_E + D̄C + (1 − S₊)P)."""
    if L.expr.is_zero():
        return ZERO
    C, P = density_C(g, L), density_P(g, L)
    rhs = add(
        mul(g.xi, _horizontal_expr(L.expr)),
        mul(g.eta, _elsgolts_expr(L.expr)),
        total_derivative(C),
        sub(P, shift(P, 1)),
    )
    return sub(invariance_defect(g, L), rhs)


@dataclass(frozen=True)
class DDRelation:
    """D̄(C − V) = (S₊ − 1)(P − W) on solutions of ``equation``."""

    C: Expr
    P: Expr
    equation: VariationalEquation
    generator: Generator
    divergence_V: Expr | None = None
    divergence_W: Expr | None = None

    @property
    def C_eff(self) -> Expr:
        return expand(sub(self.C, self.divergence_V or ZERO))

    @property
    def P_eff(self) -> Expr:
        return expand(sub(self.P, self.divergence_W or ZERO))

    def residual(self) -> Expr:
        return sub(total_derivative(self.C_eff), sub(shift(self.P_eff, 1), self.P_eff))


def _reduced_zero(e: Expr, eq: VariationalEquation | SolveRule, cfg: ZeroTestConfig | None):
    rule = eq if isinstance(eq, SolveRule) else eq.rule
    return prob_zero_test(rule.reduce(e), cfg)


def dd_relation(
    g: Generator,
    L: DelayLagrangian,
    V: Expr | None = None,
    W: Expr | None = None,
    equation: VariationalEquation | None = None,
    cfg: ZeroTestConfig | None = None,
) -> DDRelation:
    """Build and check the differential-difference relation for ``g``.

    ``equation`` defaults to the locally extremal equation of ``g``; any
    equation equivalent to it (e.g. the Elsgolts equation when ξ = 0)
    may be passed instead.
    """
    equation = equation or locally_extremal(g, L)
    V = as_expr(V) if V is not None else None
    W = as_expr(W) if W is not None else None
    pre = divergence_residual(invariance_defect(g, L), V or ZERO, W or ZERO)
    if not _reduced_zero(pre, equation, cfg).verdict:
        raise NoetherError(
            f"{g.name} is neither variational nor a divergence symmetry with the given V, W"
        )
    rel = DDRelation(density_C(g, L), density_P(g, L), equation, g, V, W)
    post = _reduced_zero(rel.residual(), equation, cfg)
    if not post.verdict:
        raise NoetherError(
            f"relation for {g.name} does not hold on {equation.label} "
            f"(residual {post.max_residual:.3g})"
        )
    return rel


def verify_first_integral(
    fi: FirstIntegral,
    solve_rule: SolveRule | None = None,
    cfg: ZeroTestConfig | None = None,
) -> VerifyResult:
    """D̄I ≡ 0 (differential) or J⁺ − J ≡ 0 (difference) modulo the equation."""
    cfg = cfg or ZeroTestConfig()
    if solve_rule is None:
        if fi.equation is None:
            raise NoetherError("no equation bound to the integral and no solve rule given")
        solve_rule = fi.equation.rule
    if fi.kind is IntegralKind.DIFFERENTIAL:
        change = total_derivative(fi.expr)
    else:
        change = sub(shift(fi.expr, 1), fi.expr)
    # expanding over common denominators cancels exactly what it can, so the
    # sampled residual is not dominated by rounding near poles
    res = prob_zero_test(expand(solve_rule.reduce(change)), cfg)
    return VerifyResult(res.verdict, res.max_residual, res.seed)


def _with_verification(fi: FirstIntegral, cfg: ZeroTestConfig | None) -> FirstIntegral:
    v = verify_first_integral(fi, cfg=cfg)
    return FirstIntegral(fi.kind, fi.expr, fi.equation, fi.constraint, fi.constraint_kind, fi.label, v)


def to_differential_integral(
    r: DDRelation, V2: Expr = ZERO, cfg: ZeroTestConfig | None = None, label: str = ""
) -> FirstIntegral:
    """(S₊−1)(P−W) = D̄V2 turns the relation into I = (C − V) − V2."""
    V2 = as_expr(V2)
    pre = sub(sub(shift(r.P_eff, 1), r.P_eff), total_derivative(V2))
    if not _reduced_zero(pre, r.equation, cfg).verdict:
        raise NoetherError(f"(S+ - 1)P is not the total derivative of {V2}")
    fi = FirstIntegral(IntegralKind.DIFFERENTIAL, expand(sub(r.C_eff, V2)), r.equation, label=label)
    return _with_verification(fi, cfg)


def to_difference_integral(
    r: DDRelation, W2: Expr = ZERO, cfg: ZeroTestConfig | None = None, label: str = ""
) -> FirstIntegral:
    """D̄(C−V) = (S₊−1)W2 turns the relation into J = (P − W) − W2."""
    W2 = as_expr(W2)
    pre = sub(total_derivative(r.C_eff), sub(shift(W2, 1), W2))
    if not _reduced_zero(pre, r.equation, cfg).verdict:
        raise NoetherError(f"D(C) is not the difference (S+ - 1) of {W2}")
    fi = FirstIntegral(IntegralKind.DIFFERENCE, expand(sub(r.P_eff, W2)), r.equation, label=label)
    return _with_verification(fi, cfg)


@dataclass(frozen=True)
class ConditionalIntegrals:
    differential_under_difference_constraint: FirstIntegral
    difference_under_differential_constraint: FirstIntegral


def conditional_integrals(r: DDRelation, cfg: ZeroTestConfig | None = None) -> ConditionalIntegrals:
    """I = C on solutions with (S₊−1)P = 0, and J = P on solutions with C constant.

    A constraint that holds identically on the equation is dropped.
    """
    dp = sub(shift(r.P_eff, 1), r.P_eff)
    dp_c = None if _reduced_zero(dp, r.equation, cfg).verdict else dp
    dc_c = None if _reduced_zero(total_derivative(r.C_eff), r.equation, cfg).verdict else r.C_eff
    return ConditionalIntegrals(
        FirstIntegral(IntegralKind.DIFFERENTIAL, r.C_eff, r.equation, dp_c,
                      "vanishes" if dp_c is not None else None),
        FirstIntegral(IntegralKind.DIFFERENCE, r.P_eff, r.equation, dc_c,
                      "constant" if dc_c is not None else None),
    )


def modified_invariance_defect(g: Generator, L: DelayLagrangian) -> Expr:
    """XL + L·D_tξ − (1 − S₊)P: vanishing (up to D̄V) gives I = C − V directly."""
    P = density_P(g, L)
    return sub(invariance_defect(g, L), sub(P, shift(P, 1)))


def modified_integral(
    g: Generator,
    L: DelayLagrangian,
    V: Expr = ZERO,
    equation: VariationalEquation | None = None,
    cfg: ZeroTestConfig | None = None,
    label: str = "",
) -> FirstIntegral:
    equation = equation or locally_extremal(g, L)
    V = as_expr(V)
    pre = sub(modified_invariance_defect(g, L), total_derivative(V))
    if not _reduced_zero(pre, equation, cfg).verdict:
        raise NoetherError(f"modified invariance condition fails for {g.name}")
    fi = FirstIntegral(IntegralKind.DIFFERENTIAL, expand(sub(density_C(g, L), V)), equation, label=label)
    return _with_verification(fi, cfg)


def constant_delay(e: Expr, tau: Expr | float | None = None) -> Expr:
    """Replace t_k by t + k·τ (τ symbolic unless a value is given)."""
    tau_e = Param("tau") if tau is None else as_expr(tau)
    t = Var(_t())
    binds = {v: add(t, mul(Const(v.offset), tau_e)) for v in e.free_vars
             if v.family is Family.T and v.offset != 0}
    return substitute(e, binds)


@dataclass(frozen=True)
class RecursionRelation:
    """Σ c_k u(t − kτ) = ma(t)·A + mb(t)·B in standard (t, t−τ, t−2τ) form.

    ``coeffs`` are the rational coefficients on u(t), u(t−τ), u(t−2τ);
    ``ma``/``mb`` are expressions in ``t`` and ``tau``; A and B are the
    values of the two first integrals the relation came from.
    """

    coeffs: tuple[Fraction, Fraction, Fraction]
    ma: Expr
    mb: Expr
    integrals: tuple[Expr, ...]

    def rhs(self, A: float, B: float = 0.0) -> Expr:
        return add(mul(as_expr(Fraction(A)), self.ma), mul(as_expr(Fraction(B)), self.mb))


def derive_recursion(
    Ia: Expr, Ib: Expr | None = None, cfg: ZeroTestConfig | None = None
) -> RecursionRelation | None:
    """Eliminate velocities between two differential integrals.

    Returns None when the velocity parts are not proportional or the
    remaining u-dependence is not linear with constant coefficients.
    """
    dots = [_u(k, 1) for k in (1, 0, -1)]
    if Ib is None or all(is_zero(diff(Ia, d), cfg) for d in dots):
        ma, mb = as_expr(1), ZERO
        R = Ia
    else:
        pivot = next((d for d in dots if not is_zero(diff(Ia, d), cfg)), None)
        if pivot is None:
            ma, mb = as_expr(1), ZERO
        else:
            ma, mb = diff(Ib, pivot), mul(-1, diff(Ia, pivot))
        R = add(mul(ma, Ia), mul(mb, Ib))
    if any(not is_zero(diff(R, d), cfg) for d in dots):
        return None
    coeffs = []
    for k in (1, 0, -1):
        c = constant_value(diff(R, _u(k)), cfg)
        if c is None:
            return None
        coeffs.append(c)
    lin = add(*(mul(Const(c), Var(_u(k))) for c, k in zip(coeffs, (1, 0, -1))))
    if not is_zero(sub(R, lin), cfg) or coeffs[0] == 0:
        return None
    # the relation holds at every t; rewrite so that the newest point is t
    ma_s = constant_delay(shift(ma, -1))
    mb_s = constant_delay(shift(mb, -1))
    return RecursionRelation(tuple(coeffs), ma_s, mb_s, (Ia,) if Ib is None else (Ia, Ib))
