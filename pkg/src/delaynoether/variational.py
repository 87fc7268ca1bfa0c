"""Variational derivatives of delay Lagrangians and invariance checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .delay import (
    AdmissibilityMode, Generator, ProlongedGenerator, apply_generator,
    point_derivative, prolong, shift, total_derivative, xi_admissible,
)
from .diff import diff
from .expr import (
    ZERO, Expr, ExprError, Family, JetVar, Var, add, as_expr, div, expand, mul, neg,
    sub, substitute,
)
from .syntax import parse
from .zerotest import ZeroTestConfig, is_zero, prob_zero_test

__all__ = [
    "SignatureError", "ReductionError",
    "DelayLagrangian", "EquationKind", "VariationalEquation", "SolveRule",
    "leading_variable", "solve_for",
    "invariance_defect", "elsgolts_derivative", "horizontal_derivative",
    "locally_extremal", "verify_divergence", "divergence_residual",
    "dode_invariance_defect", "extended_elsgolts", "horizontal_operator",
    "TransferResiduals", "invariance_transfer_residuals", "linearly_connected",
]

_t = lambda k=0: JetVar(Family.T, k)
_u = lambda k=0, d=0: JetVar(Family.U, k, d)

LAGRANGIAN_VARS = frozenset({_t(0), _t(-1), _u(0), _u(-1), _u(0, 1), _u(-1, 1)})


class SignatureError(ExprError):
    pass


class ReductionError(ExprError):
    pass


@dataclass(frozen=True)
class DelayLagrangian:
    """First-order Lagrangian L(t, t⁻, u, u⁻, u̇, u̇⁻)."""

    expr: Expr

    def __post_init__(self) -> None:
        object.__setattr__(self, "expr", as_expr(self.expr))
        extra = sorted(self.expr.free_vars - LAGRANGIAN_VARS, key=lambda v: v.sort_key)
        if extra:
            raise SignatureError(
                f"Lagrangian may not contain {', '.join(v.name for v in extra)}"
            )

    @classmethod
    def from_text(cls, text: str, params: Iterable[str] = ()) -> "DelayLagrangian":
        return cls(parse(text, params))

    @cached_property
    def depends_on_current(self) -> bool:
        return not (is_zero(diff(self.expr, _u())) and is_zero(diff(self.expr, _u(0, 1))))

    @cached_property
    def depends_on_delayed(self) -> bool:
        return not (is_zero(diff(self.expr, _u(-1))) and is_zero(diff(self.expr, _u(-1, 1))))

    @property
    def shifted(self) -> Expr:
        return shift(self.expr, 1)

    def __str__(self) -> str:
        return str(self.expr)


class EquationKind(enum.Enum):
    ELSGOLTS = "elsgolts"
    HORIZONTAL = "horizontal"
    LOCALLY_EXTREMAL = "locally_extremal"


@dataclass(frozen=True)
class SolveRule:
    """Leading-variable substitution ``lead = value`` and its D̄-consequences.

    Higher derivatives of the leading variable at the same offset are
    replaced by total derivatives of ``value``.
    """

    lead: JetVar
    value: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def replacement(self, v: JetVar) -> Expr:
        extra = v.order - self.lead.order
        hit = self._cache.get(extra)
        if hit is None:
            hit = self.value
            for _ in range(extra):
                hit = total_derivative(hit)
            self._cache[extra] = hit
        return hit

    def _targets(self, e: Expr) -> list[JetVar]:
        return [
            v for v in e.sorted_vars()
            if v.family is Family.U and v.offset == self.lead.offset and v.order >= self.lead.order
        ]

    def reduce(self, e: Expr, max_rounds: int = 8) -> Expr:
        for _ in range(max_rounds):
            targets = self._targets(e)
            if not targets:
                return e
            e = substitute(e, {v: self.replacement(v) for v in targets})
        if self._targets(e):
            raise ReductionError(f"leading variable {self.lead.name} persists after reduction")
        return e


def leading_variable(lhs: Expr) -> JetVar:
    """Highest-order u-variable at the largest offset present."""
    us = [v for v in lhs.free_vars if v.family is Family.U]
    if not us:
        raise ReductionError("equation has no u-family variables")
    top = max(v.offset for v in us)
    if top < 1:
        raise ReductionError("equation has no variable at offset +1 to solve for")
    return max((v for v in us if v.offset == top), key=lambda v: v.order)


def solve_for(lhs: Expr, lead: JetVar | None = None, cfg: ZeroTestConfig | None = None) -> SolveRule:
    """Solve ``lhs = 0`` for ``lead`` when it enters linearly with a non-vanishing coefficient."""
    lead = lead or leading_variable(lhs)
    a = diff(lhs, lead)
    if is_zero(a, cfg):
        raise ReductionError(f"{lead.name} does not occur in the equation")
    if not is_zero(diff(a, lead), cfg):
        raise ReductionError(f"equation is nonlinear in {lead.name}; supply a solve rule")
    b = substitute(lhs, {lead: ZERO})
    return SolveRule(lead, div(neg(b), a))


@dataclass(frozen=True)
class VariationalEquation:
    kind: EquationKind
    lhs: Expr
    lagrangian: DelayLagrangian
    generator: Generator | None = None

    def __post_init__(self) -> None:
        if (self.kind is EquationKind.LOCALLY_EXTREMAL) != (self.generator is not None):
            raise ValueError("only locally extremal equations carry a generator")

    @cached_property
    def rule(self) -> SolveRule:
        return solve_for(self.lhs)

    def reduce(self, e: Expr) -> Expr:
        return self.rule.reduce(e)

    @property
    def label(self) -> str:
        if self.generator is None:
            return self.kind.value
        return f"{self.kind.value}[{self.generator.name}]"


def invariance_defect(g: Generator, L: DelayLagrangian) -> Expr:
    """X L + L·D_t ξ with X prolonged to t, t⁻, u, u⁻, u̇, u̇⁻."""
    return expand(add(apply_generator(prolong(g), L.expr), mul(L.expr, point_derivative(g.xi, 0))))


def _elsgolts_expr(L: Expr) -> Expr:
    Lp = shift(L, 1)
    u, du = _u(), _u(0, 1)
    return expand(sub(add(diff(L, u), diff(Lp, u)), total_derivative(add(diff(L, du), diff(Lp, du)))))


def _horizontal_expr(L: Expr) -> Expr:
    Lp = shift(L, 1)
    t, du = _t(), _u(0, 1)
    dot = Var(du)
    inner = sub(add(mul(dot, diff(L, du)), mul(dot, diff(Lp, du))), L)
    return expand(add(diff(L, t), diff(Lp, t), total_derivative(inner)))


def elsgolts_derivative(L: DelayLagrangian) -> VariationalEquation:
    """δL/δu_E = L_u + L⁺_u − D̄(L_u̇ + L⁺_u̇)."""
    return VariationalEquation(EquationKind.ELSGOLTS, _elsgolts_expr(L.expr), L)


def horizontal_derivative(L: DelayLagrangian) -> VariationalEquation:
    """δL/δt = L_t + L⁺_t + D̄(u̇L_u̇ + u̇L⁺_u̇ − L)."""
    return VariationalEquation(EquationKind.HORIZONTAL, _horizontal_expr(L.expr), L)


def locally_extremal(g: Generator, L: DelayLagrangian) -> VariationalEquation:
    lhs = add(mul(g.xi, _horizontal_expr(L.expr)), mul(g.eta, _elsgolts_expr(L.expr)))
    return VariationalEquation(EquationKind.LOCALLY_EXTREMAL, lhs, L, g)


def divergence_residual(defect: Expr, V: Expr = ZERO, W: Expr = ZERO) -> Expr:
    """defect − D̄V − (1 − S₊)W."""
    V, W = as_expr(V), as_expr(W)
    return sub(sub(defect, total_derivative(V)), sub(W, shift(W, 1)))


def verify_divergence(defect: Expr, V: Expr = ZERO, W: Expr = ZERO, cfg: ZeroTestConfig | None = None) -> bool:
    return prob_zero_test(divergence_residual(defect, V, W), cfg).verdict


def dode_invariance_defect(
    pg: ProlongedGenerator | Generator,
    eqn_lhs: Expr,
    rule: SolveRule | None = None,
    cfg: ZeroTestConfig | None = None,
) -> Expr:
    """X(lhs) reduced modulo ``lhs = 0``; identically zero iff the equation is invariant."""
    if isinstance(pg, Generator):
        pg = prolong(pg)
    rule = rule or solve_for(eqn_lhs, cfg=cfg)
    return rule.reduce(apply_generator(pg, eqn_lhs))


def extended_elsgolts(F: Expr) -> Expr:
    """Σ_k S_{−k}(∂F/∂u_k − D̄ ∂F/∂u̇_k + D̄² ∂F/∂ü_k).

    Annihilates every D̄V + (1 − S₊)W.
    """
    terms = []
    for k in F.offsets():
        part = diff(F, _u(k))
        d1 = diff(F, _u(k, 1))
        if not d1.is_zero():
            part = sub(part, total_derivative(d1))
        d2 = diff(F, _u(k, 2))
        if not d2.is_zero():
            part = add(part, total_derivative(total_derivative(d2)))
        terms.append(shift(part, -k))
    return add(*terms)


def horizontal_operator(F: Expr) -> Expr:
    """δ/δt applied to an expression with the Lagrangian signature."""
    return _horizontal_expr(F)


@dataclass(frozen=True)
class TransferResiduals:
    elsgolts_residual: Expr
    horizontal_residual: Expr
    locally_extremal_residual: Expr
    eta_t_term: Expr


def invariance_transfer_residuals(
    g: Generator,
    L: DelayLagrangian,
    tau: float = 1.0,
    cfg: ZeroTestConfig | None = None,
) -> TransferResiduals:
    """Residuals of the identities carrying invariance of L to its variational equations.

    With F = XL + L·D_tξ, E = δL/δu_E, H = δL/δt:

        E_ext(F) = X(E) + (ξ̇ + η_u)·E
        δF/δt    = X(H) + 2ξ̇·H + η_t·E
        (ξδ/δt + ηE_ext)(F) = X(ξH + ηE) + ξ̇·(ξH + ηE)
    """
    u0 = _u()
    if u0 in g.xi.free_vars:
        raise ExprError("xi must not depend on u")
    gate = xi_admissible(g.xi, tau, AdmissibilityMode.PERIODIC_AFFINE, cfg)
    if not gate.verdict:
        raise ExprError(f"xi is not of the form alpha*t + periodic (witness t = {gate.witness[0]:.6g})")
    pg = prolong(g)
    F = invariance_defect(g, L)
    E = _elsgolts_expr(L.expr)
    H = _horizontal_expr(L.expr)
    xidot = diff(g.xi, _t())
    eta_u = diff(g.eta, u0)
    eta_t = diff(g.eta, _t())
    EF = extended_elsgolts(F)
    HF = horizontal_operator(F)
    r_e = sub(EF, add(apply_generator(pg, E), mul(add(xidot, eta_u), E)))
    r_h = sub(HF, add(apply_generator(pg, H), mul(2, xidot, H), mul(eta_t, E)))
    le = add(mul(g.xi, H), mul(g.eta, E))
    r_le = sub(add(mul(g.xi, HF), mul(g.eta, EF)), add(apply_generator(pg, le), mul(xidot, le)))
    return TransferResiduals(r_e, r_h, r_le, mul(eta_t, E))


def linearly_connected(g1: Generator, g2: Generator, cfg: ZeroTestConfig | None = None) -> bool:
    """ξ₁η₂ − ξ₂η₁ ≡ 0: the generators span the same direction field."""
    if is_zero(g1.xi, cfg) and is_zero(g1.eta, cfg):
        return False
    return is_zero(sub(mul(g1.xi, g2.eta), mul(g2.xi, g1.eta)), cfg)
