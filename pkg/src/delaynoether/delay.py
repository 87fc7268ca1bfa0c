"""Shift operators, point and total derivatives, prolongation, admissibility of ξ(t)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .diff import diff
from .expr import (
    DEFAULT_BOUNDS, Expr, ExprError, Family, JetBounds, JetVar, Var,
    add, as_expr, map_vars, mul, sub,
)
from .numeric import evaluate_batch
from .syntax import parse
from .zerotest import ZeroTestConfig

__all__ = [
    "shift", "point_derivative", "total_derivative",
    "Generator", "ProlongedGenerator", "UncoveredVariableError",
    "prolong", "apply_generator",
    "AdmissibilityMode", "AdmissibilityReport", "xi_admissible",
]

T0 = JetVar(Family.T, 0, 0)
U0 = JetVar(Family.U, 0, 0)


def shift(e: Expr, k: int, bounds: JetBounds = DEFAULT_BOUNDS) -> Expr:
    """Apply S₊ (k > 0) or S₋ (k < 0) |k| times."""
    if k == 0 or not e.free_vars:
        return e
    return map_vars(e, lambda v: Var(bounds.check(v.shifted(k))))


def point_derivative(e: Expr, k: int, bounds: JetBounds = DEFAULT_BOUNDS) -> Expr:
    """Chain-rule derivative D_{t_k} acting only on variables at offset ``k``."""
    terms = []
    for v in e.sorted_vars():
        if v.offset != k:
            continue
        d = diff(e, v)
        if v.family is Family.T:
            terms.append(d)
        else:
            terms.append(mul(Var(bounds.check(v.raised())), d))
    return add(*terms)


def total_derivative(e: Expr, bounds: JetBounds = DEFAULT_BOUNDS) -> Expr:
    """D̄ = Σ_k D_{t_k} over every offset present in ``e``."""
    return add(*(point_derivative(e, k, bounds) for k in e.offsets()))


class UncoveredVariableError(ExprError):
    pass


@dataclass(frozen=True)
class Generator:
    """Point generator ξ(t,u)∂/∂t + η(t,u)∂/∂u."""

    xi: Expr
    eta: Expr
    name: str = "X"

    def __post_init__(self) -> None:
        object.__setattr__(self, "xi", as_expr(self.xi))
        object.__setattr__(self, "eta", as_expr(self.eta))
        for part, e in (("xi", self.xi), ("eta", self.eta)):
            extra = e.free_vars - {T0, U0}
            if extra:
                names = ", ".join(sorted(v.name for v in extra))
                raise ExprError(f"{self.name}: {part} may depend on t and u only, found {names}")

    @classmethod
    def from_text(cls, xi: str, eta: str, name: str = "X", params: Iterable[str] = ()) -> "Generator":
        return cls(parse(xi, params), parse(eta, params), name)

    def __str__(self) -> str:
        return f"{self.name} = ({self.xi})*d/dt + ({self.eta})*d/du"


@dataclass(frozen=True)
class ProlongedGenerator:
    generator: Generator
    zeta1: Expr
    zeta2: Expr
    coeffs: dict = field(default_factory=dict)
    bounds: JetBounds = DEFAULT_BOUNDS

    def coeff(self, v: JetVar) -> Expr:
        hit = self.coeffs.get(v)
        if hit is not None:
            return hit
        if v.family is Family.T:
            base = self.generator.xi
        elif v.order <= 2:
            base = (self.generator.eta, self.zeta1, self.zeta2)[v.order]
        else:
            raise UncoveredVariableError(f"no prolongation coefficient for {v.name}")
        return shift(base, v.offset, self.bounds)


def prolong(g: Generator, bounds: JetBounds = DEFAULT_BOUNDS) -> ProlongedGenerator:
    """ζ₁ = D_t η − u̇ D_t ξ, ζ₂ = D_t ζ₁ − ü D_t ξ, tabulated at offsets −1, 0, +1."""
    dxi = point_derivative(g.xi, 0, bounds)
    du = Var(JetVar(Family.U, 0, 1))
    ddu = Var(JetVar(Family.U, 0, 2))
    z1 = sub(point_derivative(g.eta, 0, bounds), mul(du, dxi))
    z2 = sub(point_derivative(z1, 0, bounds), mul(ddu, dxi))
    table = {}
    for k in (-1, 0, 1):
        table[JetVar(Family.T, k)] = shift(g.xi, k, bounds)
        for d, c in enumerate((g.eta, z1, z2)):
            table[JetVar(Family.U, k, d)] = shift(c, k, bounds)
    return ProlongedGenerator(g, z1, z2, table, bounds)


def apply_generator(pg: ProlongedGenerator | Generator, e: Expr) -> Expr:
    """Σ_v coeff(v)·∂e/∂v over the variables of ``e``."""
    if isinstance(pg, Generator):
        pg = prolong(pg)
    return add(*(mul(pg.coeff(v), diff(e, v)) for v in e.sorted_vars()))


class AdmissibilityMode(enum.Enum):
    PERIODIC_AFFINE = "periodic-affine"
    STRICT_AFFINE = "strict-affine"


@dataclass(frozen=True)
class AdmissibilityReport:
    mode: AdmissibilityMode
    verdict: bool
    witness: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.verdict != (self.witness is None):
            raise ValueError("a witness accompanies exactly the failing verdicts")


def xi_admissible(
    xi: Expr,
    tau: float,
    mode: AdmissibilityMode = AdmissibilityMode.PERIODIC_AFFINE,
    cfg: ZeroTestConfig | None = None,
    grid_points: int = 32,
    params: dict | None = None,
) -> AdmissibilityReport:
    """Check ξ(t) = αt + f(t) with f τ-periodic, or additionally ξ affine.

    ``tau`` binds the ``tau`` parameter; other parameters come from ``params``.
    """
    cfg = cfg or ZeroTestConfig()
    xi = as_expr(xi)
    if xi.free_vars - {T0}:
        raise ExprError("xi must depend on t only")
    env_p = {"tau": float(tau), **(params or {})}

    def f(ts: np.ndarray) -> np.ndarray:
        vals, _, bad = evaluate_batch(xi, {T0: ts, **env_p}, len(ts))
        if bad.any():
            raise ExprError(f"xi is singular at t = {ts[bad][0]!r}")
        return vals

    grid = np.linspace(0.0, 4.0 * tau, grid_points)
    fx = f(grid)
    delta = fx - f(grid - tau)
    scale = max(1.0, float(np.abs(fx).max()))
    tol = cfg.abs_tol + cfg.rel_tol * scale
    dev = np.abs(delta - delta[0])
    if dev.max() > tol:
        i = int(dev.argmax())
        return AdmissibilityReport(mode, False, (float(grid[i]),))
    if mode is AdmissibilityMode.PERIODIC_AFFINE:
        return AdmissibilityReport(mode, True)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.sample_count
    # random triples with spacing at least τ/8 keep the divided difference well conditioned
    t1 = rng.uniform(0.0, 4.0 * tau, n)
    t2 = t1 + rng.uniform(tau / 8, tau, n)
    t3 = t2 + rng.uniform(tau / 8, tau, n)
    f1, f2, f3 = f(t1), f(t2), f(t3)
    dd = ((f3 - f2) / (t3 - t2) - (f2 - f1) / (t2 - t1)) / (t3 - t1)
    bound = tol * (8.0 / tau) ** 2
    for i in range(n):
        if abs(dd[i]) > bound:
            return AdmissibilityReport(mode, False, (float(t1[i]), float(t2[i]), float(t3[i])))
    return AdmissibilityReport(mode, True)
