"""Probabilistic identity testing under the constant-delay constraint.

Samples bind every u-family variable independently, draw τ and a base
time, and tie the time points together as ``t_k = t_base + k·τ`` so that
``tp - t == t - tm == tau`` holds at every sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .expr import Expr, ExprError, Family, JetVar, as_expr, sub
from .numeric import evaluate_batch

__all__ = [
    "ZeroTestConfig", "ZeroTestResult", "ZeroTestError",
    "prob_zero_test", "is_zero", "draw_env", "constant_value", "constant_ratio",
]


class ZeroTestError(ExprError):
    pass


@dataclass(frozen=True)
class ZeroTestConfig:
    sample_count: int = 64
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    u_domain: tuple[float, float] = (-2.0, 2.0)
    t_domain: tuple[float, float] = (0.5, 3.0)
    param_domain: tuple[float, float] = (0.5, 3.0)
    param_domains: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    fixed: Mapping[str, float] = field(default_factory=dict)
    resample_limit: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")

    def with_(self, **kw) -> "ZeroTestConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class ZeroTestResult:
    verdict: bool
    max_residual: float
    samples_used: int
    seed: int

    def __bool__(self) -> bool:
        return self.verdict


def draw_env(
    vars: Iterable[JetVar],
    params: Iterable[str],
    n: int,
    rng: np.random.Generator,
    cfg: ZeroTestConfig,
) -> dict:
    """Random bindings for ``n`` samples honouring the delay constraint."""
    vars = sorted(set(vars), key=lambda v: v.sort_key)
    env: dict = {}
    for name in ["tau"] + sorted(set(params) - {"tau", "pi"}):
        if name in cfg.fixed:
            env[name] = np.full(n, float(cfg.fixed[name]))
        else:
            lo, hi = cfg.param_domains.get(name, cfg.param_domain)
            env[name] = rng.uniform(lo, hi, n)
    toffs = [v.offset for v in vars if v.family is Family.T]
    if toffs:
        kmin = min(toffs)
        base = rng.uniform(*cfg.t_domain, n)
        for v in vars:
            if v.family is Family.T:
                env[v] = base + (v.offset - kmin) * env["tau"]
    for v in vars:
        if v.family is Family.U:
            env[v] = rng.uniform(*cfg.u_domain, n)
    return env


def _sample(exprs: list[Expr], cfg: ZeroTestConfig, n: int, rng: np.random.Generator):
    vs: set[JetVar] = set()
    ps: set[str] = set()
    for e in exprs:
        vs |= e.free_vars
        ps |= e.free_params
    env = draw_env(vs, ps, n, rng, cfg)
    results = [evaluate_batch(e, env, n) for e in exprs]
    bad = np.zeros(n, dtype=bool)
    for _, _, b in results:
        bad |= b
    rounds = 0
    while bad.any():
        if rounds >= cfg.resample_limit:
            raise ZeroTestError(
                f"{int(bad.sum())} of {n} samples still singular after "
                f"{cfg.resample_limit} resampling rounds"
            )
        rounds += 1
        idx = np.flatnonzero(bad)
        fresh = draw_env(vs, ps, len(idx), rng, cfg)
        for k in env:
            env[k] = np.array(env[k], dtype=float)
            env[k][idx] = fresh[k]
        results = [evaluate_batch(e, env, n) for e in exprs]
        bad = np.zeros(n, dtype=bool)
        for _, _, b in results:
            bad |= b
    return env, results


def prob_zero_test(e: Expr, cfg: ZeroTestConfig | None = None) -> ZeroTestResult:
    """Decide ``e ≡ 0`` by evaluation at random points.

    A sample passes when ``|e| <= abs_tol + rel_tol * scale`` where scale
    is the largest magnitude of any subterm evaluated at that sample.
    """
    cfg = cfg or ZeroTestConfig()
    e = as_expr(e)
    if e.is_zero():
        return ZeroTestResult(True, 0.0, 0, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.sample_count
    _, [(vals, scale, _)] = _sample([e], cfg, n, rng)
    resid = np.abs(vals)
    ok = bool(np.all(resid <= cfg.abs_tol + cfg.rel_tol * scale))
    return ZeroTestResult(ok, float(resid.max()), n, cfg.seed)


def is_zero(e: Expr, cfg: ZeroTestConfig | None = None) -> bool:
    return prob_zero_test(e, cfg).verdict


def constant_value(e: Expr, cfg: ZeroTestConfig | None = None, max_den: int = 1000) -> Fraction | None:
    """Return the rational constant that ``e`` equals identically, if any."""
    cfg = cfg or ZeroTestConfig()
    e = as_expr(e)
    if not e.free_vars and not (e.free_params - {"pi"}):
        from .numeric import Assignment, evaluate

        guess = Fraction(evaluate(e, Assignment())).limit_denominator(max_den)
    else:
        rng = np.random.default_rng(cfg.seed)
        _, [(vals, _, _)] = _sample([e], cfg, cfg.sample_count, rng)
        guess = Fraction(float(np.median(vals))).limit_denominator(max_den)
    if prob_zero_test(sub(e, as_expr(guess)), cfg).verdict:
        return guess
    return None


def constant_ratio(a: Expr, b: Expr, cfg: ZeroTestConfig | None = None, max_den: int = 1000) -> Fraction | None:
    """Rational k with ``a ≡ k·b``, or None.  ``b`` must not vanish identically."""
    cfg = cfg or ZeroTestConfig()
    rng = np.random.default_rng(cfg.seed)
    _, [(va, _, _), (vb, _, _)] = _sample([as_expr(a), as_expr(b)], cfg, cfg.sample_count, rng)
    mask = np.abs(vb) > 1e-6 * max(1.0, float(np.abs(vb).max()))
    if not mask.any():
        return None
    k = Fraction(float(np.median(va[mask] / vb[mask]))).limit_denominator(max_den)
    if prob_zero_test(sub(as_expr(a), as_expr(k) * as_expr(b)), cfg).verdict:
        return k
    return None
