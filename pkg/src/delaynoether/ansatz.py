"""Least-squares search for divergence terms over a small fixed basis.

A candidate is a rational combination of ``μ(t_k)·w`` with
μ ∈ {1, t, sin t, cos t, exp t} and w a u-variable (or 1).  Coefficients
are fitted at random sample points, rounded to small rationals and then
confirmed by the zero test, so a returned answer is always checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .delay import shift, total_derivative
from .expr import ONE, ZERO, Const, Expr, Family, JetVar, Var, add, apply_fn, mul, sub
from .variational import SolveRule
from .zerotest import ZeroTestConfig, ZeroTestError, _sample, prob_zero_test

__all__ = [
    "AnsatzResult", "V_BASIS", "W_BASIS", "basis_terms", "fit_combination",
    "find_divergence", "find_differential_potential", "find_difference_potential",
]

_MU = ("1", "t", "sin", "cos", "exp")


def _mu(kind: str, k: int) -> Expr:
    t = Var(JetVar(Family.T, k))
    if kind == "1":
        return ONE
    if kind == "t":
        return t
    return apply_fn(kind, t)


def basis_terms(offsets: Sequence[int], max_order: int) -> list[Expr]:
    """μ(t_k)·w for the given offsets; simplest terms first."""
    ws: list[Expr] = [ONE]
    for d in range(max_order + 1):
        for j in offsets:
            ws.append(Var(JetVar(Family.U, j, d)))
    out: list[Expr] = []
    seen: set[Expr] = set()
    for kind in _MU:
        for k in (offsets if kind != "1" else (0,)):
            m = _mu(kind, k)
            for w in ws:
                b = mul(m, w)
                if b != ONE and b not in seen:
                    seen.add(b)
                    out.append(b)
    return out


V_BASIS = tuple(basis_terms((-1, 0, 1), 1))
W_BASIS = tuple(basis_terms((-1, 0), 2))


@dataclass(frozen=True)
class AnsatzResult:
    V: Expr
    W: Expr

    def __iter__(self):
        return iter((self.V, self.W))


def _independent(A: np.ndarray, tol: float = 1e-8) -> list[int]:
    """Greedy column selection keeping a well-conditioned subset."""
    keep: list[int] = []
    Q = np.zeros((A.shape[0], 0))
    for j in range(A.shape[1]):
        col = A[:, j]
        nrm = np.linalg.norm(col)
        if nrm == 0:
            continue
        r = col / nrm
        for _ in range(2):
            r = r - Q @ (Q.T @ r)
        if np.linalg.norm(r) > tol:
            Q = np.column_stack([Q, r / np.linalg.norm(r)])
            keep.append(j)
    return keep


def fit_combination(
    target: Expr,
    columns: Sequence[tuple[Expr, Expr]],
    rule: SolveRule | None = None,
    cfg: ZeroTestConfig | None = None,
    max_den: int = 1000,
) -> dict[int, Fraction] | None:
    """Rational x with ``target ≡ Σ x_i·image_i``; ``columns`` pairs (basis, image).

    Images and target are reduced by ``rule`` first when one is given.
    The result maps column index to coefficient, omitting zeros.
    """
    cfg = cfg or ZeroTestConfig()
    red = rule.reduce if rule is not None else (lambda e: e)
    target = red(target)
    images = [red(img) for _, img in columns]
    live = [i for i, img in enumerate(images) if not img.is_zero()]
    if not live:
        return {} if prob_zero_test(target, cfg).verdict else None
    n = max(64, 3 * len(live))
    rng = np.random.default_rng(cfg.seed + 7919)
    try:
        env, res = _sample([target] + [images[i] for i in live], cfg, n, rng)
    except ZeroTestError:
        return None
    b = res[0][0]
    A = np.column_stack([r[0] for r in res[1:]])
    scale = np.maximum(1.0, np.max(np.abs(np.column_stack([A, b])), axis=1))
    A, b = A / scale[:, None], b / scale
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    keep = _independent(A / norms)
    if not keep:
        return None
    x, *_ = np.linalg.lstsq(A[:, keep] / norms[keep], b, rcond=None)
    x = x / norms[keep]
    coeffs: dict[int, Fraction] = {}
    for j, xj in zip(keep, x):
        c = Fraction(float(xj)).limit_denominator(max_den)
        if abs(xj) >= 1e-7 and c != 0:
            coeffs[live[j]] = c
    combo = add(*(mul(Const(c), images[i]) for i, c in coeffs.items()))
    if not prob_zero_test(sub(target, combo), cfg).verdict:
        return None
    return coeffs


def _assemble(coeffs: dict[int, Fraction], basis: Sequence[Expr], start: int = 0) -> Expr:
    return add(*(mul(Const(coeffs[start + i]), b) for i, b in enumerate(basis) if start + i in coeffs))


def _dbar_cols(basis: Sequence[Expr]) -> list[tuple[Expr, Expr]]:
    return [(b, total_derivative(b)) for b in basis]


def _diff_cols(basis: Sequence[Expr], sign: int) -> list[tuple[Expr, Expr]]:
    # sign = +1: (1 - S+)w ; sign = -1: (S+ - 1)w
    return [(b, mul(Const(sign), sub(b, shift(b, 1)))) for b in basis]


def find_divergence(
    defect: Expr,
    rule: SolveRule | None = None,
    cfg: ZeroTestConfig | None = None,
) -> AnsatzResult | None:
    """(V, W) with defect ≡ D̄V + (1 − S₊)W, trying V alone, W alone, then both."""
    vcols = _dbar_cols(V_BASIS)
    wcols = _diff_cols(W_BASIS, 1)
    attempts: list[tuple[list, Callable]] = [
        (vcols, lambda c: AnsatzResult(_assemble(c, V_BASIS), ZERO)),
        (wcols, lambda c: AnsatzResult(ZERO, _assemble(c, W_BASIS))),
    ]
    for cols, build in attempts:
        c = fit_combination(defect, cols, rule, cfg)
        if c is not None:
            return build(c)
    c = fit_combination(defect, vcols + wcols, rule, cfg)
    if c is None:
        return None
    return AnsatzResult(_assemble(c, V_BASIS), _assemble(c, W_BASIS, len(V_BASIS)))


def find_differential_potential(
    P: Expr, rule: SolveRule | None = None, cfg: ZeroTestConfig | None = None
) -> Expr | None:
    """V2 with (S₊ − 1)P ≡ D̄V2."""
    target = sub(shift(P, 1), P)
    c = fit_combination(target, _dbar_cols(V_BASIS), rule, cfg)
    return None if c is None else _assemble(c, V_BASIS)


def find_difference_potential(
    C: Expr, rule: SolveRule | None = None, cfg: ZeroTestConfig | None = None
) -> Expr | None:
    """W2 with D̄C ≡ (S₊ − 1)W2."""
    target = total_derivative(C)
    c = fit_combination(target, _diff_cols(W_BASIS, -1), rule, cfg)
    return None if c is None else _assemble(c, W_BASIS)
