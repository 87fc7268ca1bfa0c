"""Seeded random expressions shared by the property tests."""

from __future__ import annotations

import random
from fractions import Fraction

from delaynoether.delay import Generator
from delaynoether.expr import Const, Expr, Family, JetVar, Var, add, apply_fn, div, mul, power
from delaynoether.variational import DelayLagrangian

T, TM = JetVar(Family.T, 0), JetVar(Family.T, -1)
U, UM = JetVar(Family.U, 0), JetVar(Family.U, -1)
DU, DUM = JetVar(Family.U, 0, 1), JetVar(Family.U, -1, 1)
LAG_VARS = (T, TM, U, UM, DU, DUM)
GEN_VARS = (T, U)
# differential-integral and difference-integral signatures
I_VARS = tuple(JetVar(f, k, d) for k in (-1, 0, 1) for f, d in ((Family.T, 0), (Family.U, 0), (Family.U, 1)))
J_VARS = tuple(JetVar(f, k, d) for k in (-1, 0) for f, d in ((Family.T, 0), (Family.U, 0), (Family.U, 1), (Family.U, 2)))


def rand_coeff(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-5, 5) or 1, rng.randint(1, 3))


def rand_poly(rng: random.Random, vars, degree: int = 3, terms: int = 4) -> Expr:
    out = []
    for _ in range(terms):
        mono = [Const(rand_coeff(rng))]
        for _ in range(rng.randint(0, degree)):
            mono.append(Var(rng.choice(vars)))
        out.append(mul(*mono))
    return add(*out)


def rand_expr(rng: random.Random, vars, depth: int = 3) -> Expr:
    """Smooth expression (no division by possibly-vanishing terms)."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.3:
            return Const(rand_coeff(rng))
        return Var(rng.choice(vars))
    op = rng.choice(("add", "mul", "pow", "fn", "div"))
    a = rand_expr(rng, vars, depth - 1)
    if op == "add":
        return add(a, rand_expr(rng, vars, depth - 1))
    if op == "mul":
        return mul(a, rand_expr(rng, vars, depth - 1))
    if op == "pow":
        return power(a, Const(rng.randint(2, 3)))
    if op == "fn":
        return apply_fn(rng.choice(("sin", "cos", "exp")), a)
    # 2 + sin(.) stays away from zero
    return div(a, add(Const(2), apply_fn("sin", rand_expr(rng, vars, depth - 1))))


def rand_lagrangian(rng: random.Random, degree: int = 3) -> DelayLagrangian:
    return DelayLagrangian(rand_poly(rng, LAG_VARS, degree, terms=rng.randint(2, 5)))


def rand_generator(rng: random.Random, degree: int = 3, xi_t_only: bool = False) -> Generator:
    xi = rand_poly(rng, (T,) if xi_t_only else GEN_VARS, degree, terms=rng.randint(1, 3))
    eta = rand_poly(rng, GEN_VARS, degree, terms=rng.randint(1, 3))
    return Generator(xi, eta, "G")


def rand_point(rng: random.Random, vars) -> dict:
    return {v: Fraction(rng.randint(-40, 40), rng.randint(1, 9)) for v in vars}
