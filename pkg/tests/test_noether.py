import random

import pytest

from delaynoether.delay import Generator
from delaynoether.expr import Const, ZERO, sub
from delaynoether.numeric import eval_exact
from delaynoether.noether import (
    FirstIntegral, IntegralKind, NoetherError, modified_integral, conditional_integrals,
    constant_delay, dd_relation, density_C, density_P, derive_recursion, identity_residual,
    to_difference_integral, to_differential_integral, verify_first_integral,
)
from delaynoether.syntax import parse
from delaynoether.variational import DelayLagrangian, elsgolts_derivative, horizontal_derivative
from delaynoether.zerotest import constant_ratio, is_zero

from randexpr import rand_generator, rand_lagrangian, rand_point

OSC1 = DelayLagrangian.from_text("du*dum - u*um")
OSC2 = DelayLagrangian.from_text("(du + dum)^2/2 - (u + um)^2/2")
NONLIN = DelayLagrangian.from_text("du*dum/(u - um)^2")
DEGEN = DelayLagrangian.from_text("(u - um)/(t - tm)*du")
X = Generator.from_text


def same(a, b):
    return is_zero(sub(a, parse(b) if isinstance(b, str) else b))


class TestDensities:
    def test_osc1(self):
        assert same(density_C(X("0", "cos(t)"), OSC1), "cos(t)*(dup + dum)")
        assert same(density_C(X("1", "0"), OSC1), "-du*dup - u*um")
        assert same(density_P(X("1", "0"), OSC1), "0")
        assert same(density_P(X("0", "cos(t)"), OSC1), "-cos(tm)*u - sin(tm)*du")

    def test_translation_in_u(self):
        L = DelayLagrangian.from_text("sin(t)*du*dum + du^3")
        assert same(density_C(X("0", "1"), L), "sin(t)*dum + 3*du^2 + sin(tp)*dup")

    def test_nonlinear_p(self):
        assert same(density_P(X("0", "1"), NONLIN), "2*du*dum/(u - um)^3")


class TestIdentity:
    @pytest.mark.parametrize("L, xi, eta", [
        (OSC1, "0", "cos(t)"), (OSC1, "1", "0"), (OSC1, "0", "u"),
        (NONLIN, "0", "u^2"), (DEGEN, "2*t", "u"), (OSC2, "0", "sin(t)"),
    ])
    def test_examples(self, L, xi, eta):
        assert is_zero(identity_residual(X(xi, eta), L))

    def test_zero_lagrangian(self):
        assert identity_residual(X("t", "u"), DelayLagrangian(ZERO)) == ZERO

    def test_random_polynomial_pairs_exact(self):
        rng = random.Random(12)
        for _ in range(30):
            L, g = rand_lagrangian(rng), rand_generator(rng)
            r = identity_residual(g, L)
            pt = rand_point(rng, sorted(r.free_vars, key=lambda v: v.sort_key))
            assert eval_exact(r, pt) == 0


class TestRelation:
    def test_osc1_x1(self):
        V = parse("-sin(tm)*u - sin(t)*um")
        r = dd_relation(X("0", "cos(t)"), OSC1, V=V, equation=elsgolts_derivative(OSC1))
        assert same(r.C_eff, "cos(t)*(dup + dum) + sin(tm)*u + sin(t)*um")
        assert same(r.P_eff, "-cos(tm)*u - sin(tm)*du")
        assert is_zero(elsgolts_derivative(OSC1).reduce(r.residual()))

    def test_osc1_translation(self):
        r = dd_relation(X("1", "0"), OSC1, equation=horizontal_derivative(OSC1))
        assert same(r.C, "-du*dup - u*um") and r.P.is_zero()

    def test_degenerate_divergence(self):
        g = X("0", "t")
        r = dd_relation(g, DEGEN, V=parse("u"), W=parse("-um/(t - tm)"), equation=elsgolts_derivative(DEGEN))
        assert is_zero(elsgolts_derivative(DEGEN).reduce(r.residual()))

    def test_rejects_non_symmetry(self):
        with pytest.raises(NoetherError):
            dd_relation(X("0", "u"), OSC1, equation=elsgolts_derivative(OSC1))

    def test_default_equation_is_locally_extremal(self):
        r = dd_relation(X("1", "0"), OSC1)
        assert r.equation.label == "locally_extremal[X]"


class TestConversions:
    def test_osc1_i1(self):
        r = dd_relation(X("0", "cos(t)"), OSC1, V=parse("-sin(tm)*u - sin(t)*um"),
                        equation=elsgolts_derivative(OSC1))
        fi = to_differential_integral(r, parse("-sin(t)*up + sin(tm)*u"))
        assert fi.kind is IntegralKind.DIFFERENTIAL and fi.verification.verdict
        assert same(fi.expr, "cos(t)*(dup + dum) + sin(t)*(up + um)")

    def test_wrong_potential(self):
        r = dd_relation(X("0", "cos(t)"), OSC1, V=parse("-sin(tm)*u - sin(t)*um"),
                        equation=elsgolts_derivative(OSC1))
        with pytest.raises(NoetherError):
            to_differential_integral(r, ZERO)

    def test_degenerate_x1(self):
        r = dd_relation(X("0", "1"), DEGEN, equation=elsgolts_derivative(DEGEN))
        fi = to_differential_integral(r, parse("-(up - u)/(t - tm)"))
        assert same(fi.expr, "(up - um)/(t - tm)") and fi.verification.verdict
        fj = to_difference_integral(r, parse("dum/(t - tm)"))
        # sign of the delayed velocity follows from the relation, not from the displayed form
        assert same(fj.expr, "-(du + dum)/(t - tm)") and fj.verification.verdict
        bad = FirstIntegral(IntegralKind.DIFFERENCE, parse("(du - dum)/(t - tm)"), r.equation)
        assert not verify_first_integral(bad).verdict

    def test_degenerate_x3(self):
        r = dd_relation(X("1", "0"), DEGEN, equation=horizontal_derivative(DEGEN))
        assert r.C.is_zero()
        fj = to_difference_integral(r)
        assert same(fj.expr, "du*(u - um)/(t - tm)^2") and fj.verification.verdict

    def test_p_zero_gives_c(self):
        r = dd_relation(X("1", "0"), OSC1, equation=horizontal_derivative(OSC1))
        assert same(to_differential_integral(r).expr, r.C)


class TestConditional:
    def test_nonlinear_x1(self):
        r = dd_relation(X("0", "1"), NONLIN, equation=elsgolts_derivative(NONLIN))
        c = conditional_integrals(r)
        I = c.differential_under_difference_constraint
        assert I.conditional and I.constraint_kind == "vanishes"
        assert same(I.expr, "dum/(u - um)^2 + dup/(up - u)^2")
        assert same(I.constraint, "2*dup*du/(up - u)^3 - 2*du*dum/(u - um)^3")
        J = c.difference_under_differential_constraint
        assert J.constraint_kind == "constant" and same(J.expr, "2*du*dum/(u - um)^3")

    def test_nonlinear_x2(self):
        r = dd_relation(X("0", "u"), NONLIN, equation=elsgolts_derivative(NONLIN))
        I = conditional_integrals(r).differential_under_difference_constraint
        want = "(up + u)*dup*du/(up - u)^3 - (u + um)*du*dum/(u - um)^3"
        assert constant_ratio(I.constraint, parse(want)) is not None

    def test_p_zero_unconditional(self):
        r = dd_relation(X("1", "0"), OSC1, equation=horizontal_derivative(OSC1))
        assert not conditional_integrals(r).differential_under_difference_constraint.conditional


class TestModified:
    def test_osc2_x1(self):
        fi = modified_integral(X("0", "cos(t)"), OSC2, parse("-sin(t)*(up + 2*u + um)"),
                               equation=elsgolts_derivative(OSC2))
        assert same(fi.expr, "cos(t)*(dup + 2*du + dum) + sin(t)*(up + 2*u + um)")
        assert fi.verification.verdict

    def test_osc2_x3_sign(self):
        fi = modified_integral(X("1", "0"), OSC2, equation=horizontal_derivative(OSC2))
        minus = parse("-dup*du - 3/2*du^2 + 1/2*dum^2 - (u + um)^2/2")
        plus = parse("-dup*du - 3/2*du^2 + 1/2*dum^2 + (u + um)^2/2")
        assert fi.verification.verdict and same(fi.expr, minus)
        eq = horizontal_derivative(OSC2)
        assert verify_first_integral(FirstIntegral(IntegralKind.DIFFERENTIAL, minus, eq)).verdict
        assert not verify_first_integral(FirstIntegral(IntegralKind.DIFFERENTIAL, plus, eq)).verdict

    def test_non_symmetry(self):
        with pytest.raises(NoetherError):
            modified_integral(X("0", "u"), OSC2, equation=elsgolts_derivative(OSC2))


class TestVerify:
    def test_constant(self):
        fi = FirstIntegral(IntegralKind.DIFFERENTIAL, Const(7))
        assert verify_first_integral(fi, elsgolts_derivative(NONLIN).rule).verdict

    def test_osc1(self):
        E, H = elsgolts_derivative(OSC1), horizontal_derivative(OSC1)
        I1 = FirstIntegral(IntegralKind.DIFFERENTIAL, parse("cos(t)*(dup + dum) + sin(t)*(up + um)"), E)
        assert verify_first_integral(I1).verdict
        I3 = parse("-du*dup - u*um")
        r = verify_first_integral(FirstIntegral(IntegralKind.DIFFERENTIAL, I3), E.rule)
        assert not r.verdict and r.max_residual > 1e-6
        assert verify_first_integral(FirstIntegral(IntegralKind.DIFFERENTIAL, I3), H.rule).verdict

    def test_needs_equation(self):
        with pytest.raises(NoetherError):
            verify_first_integral(FirstIntegral(IntegralKind.DIFFERENTIAL, Const(1)))

    def test_signature(self):
        with pytest.raises(NoetherError):
            FirstIntegral(IntegralKind.DIFFERENCE, parse("up"))


class TestRecursion:
    def test_osc1(self):
        I1 = parse("cos(t)*(dup + dum) + sin(t)*(up + um)")
        I2 = parse("sin(t)*(dup + dum) - cos(t)*(up + um)")
        rel = derive_recursion(I1, I2)
        ratio = rel.coeffs[0]
        assert tuple(c / ratio for c in rel.coeffs) == (1, 0, 1)

    def test_not_linear(self):
        assert derive_recursion(parse("du*dup - u*um"), parse("du^2")) is None

    def test_constant_delay(self):
        e = constant_delay(parse("tp - tm"))
        assert same(e, parse("2*tau", ["tau"]))
