import csv
import math

import numpy as np
import pytest

from delaynoether.expr import Const, JetVar, Family
from delaynoether.noether import FirstIntegral, IntegralKind
from delaynoether.solver import (
    DodeProblem, SolverError, integrate_steps, make_history, monitor_difference,
    monitor_differential, recursion_solve, to_standard_form,
)
from delaynoether.syntax import parse
from delaynoether.variational import DelayLagrangian, elsgolts_derivative, horizontal_derivative

OSC1 = DelayLagrangian.from_text("du*dum - u*um")
DEGEN = DelayLagrangian.from_text("(u - um)/(t - tm)*du")


def solve(L, which, phi, T, h=1e-3, tau=1.0, t0=0.0):
    rule = (elsgolts_derivative if which == "E" else horizontal_derivative)(L).rule
    p = DodeProblem.from_solved(rule.lead, rule.value, tau=tau, phi=parse(phi), t0=t0, T=T, h=h)
    return integrate_steps(p)


@pytest.fixture(scope="module")
def sin_run():
    return solve(OSC1, "E", "sin(t)", 10.0)


class TestHistory:
    def test_sin(self):
        seg = make_history("sin(t)", (-2.0, 0.0), 1e-2)
        assert seg.u[-1] == pytest.approx(0.0, abs=1e-15)
        assert seg.du[-1] == pytest.approx(1.0)
        assert seg.steps == 200 and seg.b == pytest.approx(0.0)

    def test_square(self):
        seg = make_history("t^2", (0.0, 1.0), 0.125)
        assert np.array_equal(seg.du, 2 * seg.times)
        assert np.all(seg.ddu == 2)

    def test_hermite_query(self):
        seg = make_history("sin(t)", (0.0, 1.0), 1e-2)
        u, du, ddu = seg.query(0.505)
        assert u == pytest.approx(math.sin(0.505), abs=1e-9)
        assert du == pytest.approx(math.cos(0.505), abs=1e-7)
        assert ddu == pytest.approx(-math.sin(0.505), abs=1e-5)
        with pytest.raises(SolverError):
            seg.query(1.5)

    def test_rejects_u(self):
        with pytest.raises(SolverError):
            make_history("u + t", (0.0, 1.0), 0.1)

    def test_grid_mismatch(self):
        with pytest.raises(SolverError):
            make_history("t", (0.0, 1.0), 0.3)


class TestIntegrate:
    def test_exact_solution(self, sin_run):
        t, u, du, _ = sin_run.nodes()
        assert t[0] == pytest.approx(-2.0) and t[-1] == pytest.approx(10.0)
        assert np.max(np.abs(u - np.sin(t))) < 1e-6
        assert np.max(np.abs(du - np.cos(t))) < 1e-6

    def test_linear_continuation(self):
        p = DodeProblem(Const(0), tau=0.5, phi=parse("t"), t0=0.0, T=2.0, h=0.01)
        t, u, *_ = integrate_steps(p).nodes()
        assert np.allclose(u, t, atol=1e-12)

    def test_first_order_periodicity(self):
        tr = solve(DEGEN, "E", "sin(pi*t)", 6.0, h=1e-3)
        m = tr.steps_per_delay
        t, u, du, _ = tr.nodes("left")
        gap = du[2 * m:] - du[:-2 * m]
        assert np.max(np.abs(gap)) < 1e-6
        assert np.ptp(du) > 1.0

    def test_standard_form(self):
        assert to_standard_form(parse("-up - um - ddum")) == parse("-u - umm - ddumm")

    def test_errors(self):
        with pytest.raises(SolverError, match="multiple of h"):
            integrate_steps(DodeProblem(parse("u"), tau=1.0, phi=parse("t"), t0=0.0, T=1.0, h=0.3))
        with pytest.raises(SolverError):
            DodeProblem(parse("u"), tau=-1.0, phi=parse("t"), t0=0.0, T=1.0, h=0.1)
        with pytest.raises(SolverError, match="may not contain"):
            DodeProblem(parse("up"), tau=1.0, phi=parse("t"), t0=0.0, T=1.0, h=0.1)
        with pytest.raises(SolverError):
            DodeProblem.from_solved(JetVar(Family.U, 0, 2), parse("u"), tau=1.0, phi=parse("t"),
                                    t0=0.0, T=1.0, h=0.1)

    def test_blow_up_reported(self):
        p = DodeProblem(parse("exp(u)^4"), tau=1.0, phi=parse("t + 3"), t0=0.0, T=5.0, h=0.1)
        with pytest.raises(SolverError, match="t ="):
            integrate_steps(p)

    def test_csv(self, tmp_path, sin_run):
        path = tmp_path / "traj.csv"
        sin_run.to_csv(path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["t", "u", "du", "ddu"]
        assert len(rows) == 12001 + 1


class TestMonitors:
    def test_osc1_integrals(self, sin_run):
        I1 = FirstIntegral(IntegralKind.DIFFERENTIAL, parse("cos(t)*(dup + dum) + sin(t)*(up + um)"))
        I2 = FirstIntegral(IntegralKind.DIFFERENTIAL, parse("sin(t)*(dup + dum) - cos(t)*(up + um)"))
        r1, r2 = monitor_differential(I1, sin_run), monitor_differential(I2, sin_run)
        assert r1.max_drift < 1e-6 and r1.mean == pytest.approx(2 * math.cos(1.0), abs=1e-6)
        assert r2.max_drift < 1e-6 and abs(r2.mean) < 1e-6

    def test_constant(self, sin_run):
        r = monitor_differential(Const(3), sin_run)
        assert r.max_drift == 0.0 and r.mean == 3.0
        assert monitor_difference(Const(3), sin_run).max_violation == 0.0

    def test_kind_checked(self, sin_run):
        with pytest.raises(SolverError):
            monitor_difference(FirstIntegral(IntegralKind.DIFFERENTIAL, Const(1)), sin_run)

    def test_difference_periodicity(self):
        tr = solve(DEGEN, "E", "sin(pi*t)", 6.0)
        J1 = FirstIntegral(IntegralKind.DIFFERENCE, parse("(du + dum)/(t - tm)"))
        r = monitor_difference(J1, tr)
        assert r.max_violation < 1e-6
        assert np.ptp(monitor_difference(parse("du"), tr).series) > 0.1

    def test_horizontal_j3(self):
        tr = solve(DEGEN, "H", "t + 2 + sin(t)/3", 6.0)
        r = monitor_difference(parse("du*(u - um)/(t - tm)^2"), tr)
        assert r.max_violation < 1e-6

    def test_monitor_csv(self, tmp_path, sin_run):
        r = monitor_differential(parse("u"), sin_run)
        r.to_csv(tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_text().startswith("t,value\n")

    def test_empty_window(self):
        tr = solve(OSC1, "E", "sin(t)", 1.0)
        with pytest.raises(SolverError):
            monitor_differential(parse("u"), tr)


class TestRecursion:
    def test_sin_exact(self):
        h = 1e-3
        hist = make_history("sin(t)", (-2.0, 0.0), h)
        # u(t) + u(t - 2) = A sin(t - 1) - B cos(t - 1) with A = 2cos(1), B = 0
        g = parse("2*cos(1)*sin(t - 1)")
        tr = recursion_solve((1, 0, 1), g, hist, 4.0, 1.0)
        t, u, du, _ = tr.nodes()
        assert np.max(np.abs(u - np.sin(t))) < 1e-9
        assert np.max(np.abs(du - np.cos(t))) < 1e-9

    def test_matches_integration(self):
        tr_steps = solve(OSC1, "E", "exp(t/10)", 4.0)
        hist = make_history("exp(t/10)", (-2.0, 0.0), 1e-3)
        # u(t+1) + u(t-1) = A sin t - B cos t with I1 = A, I2 = B read off the history at t = -1
        c, s = math.cos(-1.0), math.sin(-1.0)
        up, um, dup, dum = math.exp(0), math.exp(-0.2), 0.1, 0.1 * math.exp(-0.2)
        A = c * (dup + dum) + s * (up + um)
        B = s * (dup + dum) - c * (up + um)
        g = parse(f"({A!r})*sin(t - 1) - ({B!r})*cos(t - 1)")
        tr = recursion_solve((1, 0, 1), g, hist, 4.0, 1.0)
        _, u1, *_ = tr_steps.nodes()
        _, u2, *_ = tr.nodes()
        assert np.max(np.abs(u1 - u2)) < 1e-5

    def test_zero_lead(self):
        hist = make_history("t", (-2.0, 0.0), 0.5)
        with pytest.raises(SolverError):
            recursion_solve((0, 1, 1), parse("t"), hist, 2.0, 1.0)
