"""Method-of-steps integration of second-order delay equations.

Equations are integrated in standard form, with the newest point at ``t``::

    ü(t) = F(t, u, u̇, u(t−τ), u̇(t−τ), ü(t−τ), u(t−2τ), u̇(t−2τ), ü(t−2τ))

(or ``u̇(t) = F(...)`` in first-order mode).  The trajectory is a list of
segments of length τ on a common grid of step h with τ/h an integer.
Each segment stores u, u̇, ü at its nodes and at the midpoints of its
steps, so every delayed read made by RK4 is a table lookup.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .delay import shift, total_derivative
from .diff import diff
from .expr import Expr, ExprError, Family, JetVar, as_expr, substitute
from .numeric import lambdify

__all__ = [
    "SolverError", "HistorySegment", "Trajectory", "DodeProblem",
    "make_history", "to_standard_form", "integrate_steps",
    "MonitorResult", "DifferenceMonitorResult", "monitor_differential",
    "monitor_difference", "recursion_solve", "write_csv",
]

_T = lambda k=0: JetVar(Family.T, k)
_U = lambda k=0, d=0: JetVar(Family.U, k, d)


class SolverError(ExprError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HistorySegment:
    """u, u̇, ü on [a, b] at the grid nodes and step midpoints."""

    a: float
    h: float
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray
    u_mid: np.ndarray
    du_mid: np.ndarray
    ddu_mid: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.u) - 1
        if n < 1 or any(len(x) != n + 1 for x in (self.du, self.ddu)) or any(
            len(x) != n for x in (self.u_mid, self.du_mid, self.ddu_mid)
        ):
            raise SolverError("inconsistent segment arrays")

    @property
    def steps(self) -> int:
        return len(self.u) - 1

    @property
    def b(self) -> float:
        return self.a + self.steps * self.h

    @property
    def times(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.steps + 1)

    def query(self, t: float) -> tuple[float, float, float]:
        """Cubic Hermite values of (u, u̇) and a quadratic for ü."""
        tol = 1e-9 * self.h
        if t < self.a - tol or t > self.b + tol:
            raise SolverError(f"t = {t!r} lies outside [{self.a!r}, {self.b!r}]")
        s = min(max((t - self.a) / self.h, 0.0), float(self.steps))
        i = min(int(s), self.steps - 1)
        x = s - i
        h = self.h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        u = h00 * self.u[i] + h10 * h * self.du[i] + h01 * self.u[i + 1] + h11 * h * self.du[i + 1]
        du = h00 * self.du[i] + h10 * h * self.ddu[i] + h01 * self.du[i + 1] + h11 * h * self.ddu[i + 1]
        # Lagrange quadratic through node, midpoint, node
        l0 = 2 * (x - 0.5) * (x - 1)
        l1 = -4 * x * (x - 1)
        l2 = 2 * x * (x - 0.5)
        ddu = l0 * self.ddu[i] + l1 * self.ddu_mid[i] + l2 * self.ddu[i + 1]
        return float(u), float(du), float(ddu)

    def split(self, steps: int) -> list["HistorySegment"]:
        if self.steps % steps:
            raise SolverError("segment length is not a multiple of the requested piece")
        out = []
        for s in range(0, self.steps, steps):
            out.append(HistorySegment(
                self.a + s * self.h, self.h,
                self.u[s:s + steps + 1], self.du[s:s + steps + 1], self.ddu[s:s + steps + 1],
                self.u_mid[s:s + steps], self.du_mid[s:s + steps], self.ddu_mid[s:s + steps],
            ))
        return out


def make_history(
    phi: Expr | str,
    interval: tuple[float, float],
    h: float,
    params: Mapping[str, float] | None = None,
) -> HistorySegment:
    """Sample φ, φ̇, φ̈ on a uniform grid over ``interval``."""
    from .syntax import parse

    phi = parse(phi, tuple(params or ())) if isinstance(phi, str) else as_expr(phi)
    if phi.free_vars - {_T()}:
        raise SolverError("initial function may depend on t only")
    a, b = map(float, interval)
    n = int(round((b - a) / h))
    if n < 1 or abs(n * h - (b - a)) > 1e-9 * max(1.0, abs(b - a)):
        raise SolverError("interval length must be a positive multiple of h")
    pnames = sorted(params or {})
    pvals = [float(params[k]) for k in pnames]
    fns = [lambdify(e, [_T(), *pnames], vectorized=True)
           for e in (phi, diff(phi, _T()), diff(diff(phi, _T()), _T()))]
    nodes = a + h * np.arange(n + 1)
    mids = nodes[:-1] + 0.5 * h

    def ev(f, ts):
        return np.broadcast_to(np.asarray(f(ts, *pvals), dtype=float), ts.shape)

    return HistorySegment(
        a, h,
        _frozen(ev(fns[0], nodes)), _frozen(ev(fns[1], nodes)), _frozen(ev(fns[2], nodes)),
        _frozen(ev(fns[0], mids)), _frozen(ev(fns[1], mids)), _frozen(ev(fns[2], mids)),
    )


@dataclass(frozen=True)
class Trajectory:
    segments: tuple[HistorySegment, ...]
    tau: float
    h: float
    t0: float

    def __post_init__(self) -> None:
        for s1, s2 in zip(self.segments, self.segments[1:]):
            if abs(s1.b - s2.a) > 1e-9 * self.h:
                raise SolverError("segments are not contiguous")

    @property
    def steps_per_delay(self) -> int:
        return int(round(self.tau / self.h))

    @property
    def t_start(self) -> float:
        return self.segments[0].a

    @property
    def t_end(self) -> float:
        return self.segments[-1].b

    def nodes(self, side: str = "right") -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Global node arrays (t, u, u̇, ü).

        Derivatives may jump where segments meet; ``side`` picks the right
        or left limit there (the outermost nodes have only one).
        """
        segs = self.segments
        out = []
        for name in ("u", "du", "ddu"):
            if side == "right":
                parts = [getattr(s, name)[:-1] for s in segs] + [getattr(segs[-1], name)[-1:]]
            elif side == "left":
                parts = [getattr(segs[0], name)[:1]] + [getattr(s, name)[1:] for s in segs]
            else:
                raise ValueError("side must be 'right' or 'left'")
            out.append(np.concatenate(parts))
        t = self.t_start + self.h * np.arange(len(out[0]))
        return (t, *out)

    def query(self, t: float) -> tuple[float, float, float]:
        for s in self.segments:
            if t < s.b or s is self.segments[-1]:
                return s.query(t)
        raise SolverError(f"t = {t!r} is outside the trajectory")  # pragma: no cover

    def to_csv(self, path: str | Path) -> None:
        t, u, du, ddu = self.nodes()
        write_csv(path, ("t", "u", "du", "ddu"), zip(t, u, du, ddu))


def write_csv(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def to_standard_form(e: Expr) -> Expr:
    """Translate an expression centred on (t⁻, t, t⁺) to (t−2τ, t−τ, t)."""
    return shift(as_expr(e), -1)


_DELAYED = tuple(v for k in (-1, -2) for v in (_T(k), _U(k), _U(k, 1), _U(k, 2)))


@dataclass(frozen=True)
class DodeProblem:
    """ü(t) = F (order 2) or u̇(t) = F (order 1), F in standard form."""

    rhs: Expr
    tau: float
    phi: Expr
    t0: float
    T: float
    h: float
    order: int = 2
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "rhs", as_expr(self.rhs))
        object.__setattr__(self, "phi", as_expr(self.phi))
        if self.order not in (1, 2):
            raise SolverError("order must be 1 or 2")
        if self.tau <= 0 or self.h <= 0 or self.T <= self.t0:
            raise SolverError("need tau > 0, h > 0 and T > t0")
        allowed = {_T(), _U()} | set(_DELAYED)
        if self.order == 2:
            allowed.add(_U(0, 1))
        extra = sorted(self.rhs.free_vars - allowed, key=lambda v: v.sort_key)
        if extra:
            raise SolverError(
                "right-hand side may not contain " + ", ".join(v.name for v in extra)
                + " in standard form"
            )

    @classmethod
    def from_solved(cls, lead: JetVar, value: Expr, **kw) -> "DodeProblem":
        """Build from ``lead = value`` centred on t (lead is ü⁺ or u̇⁺)."""
        if lead.family is not Family.U or lead.offset != 1 or lead.order not in (1, 2):
            raise SolverError(f"cannot integrate an equation solved for {lead.name}")
        return cls(to_standard_form(value), order=lead.order, **kw)


def _compile(p: DodeProblem) -> tuple[Callable, Callable | None, list[str]]:
    pnames = sorted(set(p.params) | (p.rhs.free_params - {"pi"}))
    head = [_T(), _U()] + ([_U(0, 1)] if p.order == 2 else [])
    F = lambdify(p.rhs, head + list(_DELAYED) + pnames)
    G = None
    if p.order == 1:
        g = substitute(total_derivative(p.rhs), {_U(0, 1): p.rhs})
        G = lambdify(g, head + list(_DELAYED) + pnames)
    return F, G, pnames


def integrate_steps(p: DodeProblem) -> Trajectory:
    """Classical RK4 on (u, u̇), one delay interval at a time."""
    m = int(round(p.tau / p.h))
    if m < 1 or abs(m * p.h - p.tau) > 1e-9 * p.tau:
        raise SolverError("tau must be an integer multiple of h")
    total = int(round((p.T - p.t0) / p.h))
    if abs(total * p.h - (p.T - p.t0)) > 1e-9 * max(1.0, abs(p.T)):
        raise SolverError("T - t0 must be a multiple of h")
    params = {"tau": p.tau, **p.params}
    F, G, pnames = _compile(p)
    missing = [k for k in pnames if k not in params]
    if missing:
        raise SolverError(f"unbound parameters: {', '.join(missing)}")
    pv = [float(params[k]) for k in pnames]
    hist = make_history(p.phi, (p.t0 - 2 * p.tau, p.t0), p.h, params)
    segs = hist.split(m)
    h, tau = p.h, p.tau
    done = 0
    while done < total:
        n = min(m, total - done)
        a = p.t0 + done * h
        s1, s2 = segs[-1], segs[-2]
        D = [(a + i * h - tau, s1.u[i], s1.du[i], s1.ddu[i],
              a + i * h - 2 * tau, s2.u[i], s2.du[i], s2.ddu[i]) for i in range(n + 1)]
        Dm = [(a + (i + .5) * h - tau, s1.u_mid[i], s1.du_mid[i], s1.ddu_mid[i],
               a + (i + .5) * h - 2 * tau, s2.u_mid[i], s2.du_mid[i], s2.ddu_mid[i]) for i in range(n)]
        try:
            if p.order == 2:
                arrays = _rk4_second(F, pv, a, h, n, segs[-1].u[-1], segs[-1].du[-1], D, Dm)
            else:
                arrays = _rk4_first(F, G, pv, a, h, n, segs[-1].u[-1], D, Dm)
        except (OverflowError, ZeroDivisionError, ValueError) as exc:
            raise SolverError(f"right-hand side failed in the interval from t = {a:.6g}: {exc}") from None
        segs.append(HistorySegment(a, h, *(_frozen(x) for x in arrays)))
        done += n
    return Trajectory(tuple(segs), tau, h, p.t0)


def _check(x: float, t: float) -> None:
    if not math.isfinite(x):
        raise SolverError(f"solution blew up near t = {t:.6g}")


def _rk4_second(F, pv, a, h, n, u, v, D, Dm):
    U, V, A = [u], [v], []
    Um, Vm, Am = [], [], []
    acc = F(a, u, v, *D[0], *pv)
    A.append(acc)
    for i in range(n):
        t = a + i * h
        k1u, k1v = v, acc
        k2u = v + 0.5 * h * k1v
        k2v = F(t + 0.5 * h, u + 0.5 * h * k1u, k2u, *Dm[i], *pv)
        k3u = v + 0.5 * h * k2v
        k3v = F(t + 0.5 * h, u + 0.5 * h * k2u, k3u, *Dm[i], *pv)
        k4u = v + h * k3v
        k4v = F(t + h, u + h * k3u, k4u, *D[i + 1], *pv)
        un = u + h * (k1u + 2 * k2u + 2 * k3u + k4u) / 6
        vn = v + h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6
        _check(un + vn, t + h)
        accn = F(t + h, un, vn, *D[i + 1], *pv)
        um = 0.5 * (u + un) + h * (v - vn) / 8
        vm = 0.5 * (v + vn) + h * (acc - accn) / 8
        Um.append(um)
        Vm.append(vm)
        Am.append(F(t + 0.5 * h, um, vm, *Dm[i], *pv))
        U.append(un)
        V.append(vn)
        A.append(accn)
        u, v, acc = un, vn, accn
    return U, V, A, Um, Vm, Am


def _rk4_first(F, G, pv, a, h, n, u, D, Dm):
    U, V, A = [u], [F(a, u, *D[0], *pv)], [G(a, u, *D[0], *pv)]
    Um, Vm, Am = [], [], []
    for i in range(n):
        t = a + i * h
        k1 = V[-1]
        k2 = F(t + 0.5 * h, u + 0.5 * h * k1, *Dm[i], *pv)
        k3 = F(t + 0.5 * h, u + 0.5 * h * k2, *Dm[i], *pv)
        k4 = F(t + h, u + h * k3, *D[i + 1], *pv)
        un = u + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        _check(un, t + h)
        vn = F(t + h, un, *D[i + 1], *pv)
        um = 0.5 * (u + un) + h * (k1 - vn) / 8
        Um.append(um)
        Vm.append(F(t + 0.5 * h, um, *Dm[i], *pv))
        Am.append(G(t + 0.5 * h, um, *Dm[i], *pv))
        U.append(un)
        V.append(vn)
        A.append(G(t + h, un, *D[i + 1], *pv))
        u = un
    return U, V, A, Um, Vm, Am


# ---------------------------------------------------------------------------
# monitors


@dataclass(frozen=True)
class MonitorResult:
    mean: float
    max_drift: float
    reference: float
    times: np.ndarray
    series: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, ("t", "value"), zip(self.times, self.series))


@dataclass(frozen=True)
class DifferenceMonitorResult:
    max_violation: float
    times: np.ndarray
    series: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, ("t", "value"), zip(self.times, self.series))


def _expr_of(fi) -> Expr:
    return fi.expr if hasattr(fi, "expr") else as_expr(fi)


def _evaluate_on(e: Expr, tr: Trajectory, idx: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
    # one-sided limits throughout, so jumps at the junctions t0 + kτ never mix
    t, u, du, ddu = tr.nodes("left")
    m = tr.steps_per_delay
    vs = e.sorted_vars()
    pnames = sorted(e.free_params - {"pi"})
    pmap = {"tau": tr.tau, **params}
    missing = [k for k in pnames if k not in pmap]
    if missing:
        raise SolverError(f"unbound parameters: {', '.join(missing)}")
    cols = []
    for v in vs:
        j = idx + v.offset * m
        if j.min() < 0 or j.max() >= len(t):
            raise SolverError(f"{v.name} reaches outside the trajectory")
        if v.family is Family.T:
            cols.append(t[j])
        elif v.order <= 2:
            cols.append((u, du, ddu)[v.order][j])
        else:
            raise SolverError(f"{v.name} is not stored on the trajectory")
    f = lambdify(e, vs + pnames, vectorized=True)
    with np.errstate(all="ignore"):
        out = np.asarray(f(*cols, *[float(pmap[k]) for k in pnames]), dtype=float)
    return np.broadcast_to(out, idx.shape).copy()


def _window(tr: Trajectory) -> np.ndarray:
    m = tr.steps_per_delay
    t, *_ = tr.nodes()
    lo = int(round((tr.t0 + tr.tau - tr.t_start) / tr.h))
    hi = len(t) - 1 - m
    if hi < lo:
        raise SolverError("monitor window [t0 + tau, T - tau] is empty")
    return np.arange(lo, hi + 1)


def monitor_differential(fi, tr: Trajectory, params: Mapping[str, float] | None = None) -> MonitorResult:
    """Values of I along the trajectory and the largest departure from I(t0 + τ)."""
    kind = getattr(fi, "kind", None)
    if kind is not None and kind.value != "differential":
        raise SolverError("monitor_differential needs a differential first integral")
    idx = _window(tr)
    vals = _evaluate_on(_expr_of(fi), tr, idx, params or {})
    drift = np.abs(vals - vals[0])
    t, *_ = tr.nodes()
    return MonitorResult(float(vals.mean()), float(drift.max()), float(vals[0]), t[idx], vals)


def monitor_difference(fi, tr: Trajectory, params: Mapping[str, float] | None = None) -> DifferenceMonitorResult:
    """|J(t + τ) − J(t)| along the trajectory."""
    kind = getattr(fi, "kind", None)
    if kind is not None and kind.value != "difference":
        raise SolverError("monitor_difference needs a difference first integral")
    idx = _window(tr)
    e = _expr_of(fi)
    gap = np.abs(_evaluate_on(shift(e, 1), tr, idx, params or {}) - _evaluate_on(e, tr, idx, params or {}))
    t, *_ = tr.nodes()
    return DifferenceMonitorResult(float(gap.max()), t[idx], gap)


# ---------------------------------------------------------------------------
# recursion


def recursion_solve(
    coeffs: Sequence[float],
    g: Expr,
    history: HistorySegment,
    T: float,
    tau: float,
    params: Mapping[str, float] | None = None,
) -> Trajectory:
    """Extend u by c₀u(t) + c₁u(t−τ) + c₂u(t−2τ) = g(t), no integration involved.

    ``history`` must cover [t₀ − 2τ, t₀]; u̇ and ü follow from the
    differentiated relation.
    """
    c0, c1, c2 = (float(c) for c in coeffs)
    if c0 == 0:
        raise SolverError("the coefficient on u(t) must be nonzero")
    g = as_expr(g)
    if g.free_vars - {_T()}:
        raise SolverError("g may depend on t only")
    h = history.h
    m = int(round(tau / h))
    if m < 1 or abs(m * h - tau) > 1e-9 * tau or history.steps != 2 * m:
        raise SolverError("history must span two delays on a grid with tau/h integer")
    pmap = {"tau": tau, **(params or {})}
    pnames = sorted(g.free_params - {"pi"})
    fns = [lambdify(e, [_T(), *pnames], vectorized=True)
           for e in (g, diff(g, _T()), diff(diff(g, _T()), _T()))]
    pv = [float(pmap[k]) for k in pnames]

    def gv(f, ts):
        return np.broadcast_to(np.asarray(f(ts, *pv), dtype=float), ts.shape)

    segs = history.split(m)
    t0 = history.b
    total = int(round((T - t0) / h))
    done = 0
    while done < total:
        n = min(m, total - done)
        a = t0 + done * h
        s1, s2 = segs[-1], segs[-2]
        nodes = a + h * np.arange(n + 1)
        mids = nodes[:-1] + 0.5 * h
        arrays = []
        for ts, sl, fld in ((nodes, slice(0, n + 1), ""), (mids, slice(0, n), "_mid")):
            for d, f in enumerate(fns):
                name = ("u", "du", "ddu")[d] + fld
                prev1 = getattr(s1, name)[sl]
                prev2 = getattr(s2, name)[sl]
                arrays.append((gv(f, ts) - c1 * prev1 - c2 * prev2) / c0)
        u, du, ddu, um, dum, ddum = arrays
        segs.append(HistorySegment(a, h, *(_frozen(x) for x in (u, du, ddu, um, dum, ddum))))
        done += n
    return Trajectory(tuple(segs), tau, h, t0)
