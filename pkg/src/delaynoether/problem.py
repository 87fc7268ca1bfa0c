"""Problem files: a delay Lagrangian, its symmetries and optional hints.

Problem files are TOML.  Example::

    name = "osc1"
    tau = 1.0
    lagrangian = "du*dum - u*um"

    [[symmetry]]
    name = "X1"
    xi = "0"
    eta = "cos(t)"
    equation = "elsgolts"        # or "horizontal", "locally_extremal" (default)

    [[hint]]
    symmetry = "X1"
    V = "-sin(tm)*u - sin(t)*um"  # also W, V2, W2; mode = "divergence" | "modified"

    [simulate]
    phi = "sin(t)"
    t0 = 0.0
    T = 10.0
    h = 1e-3
    equation = "elsgolts"

    [[check]]                     # regression assertions run by verify-paper
    id = "I1"
    kind = "emitted"
    ...

``[[simulate]]`` may be repeated (give each run a ``name``).
Numeric parameters go in ``[params]``; ``[sweep]`` lists values to run
the problem with (one instance per combination).  ``tau`` is always
available as a symbol inside expressions; its numeric value is used
only for simulation and admissibility checks.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .delay import Generator
from .expr import Const, Expr, ExprError, Family, JetVar, substitute
from .syntax import ParseError, parse
from .variational import DelayLagrangian, EquationKind, SignatureError

__all__ = [
    "ProblemError", "SymmetrySpec", "Hint", "SimulateSpec", "CheckSpec",
    "ProblemSpec", "load_problem", "load_problems", "parse_problem",
]

EQUATION_NAMES = {k.value: k for k in EquationKind}
HINT_MODES = ("divergence", "modified")


class ProblemError(ExprError):
    def __init__(self, message: str, line: int | None = None, path: str = "") -> None:
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line
        self.path = path


@dataclass(frozen=True)
class SymmetrySpec:
    name: str
    generator: Generator
    equation: EquationKind = EquationKind.LOCALLY_EXTREMAL


@dataclass(frozen=True)
class Hint:
    symmetry: str
    mode: str = "divergence"
    V: Expr | None = None
    W: Expr | None = None
    V2: Expr | None = None
    W2: Expr | None = None


@dataclass(frozen=True)
class SimulateSpec:
    phi: Expr
    t0: float
    T: float
    h: float
    equation: str = "elsgolts"
    tau: float | None = None
    name: str = "main"


@dataclass(frozen=True)
class CheckSpec:
    id: str
    kind: str
    data: Mapping[str, Any]
    line: int | None = None


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    tau: float
    lagrangian: DelayLagrangian
    symmetries: tuple[SymmetrySpec, ...] = ()
    hints: Mapping[str, Hint] = field(default_factory=dict)
    simulations: tuple[SimulateSpec, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)
    checks: tuple[CheckSpec, ...] = ()
    description: str = ""
    source: str = ""

    def symmetry(self, name: str) -> SymmetrySpec:
        for s in self.symmetries:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def simulate(self) -> SimulateSpec | None:
        return self.simulations[0] if self.simulations else None

    def simulation(self, name: str | None = None) -> SimulateSpec:
        if name is None and self.simulations:
            return self.simulations[0]
        for r in self.simulations:
            if r.name == name:
                return r
        raise KeyError(name if name is not None else "no [simulate] block")

    def expr(self, text: str) -> Expr:
        """Parse ``text`` with this problem's parameter values substituted."""
        e = parse(text, tuple(self.params))
        if self.params:
            e = substitute(e, {k: Const(_frac(v)) for k, v in self.params.items()})
        return e


def _frac(v: float | int) -> Fraction:
    return Fraction(v) if isinstance(v, int) else Fraction(repr(float(v)))


def _line_of(text: str, needle: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if needle and needle in line:
            return i
    return None


class _Builder:
    def __init__(self, raw: Mapping[str, Any], text: str, path: str, params: Mapping[str, float]) -> None:
        self.raw = raw
        self.text = text
        self.path = path
        self.params = dict(params)

    def fail(self, message: str, needle: str = "") -> ProblemError:
        return ProblemError(message, _line_of(self.text, needle), self.path)

    def expr(self, value: Any, what: str) -> Expr:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = repr(value)
        if not isinstance(value, str):
            raise self.fail(f"{what} must be an expression string", what.split(".")[-1])
        try:
            e = parse(value, tuple(self.params))
        except ParseError as exc:
            raise self.fail(f"{what}: {exc}", value) from None
        except ExprError as exc:
            raise self.fail(f"{what}: {exc}", value) from None
        if self.params:
            e = substitute(e, {k: Const(_frac(v)) for k, v in self.params.items()})
        return e

    def number(self, table: Mapping[str, Any], key: str, what: str, default: Any = None) -> float:
        v = table.get(key, default)
        if v is None:
            raise self.fail(f"{what} is required", key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.fail(f"{what} must be a number", key)
        return float(v)

    def build(self) -> ProblemSpec:
        raw = self.raw
        known = {"name", "description", "tau", "lagrangian", "params", "sweep",
                 "symmetry", "hint", "simulate", "check"}
        for k in raw:
            if k not in known:
                raise self.fail(f"unknown key {k!r}", k)
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise self.fail("name is required", "name")
        tau = self.number(raw, "tau", "tau")
        if tau <= 0:
            raise self.fail("tau must be positive", "tau")
        if "lagrangian" not in raw:
            raise self.fail("lagrangian is required")
        Lexpr = self.expr(raw["lagrangian"], "lagrangian")
        try:
            L = DelayLagrangian(Lexpr)
        except SignatureError as exc:
            raise self.fail(str(exc), "lagrangian") from None

        syms: list[SymmetrySpec] = []
        for tab in raw.get("symmetry", []):
            sname = tab.get("name")
            if not isinstance(sname, str):
                raise self.fail("every symmetry needs a name", "[[symmetry]]")
            if any(s.name == sname for s in syms):
                raise self.fail(f"duplicate symmetry {sname!r}", sname)
            xi = self.expr(tab.get("xi", "0"), f"symmetry {sname}.xi")
            eta = self.expr(tab.get("eta", "0"), f"symmetry {sname}.eta")
            try:
                g = Generator(xi, eta, sname)
            except ExprError as exc:
                raise self.fail(f"symmetry {sname}: {exc}", sname) from None
            eq = tab.get("equation", "locally_extremal")
            if eq not in EQUATION_NAMES:
                raise self.fail(f"symmetry {sname}: unknown equation {eq!r}", eq)
            syms.append(SymmetrySpec(sname, g, EQUATION_NAMES[eq]))

        hints: dict[str, Hint] = {}
        for tab in raw.get("hint", []):
            sname = tab.get("symmetry")
            if sname not in {s.name for s in syms}:
                raise self.fail(f"hint for unknown symmetry {sname!r}", str(sname))
            mode = tab.get("mode", "divergence")
            if mode not in HINT_MODES:
                raise self.fail(f"hint mode must be one of {HINT_MODES}", mode)
            parts = {k: self.expr(tab[k], f"hint {sname}.{k}") for k in ("V", "W", "V2", "W2") if k in tab}
            hints[sname] = Hint(sname, mode, **parts)

        runs: list[SimulateSpec] = []
        tabs = raw.get("simulate", [])
        if isinstance(tabs, dict):
            tabs = [tabs]
        for i, tab in enumerate(tabs):
            phi = self.expr(tab.get("phi", ""), "simulate.phi")
            if phi.free_vars - {JetVar(Family.T, 0)}:
                raise self.fail("simulate.phi may depend on t only", "phi")
            rname = str(tab.get("name", "main" if i == 0 else f"run{i}"))
            if any(r.name == rname for r in runs):
                raise self.fail(f"duplicate simulation name {rname!r}", rname)
            runs.append(SimulateSpec(
                phi,
                self.number(tab, "t0", "simulate.t0", 0.0),
                self.number(tab, "T", "simulate.T"),
                self.number(tab, "h", "simulate.h"),
                str(tab.get("equation", "elsgolts")),
                float(tab["tau"]) if "tau" in tab else None,
                rname,
            ))

        checks = []
        for tab in raw.get("check", []):
            cid, kind = tab.get("id"), tab.get("kind")
            if not isinstance(cid, str) or not isinstance(kind, str):
                raise self.fail("every check needs an id and a kind", "[[check]]")
            where = tab.get("where", {})
            if any(self.params.get(k) not in vs for k, vs in where.items()):
                continue
            data = {k: v for k, v in tab.items() if k not in ("id", "kind", "where")}
            checks.append(CheckSpec(cid, kind, data, _line_of(self.text, f'"{cid}"')))

        return ProblemSpec(
            name=name, tau=tau, lagrangian=L, symmetries=tuple(syms), hints=hints,
            simulations=tuple(runs), params=self.params, checks=tuple(checks),
            description=str(raw.get("description", "")), source=self.path,
        )


def _read(path: str | Path) -> tuple[dict, str, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemError(f"cannot read problem file: {exc.strerror}", path=str(p)) from None
    return _decode(text, str(p)), text, str(p)


def _decode(text: str, path: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            import re

            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ProblemError(f"syntax error: {exc}", line, path) from None


def _instances(raw: Mapping[str, Any], text: str, path: str) -> list[dict[str, float]]:
    base = raw.get("params", {})
    if not isinstance(base, dict):
        raise ProblemError("params must be a table", _line_of(text, "params"), path)
    sweep = raw.get("sweep", {})
    if not sweep:
        return [dict(base)]
    keys = sorted(sweep)
    out = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        out.append({**base, **dict(zip(keys, combo))})
    return out


def parse_problem(text: str, path: str = "<string>") -> list[ProblemSpec]:
    raw = _decode(text, path)
    return [_named(_Builder(raw, text, path, ps).build(), raw, ps) for ps in _instances(raw, text, path)]


def _named(spec: ProblemSpec, raw: Mapping[str, Any], ps: Mapping[str, float]) -> ProblemSpec:
    if not raw.get("sweep"):
        return spec
    tag = ",".join(f"{k}={_fmt_num(ps[k])}" for k in sorted(raw["sweep"]))
    return replace(spec, name=f"{spec.name}[{tag}]")


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def load_problems(path: str | Path) -> list[ProblemSpec]:
    """All instances described by the file (several when it has a sweep)."""
    raw, text, p = _read(path)
    return [_named(_Builder(raw, text, p, ps).build(), raw, ps) for ps in _instances(raw, text, p)]


def load_problem(path: str | Path, **params: float) -> ProblemSpec:
    """Load one problem; ``params`` select an instance or override values."""
    raw, text, p = _read(path)
    inst = _instances(raw, text, p)
    if params:
        chosen = {**inst[0], **params}
    elif len(inst) > 1:
        raise ProblemError("file describes a sweep; pass parameter values or use load_problems", path=p)
    else:
        chosen = inst[0]
    spec = _Builder(raw, text, p, chosen).build()
    return _named(spec, raw, chosen) if params else spec
