"""Command-line entry point: ``delaynoether <verb> ...``."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .expr import ExprError
from .pipeline import cmd_derive, cmd_noether, cmd_simulate, cmd_verify_paper, render
from .problem import ProblemError, ProblemSpec, load_problem, load_problems
from .solver import SolverError
from .syntax import ParseError, parse
from .zerotest import ZeroTestConfig, ZeroTestError, prob_zero_test

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="zero-test seed (default 0)")
    g.add_argument("--samples", type=int, default=64, help="zero-test sample count (default 64)")
    g.add_argument("--tol", type=float, default=1e-9, help="zero-test tolerance (default 1e-9)")
    g.add_argument("--out", metavar="DIR", help="write CSV artifacts and the report here")
    g.add_argument("--format", choices=("text", "json"), default="text")
    return p


def _problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("problem", help="problem file (TOML)")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="select one instance of a sweep or override a parameter")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(
        prog="delaynoether",
        description="Variational equations, Noether relations and first integrals for delay ODEs.",
    )
    sub = ap.add_subparsers(dest="verb", required=True, metavar="VERB")
    p = sub.add_parser("derive", parents=[common], help="Elsgolts, horizontal and locally extremal equations")
    _problem_args(p)
    p = sub.add_parser("noether", parents=[common], help="classify symmetries and emit first integrals")
    _problem_args(p)
    p = sub.add_parser("simulate", parents=[common], help="integrate by the method of steps and monitor integrals")
    _problem_args(p)
    p.add_argument("--run", help="name of the [[simulate]] block (default: the first)")
    p = sub.add_parser("verify-paper", parents=[common], help="run the bundled regression corpus")
    p.add_argument("--corpus", metavar="DIR", help="directory of problem files (default: bundled corpus)")
    p = sub.add_parser("zero-test", parents=[common], help="probabilistic test of expr == 0")
    p.add_argument("expr", help="expression in the canonical grammar")
    p.add_argument("--params", default="", help="comma-separated parameter names allowed in expr")
    return ap


def _config(ns: argparse.Namespace) -> ZeroTestConfig:
    return ZeroTestConfig(sample_count=ns.samples, abs_tol=ns.tol, rel_tol=ns.tol, seed=ns.seed)


def _parse_params(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ProblemError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ProblemError(f"--param {name}: {value!r} is not a number") from None
    return out


def _problems(ns: argparse.Namespace) -> list[ProblemSpec]:
    params = _parse_params(ns.param)
    if params:
        return [load_problem(ns.problem, **params)]
    return load_problems(ns.problem)


def _emit(report: dict, ns: argparse.Namespace, name: str) -> None:
    text = render(report, ns.format)
    sys.stdout.write(text)
    if ns.out:
        from pathlib import Path

        d = Path(ns.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{name}.{'json' if ns.format == 'json' else 'txt'}").write_text(text, encoding="utf-8")


def _many(reports: list[dict]) -> dict:
    return reports[0] if len(reports) == 1 else {"problems": reports}


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = _config(ns)
    except ValueError as exc:
        ap.error(str(exc))
    try:
        if ns.verb == "zero-test":
            names = tuple(x.strip() for x in ns.params.split(",") if x.strip())
            res = prob_zero_test(parse(ns.expr, names), cfg)
            _emit({"expr": ns.expr, "verdict": res.verdict, "max_residual": f"{res.max_residual:.3e}",
                   "samples": res.samples_used, "seed": res.seed}, ns, "zero_test")
            return EXIT_OK if res.verdict else EXIT_FAIL
        if ns.verb == "verify-paper":
            rep = cmd_verify_paper(ns.corpus, cfg)
            _emit(rep, ns, "verify_paper")
            if not rep["passed"]:
                print("failing: " + ", ".join(rep["failed"]), file=sys.stderr)
            return EXIT_OK if rep["passed"] else EXIT_FAIL
        specs = _problems(ns)
        if ns.verb == "derive":
            _emit(_many([cmd_derive(s, cfg) for s in specs]), ns, "derive")
            return EXIT_OK
        if ns.verb == "noether":
            _emit(_many([cmd_noether(s, cfg) for s in specs]), ns, "noether")
            return EXIT_OK
        if ns.verb == "simulate":
            reps = [cmd_simulate(s, cfg, ns.out, run=ns.run) for s in specs]
            _emit(_many(reps), ns, "simulate")
            return EXIT_FAIL if any("error" in r for r in reps) else EXIT_OK
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SolverError, ZeroTestError, ExprError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    raise AssertionError(ns.verb)  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
