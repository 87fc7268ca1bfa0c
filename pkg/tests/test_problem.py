from importlib import resources

import pytest

from delaynoether.problem import ProblemError, load_problem, load_problems, parse_problem
from delaynoether.variational import EquationKind

CORPUS = resources.files("delaynoether") / "corpus"

MINIMAL = """
name = "m"
tau = 0.5
lagrangian = "du*dum"
"""


def test_load_osc1():
    spec = load_problem(CORPUS / "osc1.toml")
    assert spec.name == "osc1" and spec.tau == 1.0
    assert [s.name for s in spec.symmetries] == ["X1", "X2", "X3", "X4"]
    assert spec.symmetry("X3").equation is EquationKind.HORIZONTAL
    assert spec.hints["X1"].V2 is not None
    assert spec.simulate.h == 1e-3 and spec.simulate.name == "main"
    assert len(spec.checks) > 10


def test_minimal_file():
    (spec,) = parse_problem(MINIMAL)
    assert spec.symmetries == () and spec.simulate is None
    with pytest.raises(KeyError):
        spec.simulation()


def test_signature_error_points_at_lagrangian():
    text = MINIMAL.replace('"du*dum"', '"up*u"')
    with pytest.raises(ProblemError) as ei:
        parse_problem(text, "bad.toml")
    assert ei.value.line == 4 and "up" in str(ei.value) and str(ei.value).startswith("bad.toml:4:")


def test_expression_error_line():
    text = MINIMAL + '\n[[symmetry]]\nname = "X"\nxi = "0"\neta = "cos(t"\n'
    with pytest.raises(ProblemError) as ei:
        parse_problem(text)
    assert ei.value.line == 9


def test_toml_syntax_error():
    with pytest.raises(ProblemError) as ei:
        parse_problem('name = "x"\ntau = = 1\n')
    assert ei.value.line == 2


def test_missing_tau():
    with pytest.raises(ProblemError, match="tau"):
        parse_problem('name = "x"\nlagrangian = "du"\n')


def test_unknown_key():
    with pytest.raises(ProblemError, match="lagrangain"):
        parse_problem(MINIMAL + 'lagrangain = "u"\n')


def test_generator_signature():
    text = MINIMAL + '[[symmetry]]\nname = "X"\nxi = "du"\neta = "0"\n'
    with pytest.raises(ProblemError, match="t and u"):
        parse_problem(text)


def test_hint_for_unknown_symmetry():
    with pytest.raises(ProblemError, match="Y"):
        parse_problem(MINIMAL + '[[hint]]\nsymmetry = "Y"\nV = "u"\n')


def test_sweep():
    specs = load_problems(CORPUS / "timedep.toml")
    assert [s.name for s in specs] == ["timedep[alpha=0]", "timedep[alpha=1]", "timedep[alpha=2]"]
    one = load_problem(CORPUS / "timedep.toml", alpha=2)
    assert one.params["alpha"] == 2 and one.name == "timedep[alpha=2]"
    assert str(one.lagrangian) == "du*dum*tm^2"
    with pytest.raises(ProblemError, match="sweep"):
        load_problem(CORPUS / "timedep.toml")


def test_multiple_runs():
    spec = load_problem(CORPUS / "degenerate.toml")
    assert [r.name for r in spec.simulations] == ["elsgolts", "horizontal"]
    assert spec.simulation("horizontal").equation == "horizontal"
    with pytest.raises(KeyError):
        spec.simulation("nope")


def test_duplicate_run_names():
    text = MINIMAL + '[[simulate]]\nphi = "t"\nT = 1\nh = 0.1\n[[simulate]]\nname = "main"\nphi = "t"\nT = 1\nh = 0.1\n'
    with pytest.raises(ProblemError, match="duplicate"):
        parse_problem(text)


def test_phi_depends_on_t_only():
    with pytest.raises(ProblemError, match="phi"):
        parse_problem(MINIMAL + '[simulate]\nphi = "u"\nT = 1\nh = 0.1\n')


def test_missing_file(tmp_path):
    with pytest.raises(ProblemError, match="cannot read"):
        load_problem(tmp_path / "nope.toml")
