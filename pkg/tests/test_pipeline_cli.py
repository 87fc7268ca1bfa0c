import json
import shutil
from importlib import resources

import pytest

from delaynoether.cli import main
from delaynoether.pipeline import (
    UNVERIFIED, Analysis, cmd_derive, cmd_noether, cmd_simulate, cmd_verify_paper,
    corpus_files, render,
)
from delaynoether.problem import load_problem

CORPUS = resources.files("delaynoether") / "corpus"


def osc1():
    return load_problem(CORPUS / "osc1.toml")


def by_name(report, name):
    return next(s for s in report["symmetries"] if s["name"] == name)


class TestCommands:
    def test_derive(self):
        rep = cmd_derive(load_problem(CORPUS / "nonlinear.toml"))
        assert rep["depends_on_current"] and rep["depends_on_delayed"]
        assert rep["horizontal"] and rep["elsgolts"]
        assert rep["linearly_connected"]

    def test_derive_notes_time_translation(self):
        rep = cmd_derive(osc1())
        assert any("d/dt" in n for n in rep["notes"])

    def test_noether_osc1(self):
        rep = cmd_noether(osc1())
        x3 = by_name(rep, "X3")
        assert x3["class"] == "variational"
        assert [i["status"] for i in x3["integrals"]] == ["verified"]
        x4 = by_name(rep, "X4")
        assert x4["class"] == "none" and x4["integrals"] == []
        assert x4["invariance"] == {"elsgolts": True, "horizontal": True}

    def test_conditional_wording(self):
        rep = cmd_noether(load_problem(CORPUS / "nonlinear.toml"))
        x1 = by_name(rep, "X1")
        statuses = {i["status"] for i in x1["integrals"]}
        assert statuses == {UNVERIFIED}
        assert all(i["constraint"] for i in x1["integrals"])

    def test_simulate(self, tmp_path):
        rep = cmd_simulate(osc1(), out_dir=tmp_path)
        assert "error" not in rep
        drifts = {m["label"]: m["max_drift"] for m in rep["monitors"]}
        assert drifts["I[X1]"] < 1e-6 and drifts["I[X2]"] < 1e-6
        assert (tmp_path / "osc1_trajectory.csv").exists()
        assert (tmp_path / "osc1_I_X1.csv").exists()

    def test_simulate_named_run(self, tmp_path):
        spec = load_problem(CORPUS / "degenerate.toml")
        rep = cmd_simulate(spec, out_dir=tmp_path, run="horizontal")
        assert rep["run"] == "horizontal" and "error" not in rep
        assert (tmp_path / "degenerate_horizontal_trajectory.csv").exists()

    def test_analysis_equation_lookup(self):
        an = Analysis(osc1())
        assert an.equation("elsgolts").label == "elsgolts"
        assert an.equation("X1").label == "locally_extremal[X1]"
        with pytest.raises(KeyError):
            an.symmetry("X9")


class TestVerifyPaper:
    def test_bundled_corpus(self):
        rep = cmd_verify_paper()
        assert rep["passed"] and rep["failed"] == [] and rep["total"] == len(rep["checks"]) > 100

    def test_corpus_files(self):
        names = [p.stem for p in corpus_files()]
        assert names == sorted(names) and "osc1" in names

    def test_mutation_detected(self, tmp_path):
        for p in corpus_files():
            shutil.copy(p, tmp_path / p.name)
        f = tmp_path / "osc1.toml"
        text = f.read_text()
        old = 'id = "I3"\nkind = "emitted"\nsymmetry = "X3"\ntype = "differential"\nexpr = "-du*dup - u*um"'
        assert old in text
        f.write_text(text.replace(old, old.replace("- u*um", "+ u*um")))
        rep = cmd_verify_paper(tmp_path)
        assert not rep["passed"] and rep["failed"] == ["osc1/I3"]

    def test_unknown_check_kind(self, tmp_path):
        (tmp_path / "x.toml").write_text(
            'name = "x"\ntau = 1.0\nlagrangian = "du*dum"\n[[check]]\nid = "c"\nkind = "bogus"\n'
        )
        rep = cmd_verify_paper(tmp_path)
        assert rep["failed"] == ["x/c"]


class TestRender:
    def test_json_round_trip(self):
        rep = cmd_noether(osc1())
        assert json.loads(render(rep, "json")) == json.loads(json.dumps(rep))

    def test_text(self):
        out = render({"a": 1, "b": ["x", "y"], "c": {"d": True}, "e": []})
        assert out == "a: 1\nb:\n  - x\n  - y\nc:\n  d: true\ne: []\n"


class TestCli:
    def test_verify_paper(self, capsys):
        assert main(["verify-paper"]) == 0
        assert "passed: true" in capsys.readouterr().out

    def test_deterministic(self, capsys):
        path = str(CORPUS / "osc1.toml")
        main(["noether", path, "--format", "json"])
        a = capsys.readouterr().out
        main(["noether", path, "--format", "json"])
        b = capsys.readouterr().out
        assert a == b and json.loads(a)["problem"] == "osc1"

    def test_seed_flag(self, capsys):
        main(["noether", str(CORPUS / "osc1.toml"), "--seed", "5", "--format", "json"])
        assert json.loads(capsys.readouterr().out)["seed"] == 5

    def test_zero_test(self, capsys):
        assert main(["zero-test", "sin(t)^2 + cos(t)^2 - 1"]) == 0
        assert main(["zero-test", "u - um"]) == 1
        assert main(["zero-test", "alpha*u - u*alpha", "--params", "alpha"]) == 0
        capsys.readouterr()

    def test_sweep_param(self, capsys):
        path = str(CORPUS / "timedep.toml")
        assert main(["derive", path, "--param", "alpha=1", "--format", "json"]) == 0
        assert json.loads(capsys.readouterr().out)["problem"] == "timedep[alpha=1]"
        assert main(["derive", path, "--format", "json"]) == 0
        assert len(json.loads(capsys.readouterr().out)["problems"]) == 3

    def test_bad_problem_exit_code(self, tmp_path, capsys):
        f = tmp_path / "bad.toml"
        f.write_text('name = "b"\nlagrangian = "du"\n')
        assert main(["derive", str(f)]) == 2
        assert "tau" in capsys.readouterr().err
        assert main(["derive", str(CORPUS / "osc1.toml"), "--param", "oops"]) == 2

    def test_out_dir(self, tmp_path, capsys):
        assert main(["simulate", str(CORPUS / "osc1.toml"), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "simulate.txt").exists() and (tmp_path / "osc1_trajectory.csv").exists()
        capsys.readouterr()

    def test_failing_corpus_exit_code(self, tmp_path, capsys):
        (tmp_path / "x.toml").write_text(
            'name = "x"\ntau = 1.0\nlagrangian = "du*dum"\n[[check]]\nid = "E"\nkind = "equation"\n'
            'which = "elsgolts"\nexpr = "ddup"\n'
        )
        assert main(["verify-paper", "--corpus", str(tmp_path)]) == 1
        assert "x/E" in capsys.readouterr().err
