from __future__ import annotations

import io
import subprocess
import sys

import pytest

from gc2.cli import RunConfig, detect_kind, main
from gc2.constraint_compiler import load_constraints
from gc2.normalizer import PSI_INF
from gc2.structures import parse_structure

from conftest import CONTRA_TEXT, P0_TEXT, P1_TEXT

CYCLE_FORMULA = (
    "binary r\n(and (forall x (exactly 1 y (and (r x y) (not (= x y)))))"
    " (forall x (exactly 1 y (and (r y x) (not (= x y))))))\n"
)


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in {
        "p0.nf": P0_TEXT,
        "p1.nf": P1_TEXT,
        "contra.nf": CONTRA_TEXT,
        "psi.gc2": PSI_INF,
        "cycle.gc2": CYCLE_FORMULA,
        "bad.gc2": "unary p\n(forall x (forall y (imp (p x) (p y))))\n",
        "broken.gc2": "unary p\n(forall x (p x)\n",
    }.items():
        paths[name] = tmp_path / name
        paths[name].write_text(text)
    return paths


def test_detect_kind():
    assert detect_kind(P0_TEXT) == "normal-form"
    assert detect_kind(PSI_INF) == "formula"
    assert detect_kind("domain 2\n") == "structure"
    assert detect_kind("# gc2-constraints m=1 C=1\n") == "constraints"
    assert detect_kind("binary f g\nalpha true\n") == "normal-form"


def test_run_config_rejects_bad_mode():
    with pytest.raises(ValueError):
        RunConfig(mode="neither")


def test_check_P0(files):
    assert run("check", files["p0.nf"]) == (0, "SAT\nFINSAT\n")
    assert run("check", files["p0.nf"], "--mode", "sat") == (0, "SAT\n")
    assert run("check", files["p0.nf"], "--mode", "finsat") == (0, "FINSAT\n")


def test_check_psi_inf(files):
    assert run("check", files["psi.gc2"]) == (0, "SAT\nNOT-FINSAT\n")


def test_check_contradiction(files):
    assert run("check", files["contra.nf"]) == (0, "UNSAT\nNOT-FINSAT\n")


def test_exact_lp_flag(files):
    assert run("check", files["p1.nf"], "--exact-lp") == (0, "SAT\nFINSAT\n")


def test_witness_is_a_model(files, tmp_path):
    w = tmp_path / "w.st"
    assert run("check", files["cycle.gc2"], "--witness", w) == (0, "SAT\nFINSAT\n")
    st = parse_structure(w.read_text())
    assert st.n >= 2
    assert run("eval", files["cycle.gc2"], w) == (0, "true\n")


def test_dump_constraints(files, tmp_path):
    d = tmp_path / "e.txt"
    run("check", files["p0.nf"], "--dump-constraints", d)
    cs = load_constraints(d.read_text())
    assert cs.vars
    # a dump is itself a checkable input
    assert run("check", d) == (0, "SAT\nFINSAT\n")


def test_input_errors(files, tmp_path, capsys):
    assert run("check", files["bad.gc2"])[0] == 2
    assert run("check", files["broken.gc2"])[0] == 2
    assert run("check", tmp_path / "missing.gc2")[0] == 2
    assert run("check", files["p0.nf"], "--max-vars", "0")[0] == 2
    err = capsys.readouterr().err
    assert "input error" in err and "error:" in err


def test_caps_exit_3(files, capsys):
    assert run("check", files["p0.nf"], "--max-vars", "10") == (3, "")
    assert run("check", files["p0.nf"], "--max-signature", "1")[0] == 3
    assert run("check", files["p0.nf"], "--witness", "/dev/null", "--max-witness", "1")[0] == 3
    assert "resource limit" in capsys.readouterr().err


def test_normalize_command(files):
    code, text = run("normalize", files["psi.gc2"])
    assert code == 0
    assert text.startswith("; branch 1\nbinary f g\npadding c0 c1 c2 c3 c4\n")


def test_constraints_command(files):
    code, text = run("constraints", files["p0.nf"])
    assert code == 0 and text.startswith("# gc2-constraints")


def test_model_command(files, tmp_path):
    code, text = run("model", files["p1.nf"])
    assert code == 0
    st = parse_structure(text)
    w = tmp_path / "m.st"
    w.write_text(text)
    assert run("eval", files["p1.nf"], w) == (0, "true\n")
    assert st.n % 3 == 0
    assert run("model", files["contra.nf"]) == (0, "NOT-FINSAT\n")


def test_oracle_command(files):
    code, text = run("oracle", files["p1.nf"], "--oracle-max", "3")
    assert code == 0 and text.startswith("model with 3 elements\ndomain 3\n")
    assert run("oracle", files["p1.nf"], "--oracle-max", "2") == (0, "no model with at most 2 elements\n")


def test_eval_false(files, tmp_path):
    st = tmp_path / "one.st"
    st.write_text("domain 1\n")
    assert run("eval", files["p0.nf"], st) == (0, "false\n")


def test_deterministic_and_module_entry(files):
    cmd = [sys.executable, "-m", "gc2", "check", str(files["p1.nf"])]
    a = subprocess.run(cmd, capture_output=True, text=True, check=True)
    b = subprocess.run(cmd, capture_output=True, text=True, check=True)
    assert a.stdout == b.stdout == "SAT\nFINSAT\n"
    assert a.stderr == b.stderr
