from __future__ import annotations

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from gc2.cli import solve_problem
from gc2.limits import DEFAULT_LIMITS, CapExceeded, Limits
from gc2.normalizer import PSI_INF, eliminate_nullary, normalize_branches, scott_normalize
from gc2.problem import padding_count, parse_problem, render_problem
from gc2.structures import check_normal_form, evaluate, oracle_finsat, oracle_formula, reduct
from gc2.syntax import TRUE, And, Atom, Count, Eq, Exists, Forall, GC2Error, Imp, Not, Or, Signature, free_vars, parse_formula

# name -> (formula file, finitely satisfiable)
SENTENCES = {
    "successor": ("unary p\nbinary r\n(forall x (imp (p x) (exists y (and (r x y) (not (p y))))))", True),
    "nullary_or": ("nullary b\nunary p\n(or (b) (forall x (p x)))", True),
    "exists_and_not": ("unary p\n(and (exists x (p x)) (not (exists y (p y))))", False),
    "one_other": ("binary r\n(forall x (exactly 1 y (and (r x y) (not (= x y)))))", True),
    "reflexive_only": (
        "binary r\n(and (forall x (exactly 1 y (and (r x y) (not (= x y))))) (forall x (forall y (imp (r x y) (= x y)))))",
        False,
    ),
    "injective": (
        "binary r\n(and (forall x (exactly 1 y (and (r x y) (not (= x y))))) (forall x (atmost 1 y (and (r y x) (not (= x y))))))",
        True,
    ),
    "diagonal": ("unary p\n(forall x (atmost 1 y (and (= x y) (p y))))", True),
}


# --- nullary elimination and padding -------------------------------------


def test_eliminate_nullary_branches():
    sig, f = parse_formula(SENTENCES["nullary_or"][0])
    branches = eliminate_nullary(f, sig)
    assert [g for g, _ in branches] == [TRUE, Forall("x", Atom("p", ("x",)))]
    assert all(s.nullary == () for _, s in branches)


def test_nullary_cap():
    sig = Signature(tuple(f"b{i}" for i in range(3)), (), ())
    with pytest.raises(CapExceeded):
        eliminate_nullary(TRUE, sig, Limits(max_nullary=2))


@pytest.mark.parametrize("m, C, n", [(1, 1, 1), (1, 2, 3), (2, 1, 3), (2, 2, 5)])
def test_padding_count(m, C, n):
    assert padding_count(m, C) == n


# --- shape ---------------------------------------------------------------


def test_psi_inf_normal_form():
    sig, f = parse_formula(PSI_INF)
    [(table, p)] = normalize_branches(f, sig)
    assert table == {}
    assert render_problem(p) == (
        "binary f g\npadding c0 c1 c2 c3 c4\nalpha true\nguard f (g y x)\ncount f 2\ncount g 1\nend\n"
    )


def test_rejects_non_gc2():
    sig, f = parse_formula("unary p\n(forall x (forall y (imp (p x) (p y))))")
    with pytest.raises(GC2Error):
        normalize_branches(f, sig)


def test_scott_normalize_needs_branching():
    sig, f = parse_formula("unary p q\n(or (forall x (p x)) (forall x (q x)))")
    with pytest.raises(GC2Error):
        scott_normalize(f, sig)


def test_unsatisfiable_branches_collapse():
    sig, f = parse_formula("nullary b\n(and (b) (not (b)))")
    [(table, p)] = normalize_branches(f, sig)
    assert table == {"b": False}
    assert oracle_finsat(p, 3) is None


def test_every_branch_is_padded_and_parses_back():
    for text, _ in SENTENCES.values():
        sig, f = parse_formula(text)
        for _, p in normalize_branches(f, sig):
            assert len(p.padding) == padding_count(p.m, p.C)
            assert parse_problem(render_problem(p)) == p


# --- soundness against the oracles ---------------------------------------


def _branch_models_satisfy(f, sig, max_n, branches=None):
    """Every small model of a branch problem restricts to a model of f."""
    found = False
    for table, p in branches or normalize_branches(f, sig):
        st = oracle_finsat(p, max_n)
        if st is None:
            continue
        assert check_normal_form(p, st).ok
        assert evaluate(f, reduct(st, sig, table))
        found = True
    return found


@pytest.mark.parametrize("name", sorted(SENTENCES))
def test_pipeline_matches_formula_oracle(name):
    text, finite = SENTENCES[name]
    sig, f = parse_formula(text)
    model = oracle_formula(f, sig, 3)
    assert (model is not None) == finite
    fin = any(solve_problem(p, "finsat", DEFAULT_LIMITS, False).finsat for _, p in normalize_branches(f, sig))
    assert fin == finite
    _branch_models_satisfy(f, sig, 3)


SIG = Signature((), ("p",), ("r",))
ATOMS = [Atom("p", ("x",)), Atom("p", ("y",)), Atom("r", ("x", "y")), Atom("r", ("y", "x")), Eq("x", "y"), TRUE]
GUARDS = [Atom("r", ("x", "y")), Atom("r", ("y", "x")), Eq("x", "y")]


@st.composite
def small_formulas(draw, depth=2):
    if depth == 0:
        return draw(st.sampled_from(ATOMS))
    sub = small_formulas(depth=depth - 1)
    rule = draw(st.integers(0, 4))
    if rule == 0:
        return draw(st.sampled_from(ATOMS))
    if rule == 1:
        return Not(draw(sub))
    if rule == 2:
        return draw(st.sampled_from((And, Or)))((draw(sub), draw(sub)))
    guard, body = draw(st.sampled_from(GUARDS)), draw(sub)
    if rule == 3:
        return Forall("y", Imp(guard, body)) if draw(st.booleans()) else Exists("y", And((guard, body)))
    return Count(draw(st.sampled_from(("atleast", "atmost", "exactly"))), draw(st.integers(1, 2)), "y", guard, body)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(small_formulas(), st.booleans())
def test_generated_sentences_normalize_soundly(g, universal):
    assume(free_vars(g) <= {"x"})
    f = Forall("x", g) if universal else Exists("x", g)
    branches = normalize_branches(f, SIG)
    assume(all(len(p.binary) <= 3 for _, p in branches))  # keeps the oracle fast
    _branch_models_satisfy(f, SIG, 2, branches)
