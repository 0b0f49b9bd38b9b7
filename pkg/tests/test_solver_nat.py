from __future__ import annotations

import random

import pytest
from gmpy2 import mpq

from gc2.constraint_compiler import Cond, ConstraintSet, SumEq, SumGe1, Zero, generate_E, violated
from gc2.limits import Limits
from gc2.lp import GE
from gc2.normalizer import PSI_INF, normalize
from gc2.solver_inf import decide_sat
from gc2.solver_nat import (
    build_EH,
    decide_finsat,
    domain_size,
    papadimitriou_bound,
    scale_to_nat,
    small_solution_bound,
)
from gc2.syntax import parse_formula

from synthetic import brute_nat, random_cs, var


def test_small_solution_bound_example():
    assert small_solution_bound(2, 3, 3) == 3 * 6**5 == 23328


def test_bound_is_positive_and_grows():
    one = ConstraintSet([var(0)], [Zero(var(0))], 1, 1)
    assert papadimitriou_bound(one) >= 1
    bits = [small_solution_bound(m, 2 * m, 3).bit_length() for m in (4, 8, 16)]
    assert bits[0] < bits[1] < bits[2]
    assert bits[2] < 200


def test_gate_rows():
    z, y1, y2 = var(0), var(1), var(2)
    cs = ConstraintSet([z, y1, y2], [Cond(z, (y1, y2), 3)], 1, 1)
    sys_ = build_EH(cs, 10)
    assert sys_.names[-1] == ("gate", 0)
    g, cz, c1, c2 = 3, 0, 1, 2
    assert sys_.rows == [({g: 10, cz: -1}, GE, 0), ({g: -3, c1: 1, c2: 1}, GE, 0)]


def test_no_conditionals_no_gates(P0):
    cs = generate_E(P0)
    plain = ConstraintSet(cs.vars, [c for c in cs.constraints if not isinstance(c, Cond)], cs.m, cs.C)
    assert len(build_EH(plain, 7).names) == len(cs.vars)
    n_cond = sum(isinstance(c, Cond) for c in cs.constraints)
    assert len(build_EH(cs, 7).names) == len(cs.vars) + n_cond


def test_scale_to_nat():
    assert scale_to_nat({"a": mpq(2), "b": mpq(0)}) == {"a": 2, "b": 0}
    assert scale_to_nat({"a": mpq(1, 2), "b": mpq(3, 2)}) == {"a": 1, "b": 3}
    assert scale_to_nat({"a": mpq(1, 3), "b": mpq(1, 2)}) == {"a": 2, "b": 3}


# --- decisions on E --------------------------------------------------------


@pytest.mark.parametrize("method", ["support", "bound"])
def test_P0_is_finitely_satisfiable(P0, method):
    cs = generate_E(P0)
    res = decide_finsat(cs, method=method)
    assert res.finsat
    assert not violated(cs, res.witness)
    assert all(isinstance(v, int) and v >= 0 for v in res.witness.values())
    assert domain_size(cs, res.witness) >= 2


def test_contradiction_is_not(contra):
    res = decide_finsat(generate_E(contra))
    assert not res.finsat and res.phase == "horn"


def test_psi_inf_is_not_finitely_satisfiable():
    sig, f = parse_formula(PSI_INF)
    [prob] = normalize(f, sig)
    cs = generate_E(prob, symmetric=True)
    res = decide_finsat(cs)
    assert not res.finsat and res.phase == "support"
    assert decide_sat(cs).satisfiable


def test_exact_lp_gives_same_verdicts(P0, P1, contra):
    exact = Limits(float_hints=False)
    for prob in (P0, P1, contra):
        cs = generate_E(prob, symmetric=True)
        assert decide_finsat(cs).finsat == decide_finsat(cs, exact).finsat


# --- synthetic systems against brute force ---------------------------------


def test_threshold_needs_scaling():
    a, b = var(0), var(1)
    cs = ConstraintSet([a, b], [SumGe1((a,)), Cond(a, (b,), 5), SumEq((a,), b)], 1, 1)
    res = decide_finsat(cs)
    assert res.finsat and res.witness[a] == res.witness[b] >= 5


def test_antecedent_forced_to_zero():
    # a > 0 needs b, b is tied to c, c is zero: so a = 0 and a >= 1 fails
    a, b, c = var(0), var(1), var(2)
    cs = ConstraintSet([a, b, c], [SumGe1((a,)), Cond(a, (b,), 1), SumEq((c,), b), Zero(c)], 1, 1)
    assert not decide_finsat(cs).finsat
    assert decide_sat(cs).satisfiable is False


@pytest.mark.parametrize("seed", range(6))
def test_against_brute_force(seed):
    rng = random.Random(seed)
    for _ in range(20):
        n = rng.randint(2, 6)
        cs = random_cs(rng, n, rng.randint(2, 2 * n))
        res = decide_finsat(cs)
        found = brute_nat(cs)
        if found is not None:
            assert res.finsat
        if res.finsat:
            assert not violated(cs, res.witness)
            assert decide_sat(cs).satisfiable
        else:
            assert found is None
        # the bound method is an independent definitive phase
        assert decide_finsat(cs, method="bound").finsat == res.finsat
