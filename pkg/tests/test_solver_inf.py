from __future__ import annotations

import random

import pytest

from gc2.constraint_compiler import Cond, ConstraintSet, SumEq, SumGe1, generate_E
from gc2.normalizer import PSI_INF, normalize
from gc2.solver_inf import (
    ALEPH0,
    FALSE,
    HornProgram,
    decide_sat,
    horn_sat,
    star_add,
    star_gt,
    star_mul,
    star_violated,
    to_horn,
)
from gc2.syntax import parse_formula

from synthetic import brute_star, random_cs, var

X, X1, X2 = var(0), var(1), var(2)


def _clauses(cs):
    hp = to_horn(cs)
    return {(tuple(sorted(b)), h) for b, h in hp.clauses}


def test_star_arithmetic():
    assert star_add(ALEPH0, 3) is ALEPH0
    assert star_mul(0, ALEPH0) == 0
    assert star_mul(2, ALEPH0) is ALEPH0
    assert star_gt(ALEPH0, 10**9) and not star_gt(ALEPH0, ALEPH0) and not star_gt(5, ALEPH0)


def test_sum_translation():
    cs = ConstraintSet([X, X1, X2], [SumEq((X1, X2), X)], 1, 1)
    assert _clauses(cs) == {((1, 2), 0), ((0,), 1), ((0,), 2)}


def test_ge1_translation():
    cs = ConstraintSet([X, X1, X2], [SumGe1((X1, X2))], 1, 1)
    assert _clauses(cs) == {((1, 2), FALSE)}


def test_cond_translation():
    cs = ConstraintSet([X, X1], [Cond(X, (X1,), 9)], 1, 1)
    assert _clauses(cs) == {((1,), 0)}


def test_empty_sum_is_unit():
    cs = ConstraintSet([X], [SumEq((), X)], 1, 1)
    assert horn_sat(to_horn(cs)) == (True, {X})


def test_horn_examples():
    assert horn_sat(HornProgram(["a"], [((), 0), ((0,), FALSE)]))[0] is False
    assert horn_sat(HornProgram(["a", "b"], [((0, 1), FALSE)])) == (True, set())
    ok, zero = horn_sat(HornProgram(["a", "b", "c"], [((), 0), ((0,), 1), ((1, 2), FALSE)]))
    assert ok and zero == {"a", "b"}


def test_render():
    hp = HornProgram(["a", "b"], [((), 0), ((0, 1), FALSE)])
    assert hp.render() == "TRUE -> X0\nX0 X1 -> FALSE\n"


@pytest.mark.parametrize("seed", range(5))
def test_propagation_is_order_independent(seed, P1):
    hp = to_horn(generate_E(P1))
    order = list(range(len(hp.clauses)))
    random.Random(seed).shuffle(order)
    assert horn_sat(hp) == horn_sat(hp, order)


def test_decide_sat_examples(P0, contra):
    assert decide_sat(generate_E(P0)).satisfiable
    assert not decide_sat(generate_E(contra)).satisfiable


def test_psi_inf_star_witness():
    sig, f = parse_formula(PSI_INF)
    [prob] = normalize(f, sig)
    cs = generate_E(prob, symmetric=True)
    res = decide_sat(cs)
    assert res.satisfiable
    assert not star_violated(cs, res.witness)
    assert any(v is ALEPH0 for k, v in res.witness.items() if k[0] == "z")
    assert any(v is ALEPH0 for k, v in res.witness.items() if k[0] == "x")


@pytest.mark.parametrize("seed", range(5))
def test_against_brute_force(seed):
    rng = random.Random(100 + seed)
    for _ in range(40):
        n = rng.randint(2, 15)
        cs = random_cs(rng, n, rng.randint(2, 2 * n))
        res = decide_sat(cs)
        assert res.satisfiable == (brute_star(cs) is not None)
        if res.satisfiable:
            assert not star_violated(cs, res.witness)
