from __future__ import annotations

from itertools import product

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from gc2.limits import CapExceeded
from gc2.lp import EQ, GE, LinearSystem, _is_farkas, lp_feasible, presolve, simplex_feasible


def system(n, rows):
    s = LinearSystem([f"x{i}" for i in range(n)])
    for co, sense, rhs in rows:
        s.add_row(co, sense, rhs)
    return s


def test_contradiction_is_infeasible():
    s = system(1, [({0: 1}, GE, 1), ({0: 1}, EQ, 0)])
    for hint in (True, False):
        assert not lp_feasible(s, hint=hint).feasible


def test_sum_example_is_feasible():
    # x0 + x1 = x2, x2 >= 1
    s = system(3, [({0: 1, 1: 1, 2: -1}, EQ, 0), ({2: 1}, GE, 1)])
    for hint in (True, False):
        res = lp_feasible(s, hint=hint)
        assert res.feasible and not s.check(res.point)
        assert all(isinstance(v, type(mpq(0))) for v in res.point.values())


def test_fractional_vertex():
    # 3 x0 = 1 has only the rational solution 1/3
    s = system(1, [({0: 3}, EQ, 1)])
    for hint in (True, False):
        assert lp_feasible(s, hint=hint).point == {"x0": mpq(1, 3)}


def test_infeasible_hint_carries_exact_farkas_ray():
    s = system(2, [({0: 1, 1: 1}, EQ, 1), ({0: 1}, GE, 1), ({1: 1}, GE, 1)])
    res = lp_feasible(s)
    assert not res.feasible
    assert res.proof in ("farkas", "simplex")
    # y = (-1, 1, 1): y A = 0 and y b = 1 > 0
    assert _is_farkas(s, [mpq(-1), mpq(1), mpq(1)])
    assert not _is_farkas(s, [mpq(1), mpq(0), mpq(0)])


def test_pivot_cap():
    rows = [({i: 1, i + 1: -1}, GE, 1) for i in range(30)] + [({30: 1}, GE, 1)]
    with pytest.raises(CapExceeded):
        simplex_feasible(system(31, rows), max_pivots=2)


def test_presolve_merges_and_zeros():
    s = system(4, [({0: 1, 1: -1}, EQ, 0), ({2: 1, 3: 1}, EQ, 0), ({0: 1}, GE, 2)])
    pre = presolve(s)
    assert not pre.infeasible
    assert pre.zero == {"x2", "x3"}
    assert pre.rep["x1"] == "x0"
    res = lp_feasible(pre.system)
    assert not s.check(pre.lift(res.point))


def test_presolve_detects_empty_row():
    assert presolve(system(2, [({0: 1, 1: 1}, EQ, 0), ({0: 1}, GE, 1)])).infeasible


# --- random cross-checks ---------------------------------------------------


@st.composite
def small_systems(draw):
    n = draw(st.integers(1, 4))
    rows = []
    for _ in range(draw(st.integers(1, 5))):
        cols = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
        co = {c: draw(st.integers(-3, 3)) for c in cols}
        rows.append((co, draw(st.sampled_from((EQ, GE))), draw(st.integers(-3, 4))))
    return system(n, rows)


def _integer_point(s, bound=3):
    for vals in product(range(bound + 1), repeat=len(s.names)):
        pt = dict(zip(s.names, vals))
        if not s.check(pt):
            return pt
    return None


@settings(max_examples=300, deadline=None)
@given(small_systems())
def test_hint_and_simplex_agree(s):
    hinted, exact = lp_feasible(s), simplex_feasible(s)
    assert hinted.feasible == exact.feasible
    for res in (hinted, exact):
        if res.feasible:
            assert not s.check(res.point)
    if _integer_point(s) is not None:
        assert exact.feasible


@settings(max_examples=150, deadline=None)
@given(small_systems())
def test_presolve_preserves_feasibility(s):
    pre = presolve(s)
    direct = simplex_feasible(s).feasible
    if pre.infeasible:
        assert not direct
    else:
        res = simplex_feasible(pre.system)
        assert res.feasible == direct
        if res.feasible:
            assert not s.check(pre.lift(res.point))
