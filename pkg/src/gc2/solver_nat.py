"""Finite satisfiability: deciding whether E has a solution over N.

Phase 1 is the gate relaxation ``E_H``: each conditional
``x > 0 => sum >= D`` becomes ``H*g >= x`` and ``sum >= D*g`` with a fresh
gate ``g``.  Any rational solution scales to a natural one, so a feasible
``E_H`` proves YES for every positive ``H``.  For ``H`` at least a
small-solution bound of integer programming the relaxation is
equisatisfiable with E over N, but that bound has millions of bits on
realistic systems; the default definitive phase is instead an exact
support fixpoint over the homogeneous rows (see :func:`support_fixpoint`).

Before any LP the Horn least model of E is used as a presolve: the zero
set of any natural solution of E is a model of its Horn translation, so
every variable in the least model is 0 in every natural solution, and an
unsatisfiable Horn program means E has no natural solution at all.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import lcm

from gmpy2 import mpq

from .constraint_compiler import Cond, ConstraintSet, SumEq, SumGe1, Zero, var_name, violated
from .limits import DEFAULT_LIMITS, Limits
from .lp import EQ, GE, LinearSystem, lp_feasible, presolve
from .solver_inf import horn_sat, to_horn

#: gate factor tried first; any positive value is sound for YES
HEURISTIC_H = 1 << 16


def papadimitriou_bound(cs: ConstraintSet, zero=frozenset()) -> int:
    """Small-solution bound for the branch-resolved systems of ``cs``.

    Papadimitriou (1981): if ``A x = b, x >= 0`` with ``A`` of size
    ``m' x n'`` and entries bounded by ``a`` has an integer solution, it
    has one with every entry at most ``n' (m' a)^(2m'+1)``.  Counted here
    on the gate system after slack conversion (``>=`` rows get a slack);
    this dominates every system obtained by resolving each conditional.
    """
    shape = build_EH(cs, 1, zero)
    rows = len(shape.rows)
    cols = len(shape.names) + sum(1 for _, sense, _ in shape.rows if sense == GE)
    a = 3 * cs.m * cs.C
    for co, _, rhs in shape.rows:
        a = max(a, abs(rhs), *(abs(v) for v in co.values()))
    return small_solution_bound(max(rows, 1), max(cols, 1), a)


def small_solution_bound(rows: int, cols: int, a: int) -> int:
    """``n' (m' a)^(2m'+1)`` for ``m'`` rows, ``n'`` columns and entries at most ``a``."""
    return cols * (rows * a) ** (2 * rows + 1)


def build_EH(cs: ConstraintSet, H: int, zero=frozenset()) -> LinearSystem:
    """The gate system ``E_H``; variables in ``zero`` are dropped as fixed at 0."""
    names = [v for v in cs.vars if v not in zero]
    sys_ = LinearSystem(names)
    col = sys_.col
    gate = 0
    for c in cs.constraints:
        if isinstance(c, SumEq):
            co: dict = {}
            for t in c.terms:
                if t not in zero:
                    co[col[t]] = co.get(col[t], 0) + 1
            if c.target not in zero:
                co[col[c.target]] = co.get(col[c.target], 0) - 1
            if co:
                sys_.add_row(co, EQ, 0)
        elif isinstance(c, SumGe1):
            co = {}
            for t in c.terms:
                if t not in zero:
                    co[col[t]] = co.get(col[t], 0) + 1
            sys_.add_row(co, GE, 1)
        elif isinstance(c, Zero):
            if c.var not in zero:
                sys_.add_row({col[c.var]: 1}, EQ, 0)
        elif isinstance(c, Cond):
            if c.ante in zero:
                continue
            g = sys_.add_column(("gate", gate))
            gate += 1
            sys_.add_row({g: H, col[c.ante]: -1}, GE, 0)
            co = {g: -c.D}
            for t in c.terms:
                if t not in zero:
                    co[col[t]] = co.get(col[t], 0) + 1
            sys_.add_row(co, GE, 0)
        else:
            raise TypeError(c)
    return sys_


def build_polish(cs: ConstraintSet, zero) -> LinearSystem:
    """Gate-free system for a known support: conditionals become ``sum >= D``.

    Variables in ``zero`` are fixed at 0; every conditional whose
    antecedent may be positive demands its sum reach ``D`` outright.  Any
    solution of ``E_H`` with support outside ``zero`` scales into this
    system, and every rational solution of it scales to a solution of E.
    """
    names = [v for v in cs.vars if v not in zero]
    sys_ = LinearSystem(names)
    col = sys_.col

    def lin(terms):
        co: dict = {}
        for t in terms:
            if t not in zero:
                co[col[t]] = co.get(col[t], 0) + 1
        return co

    for c in cs.constraints:
        if isinstance(c, SumEq):
            co = lin(c.terms)
            if c.target not in zero:
                co[col[c.target]] = co.get(col[c.target], 0) - 1
            if co:
                sys_.add_row(co, EQ, 0)
        elif isinstance(c, SumGe1):
            sys_.add_row(lin(c.terms), GE, 1)
        elif isinstance(c, Zero):
            if c.var not in zero:
                sys_.add_row({col[c.var]: 1}, EQ, 0)
        elif isinstance(c, Cond):
            if c.ante not in zero:
                sys_.add_row(lin(c.terms), GE, c.D)
        else:
            raise TypeError(c)
    return sys_


def scale_to_nat(point: dict) -> dict:
    """Multiply a nonnegative rational point by the lcm of its denominators."""
    L = 1
    for v in point.values():
        L = lcm(L, int(mpq(v).denominator))
    return {k: int(mpq(v) * L) for k, v in point.items()}


def domain_size(cs: ConstraintSet, theta: dict) -> int:
    """Number of elements of the model a solution describes."""
    return sum(v for k, v in theta.items() if k[0] == "y" and k[2] == "")


@dataclass
class NatResult:
    finsat: bool
    witness: dict | None = None
    phase: str = ""
    too_large: bool = False
    stats: dict = field(default_factory=dict)


def build_cone(cs: ConstraintSet, zero, target=()) -> LinearSystem:
    """Homogeneous part of E (equalities and zeros), plus ``sum(target) >= 1``."""
    names = [v for v in cs.vars if v not in zero]
    sys_ = LinearSystem(names)
    col = sys_.col
    for c in cs.constraints:
        if isinstance(c, SumEq):
            co: dict = {}
            for t in c.terms:
                if t not in zero:
                    co[col[t]] = co.get(col[t], 0) + 1
            if c.target not in zero:
                co[col[c.target]] = co.get(col[c.target], 0) - 1
            if co:
                sys_.add_row(co, EQ, 0)
        elif isinstance(c, Zero):
            if c.var not in zero:
                sys_.add_row({col[c.var]: 1}, EQ, 0)
    if target:
        sys_.add_row({col[t]: 1 for t in target if t not in zero}, GE, 1)
    return sys_


def _solve(system: LinearSystem, limits: Limits, stats: dict, key: str) -> dict | None:
    pre = presolve(system)
    stats[key] = stats.get(key, 0) + 1
    if pre.infeasible:
        return None
    res = lp_feasible(pre.system, limits.lp_pivots, limits.float_hints)
    stats["pivots"] = stats.get("pivots", 0) + res.pivots
    if not res.feasible:
        return None
    point = pre.lift(res.point)
    if system.check(point):
        raise AssertionError("LP point violates its own system")
    return point


def support_fixpoint(cs: ConstraintSet, zero, limits: Limits, stats: dict) -> dict | None:
    """Exact N-feasibility of E through the supports its solutions can have.

    Natural solutions are closed under sums and positive multiples, and
    every threshold is met by scaling, so E is solvable over N iff some
    point of the cone of the homogeneous rows has each ``>= 1`` sum
    positive and each ``x > 0 => sum`` with a positive sum.  Round after
    round: find every term of a sum that can be positive in the cone (with
    the current zeros), then zero each antecedent none of whose terms can.
    Zeros found this way hold in every natural solution.  For E the terms
    are the root blocks ``y[rho, '', *]``, so each round costs a few LPs.
    """
    zero = set(zero)
    conds = [c for c in cs.constraints if isinstance(c, Cond)]
    ges = [c.terms for c in cs.constraints if isinstance(c, SumGe1)]
    relevant = list(dict.fromkeys([t for c in conds for t in c.terms] + [t for g in ges for t in g]))
    rounds = 0
    while True:
        rounds += 1
        live = [r for r in relevant if r not in zero]
        total: dict = {}
        positive = set()
        while True:
            target = [r for r in live if r not in positive]
            if not target:
                break
            point = _solve(build_cone(cs, zero, target), limits, stats, "support_lps")
            if point is None:
                break
            for v, a in point.items():
                if a > 0:
                    total[v] = total.get(v, 0) + a
            positive |= {r for r in target if point.get(r, 0) > 0}
        stats["support_rounds"] = rounds
        if not all(any(t in positive for t in g) for g in ges):
            return None
        fresh = {
            c.ante
            for c in conds
            if c.ante not in zero and not any(t in positive for t in c.terms)
        }
        if not fresh:
            return total
        zero |= fresh


def decide_finsat(cs: ConstraintSet, limits: Limits = DEFAULT_LIMITS, method: str = "support") -> NatResult:
    """YES iff ``cs`` has a solution over N; a validated witness comes with YES.

    Phase 1 tries the gate system with the small factor ``HEURISTIC_H``
    (sound for YES).  The definitive phase is the support fixpoint, or with
    ``method="bound"`` the gate system at the small-solution bound.
    """
    if method not in ("support", "bound"):
        raise ValueError(method)
    stats: dict = {"vars": len(cs.vars), "constraints": len(cs.constraints)}
    ok, zero = horn_sat(to_horn(cs))
    stats["horn_zero"] = len(zero)
    if not ok:
        return NatResult(False, None, "horn", stats=stats)
    zero = frozenset(zero)

    phases = [("heuristic", HEURISTIC_H)]
    if method == "bound":
        phases.append(("bound", None))
    for phase, H in phases:
        if H is None:
            H = papadimitriou_bound(cs, zero)
            stats["H_bits"] = H.bit_length()
        point = _solve(build_EH(cs, H, zero), limits, stats, f"{phase}_lps")
        if point is not None:
            return _accept(cs, point, phase, limits, stats)
    if method == "bound":
        return NatResult(False, None, "bound", stats=stats)
    point = support_fixpoint(cs, zero, limits, stats)
    if point is None:
        return NatResult(False, None, "support", stats=stats)
    return _accept(cs, point, "support", limits, stats)


def _accept(cs, point, phase, limits, stats) -> NatResult:
    theta = _polish(cs, point, limits, stats)
    size = domain_size(cs, theta)
    stats["domain"] = size
    return NatResult(True, theta, phase, size > limits.max_witness, stats)


def _polish(cs: ConstraintSet, point: dict, limits: Limits, stats: dict) -> dict:
    """Natural solution with small entries, supported inside ``point``'s support."""
    support_zero = frozenset(v for v in cs.vars if not point.get(v, 0) > 0)
    candidates = []
    pre = presolve(build_polish(cs, support_zero))
    if not pre.infeasible:
        res = lp_feasible(pre.system, limits.lp_pivots, limits.float_hints)
        stats["pivots"] = stats.get("pivots", 0) + res.pivots
        if res.feasible:
            candidates.append(pre.lift(res.point))
    candidates.append({v: point.get(v, 0) for v in cs.vars})
    for cand in candidates:
        nat = scale_to_nat({v: cand.get(v, 0) for v in cs.vars})
        theta = _lift_thresholds(cs, nat)
        if theta is not None and not violated(cs, theta):
            return theta
    raise AssertionError("no scaled witness satisfies E")


def _lift_thresholds(cs: ConstraintSet, theta: dict) -> dict | None:
    """Multiply ``theta`` by the least factor meeting every ``sum >= D`` threshold."""
    factor = 1
    for c in cs.constraints:
        if isinstance(c, Cond) and theta.get(c.ante, 0) > 0:
            total = sum(theta.get(t, 0) for t in c.terms)
            if total == 0:
                return None
            factor = max(factor, -(-c.D // total))
    return theta if factor == 1 else {v: n * factor for v, n in theta.items()}


def render_witness(theta: dict, k: int | None = None) -> str:
    lines = [f"{var_name(v, k)} = {n}" for v, n in theta.items() if n]
    return "\n".join(lines) + ("\n" if lines else "")
