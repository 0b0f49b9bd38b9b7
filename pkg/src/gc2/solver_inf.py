"""Satisfiability over N* = N u {aleph_0} via Horn propagation.

Over {0, aleph_0} a variable is just the proposition ``X_v`` = "v is 0",
and each constraint becomes a set of Horn clauses.  The least model of
those clauses is the set of variables forced to zero; the rest can be
set to aleph_0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .constraint_compiler import Cond, ConstraintSet, SumEq, SumGe1, Zero


class _Aleph0:
    """The infinite cardinal aleph_0 with the extended arithmetic on N*."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ALEPH0"

    __str__ = __repr__

    def __reduce__(self):
        return (_Aleph0, ())


ALEPH0 = _Aleph0()


def star_add(a, b):
    if a is ALEPH0 or b is ALEPH0:
        return ALEPH0
    return a + b


def star_mul(a, b):
    if a == 0 or b == 0:
        return 0
    if a is ALEPH0 or b is ALEPH0:
        return ALEPH0
    return a * b


def star_gt(a, b) -> bool:
    if a is ALEPH0:
        return b is not ALEPH0
    if b is ALEPH0:
        return False
    return a > b


def star_sum(values: Iterable):
    total = 0
    for v in values:
        total = star_add(total, v)
    return total


def star_violated(cs: ConstraintSet, theta) -> list:
    """Constraints of ``cs`` false under ``theta`` with values in N*."""
    get = theta.get
    bad = []
    for c in cs.constraints:
        if isinstance(c, SumEq):
            ok = star_sum(get(t, 0) for t in c.terms) == get(c.target, 0)
        elif isinstance(c, SumGe1):
            ok = not star_gt(1, star_sum(get(t, 0) for t in c.terms))
        elif isinstance(c, Zero):
            ok = get(c.var, 0) == 0
        else:
            ok = not star_gt(get(c.ante, 0), 0) or not star_gt(c.D, star_sum(get(t, 0) for t in c.terms))
        if not ok:
            bad.append(c)
    return bad


# --- Horn programs -------------------------------------------------------

FALSE = None  # head of a goal clause


@dataclass
class HornProgram:
    props: list  # proposition i reads "props[i] = 0"
    clauses: list  # (body: tuple[int, ...], head: int | None)
    index: dict = field(default_factory=dict)

    def render(self) -> str:
        def lit(i):
            return f"X{i}"

        lines = []
        for body, head in self.clauses:
            lhs = " ".join(lit(i) for i in body) if body else "TRUE"
            rhs = "FALSE" if head is FALSE else lit(head)
            lines.append(f"{lhs} -> {rhs}")
        return "\n".join(lines) + "\n"


def to_horn(cs: ConstraintSet) -> HornProgram:
    index = cs.index
    clauses = []
    add = clauses.append
    for c in cs.constraints:
        if isinstance(c, SumEq):
            body = tuple(index[t] for t in c.terms)
            x = index[c.target]
            add((body, x))
            for i in body:
                add(((x,), i))
        elif isinstance(c, SumGe1):
            add((tuple(index[t] for t in c.terms), FALSE))
        elif isinstance(c, Zero):
            add(((), index[c.var]))
        elif isinstance(c, Cond):
            add((tuple(index[t] for t in c.terms), index[c.ante]))
        else:
            raise TypeError(c)
    return HornProgram(list(cs.vars), clauses, index)


def horn_sat(hp: HornProgram, order: Iterable[int] | None = None) -> tuple[bool, set]:
    """Least-model unit propagation with per-clause counters.

    Returns ``(satisfiable, zero_set)``; ``zero_set`` holds the
    propositions true in the least model (derived up to the point where a
    goal clause fired, if unsatisfiable).
    """
    n = len(hp.props)
    clauses = hp.clauses
    idx = list(order) if order is not None else range(len(clauses))
    remaining = [0] * len(clauses)
    watch: list[list[int]] = [[] for _ in range(n)]
    true = [False] * n
    queue = []
    bottom = False
    for ci in idx:
        body, head = clauses[ci]
        distinct = set(body)
        remaining[ci] = len(distinct)
        for b in distinct:
            watch[b].append(ci)
        if not distinct:
            if head is FALSE:
                bottom = True
            elif not true[head]:
                true[head] = True
                queue.append(head)
    while queue and not bottom:
        v = queue.pop()
        for ci in watch[v]:
            remaining[ci] -= 1
            if remaining[ci] == 0:
                head = clauses[ci][1]
                if head is FALSE:
                    bottom = True
                    break
                if not true[head]:
                    true[head] = True
                    queue.append(head)
    zero = {hp.props[i] for i in range(n) if true[i]}
    return (not bottom), zero


@dataclass
class SatResult:
    satisfiable: bool
    witness: dict | None = None
    zero_set: set | None = None


def decide_sat(cs: ConstraintSet) -> SatResult:
    """Decide whether ``cs`` has a solution over N*; witness uses {0, aleph_0}."""
    hp = to_horn(cs)
    ok, zero = horn_sat(hp)
    if not ok:
        return SatResult(False, None, zero)
    witness = {v: (0 if v in zero else ALEPH0) for v in cs.vars}
    bad = star_violated(cs, witness)
    if bad:
        raise AssertionError(f"Horn witness violates {len(bad)} constraint(s), e.g. {bad[0]}")
    return SatResult(True, witness, zero)
