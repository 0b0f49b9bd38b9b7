"""Exact rational feasibility for linear systems ``A x (=|>=) b, x >= 0``.

:func:`lp_feasible` first asks a floating-point solver (HiGHS) for a hint
and then certifies it in exact arithmetic: a feasible hint is rounded to
nearby rationals and checked row by row; an infeasible verdict is backed
by a Farkas ray, found the same way and checked exactly.  When a hint
cannot be certified, the exact simplex decides.  So floating point only
ever saves time; it never decides anything.

The exact simplex (:func:`simplex_feasible`) is a sparse phase-1 method.
Every number is a ``gmpy2.mpq``.  Pricing is Dantzig's rule with a fall
back to Bland's rule after a run of degenerate pivots, which keeps the
method finite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from gmpy2 import mpq
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, vstack

from .limits import CapExceeded

EQ = "="
GE = ">="

#: consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERATE_RUN = 50


@dataclass
class LinearSystem:
    """Rows ``sum coeffs[c] * x_c  (sense)  rhs`` over named nonnegative columns."""

    names: list
    rows: list = field(default_factory=list)  # (dict[int, int], sense, rhs)

    def __post_init__(self):
        self.col = {n: i for i, n in enumerate(self.names)}

    def add_column(self, name) -> int:
        self.col[name] = len(self.names)
        self.names.append(name)
        return self.col[name]

    def add_row(self, coeffs: dict, sense: str, rhs: int) -> None:
        if sense not in (EQ, GE):
            raise ValueError(sense)
        self.rows.append(({c: v for c, v in coeffs.items() if v}, sense, rhs))

    def check(self, point) -> list:
        """Indices of rows violated by ``point`` (mapping column name -> number)."""
        bad = []
        for i, (co, sense, rhs) in enumerate(self.rows):
            lhs = sum(v * point.get(self.names[c], 0) for c, v in co.items())
            if (lhs != rhs) if sense == EQ else (lhs < rhs):
                bad.append(i)
        if any(v < 0 for v in point.values()):
            bad.append(-1)
        return bad

    def render(self, name=str) -> str:
        lines = [f"# linear-system columns={len(self.names)} rows={len(self.rows)}"]
        lines.extend(f"col {i} {name(n)}" for i, n in enumerate(self.names))
        for co, sense, rhs in self.rows:
            lhs = " ".join(f"{v:+d}*c{c}" for c, v in sorted(co.items())) or "0"
            lines.append(f"{lhs} {sense} {rhs}")
        return "\n".join(lines) + "\n"


@dataclass
class LPResult:
    feasible: bool
    point: dict | None
    pivots: int
    # how the verdict was established: "point", "support", "farkas" or "simplex"
    proof: str = "simplex"


#: HiGHS settings for hints; tight tolerances keep the hint's support exact
HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}

#: denominators tried when rounding a floating-point hint
ROUNDING = (1, 2, 6, 12, 60, 420, 2520, 10**6)


def lp_feasible(system: LinearSystem, max_pivots: int = 200_000, hint: bool = True) -> LPResult:
    """Decide ``exists x >= 0`` with all rows holding; a YES carries an exact point."""
    if hint and system.rows and system.names:
        res = _certified(system, max_pivots)
        if res is not None:
            return res
    return simplex_feasible(system, max_pivots)


def _matrix(system: LinearSystem, transpose: bool = False):
    r, c, v = [], [], []
    for i, (co, _, _) in enumerate(system.rows):
        for j, a in co.items():
            r.append(i)
            c.append(j)
            v.append(float(a))
    shape = (len(system.rows), len(system.names))
    if transpose:
        return coo_matrix((v, (c, r)), shape=shape[::-1]).tocsr()
    return coo_matrix((v, (r, c)), shape=shape).tocsr()


def _rationals(values, denom: int) -> list:
    return [mpq(Fraction(round(float(x) * denom), denom)) for x in values]


def _on_support(system: LinearSystem, support: set, max_pivots: int) -> LPResult | None:
    """Exact simplex over the columns of ``support`` only, the rest held at 0."""
    sub = LinearSystem([system.names[j] for j in sorted(support)])
    for co, sense, rhs in system.rows:
        sco = {sub.col[system.names[j]]: v for j, v in co.items() if j in support}
        if not sco and ((rhs != 0) if sense == EQ else (rhs > 0)):
            return None
        if sco:
            sub.add_row(sco, sense, rhs)
    res = simplex_feasible(sub, max_pivots)
    if not res.feasible:
        return None
    point = {name: res.point.get(name, mpq(0)) for name in system.names}
    if system.check(point):
        raise AssertionError("support solution violates the full system")
    return LPResult(True, point, res.pivots, "support")


def _certified(system: LinearSystem, max_pivots: int) -> LPResult | None:
    """Float hint plus exact certificate, or ``None`` when no certificate was found."""
    A = _matrix(system)
    eq = np.array([s == EQ for _, s, _ in system.rows])
    b = np.array([float(r) for _, _, r in system.rows])
    n = len(system.names)
    res = linprog(
        np.zeros(n),
        A_ub=-A[~eq] if (~eq).any() else None,
        b_ub=-b[~eq] if (~eq).any() else None,
        A_eq=A[eq] if eq.any() else None,
        b_eq=b[eq] if eq.any() else None,
        bounds=(0, None),
        method="highs-ds",
        options=HIGHS,
    )
    if res.status == 0:
        x = np.where(res.x > 1e-9, res.x, 0.0)
        for d in ROUNDING:
            point = dict(zip(system.names, _rationals(x, d)))
            if not system.check(point):
                return LPResult(True, point, 0, "point")
        return _on_support(system, {j for j in range(n) if res.x[j] > 0}, max_pivots)
    if res.status == 2 and _farkas(system, eq, b):
        return LPResult(False, None, 0, "farkas")
    return None


def _farkas(system: LinearSystem, eq, b) -> bool:
    """Find and exactly check ``y`` with ``y.A <= 0``, ``y.b > 0`` and ``y >= 0`` on ``>=`` rows.

    Such a ``y`` rules out every ``x >= 0``: ``y.A x <= 0 < y.b``, while
    the rows would give ``y.A x`` equal to or above ``y.b``.
    """
    At = _matrix(system, transpose=True)
    res = linprog(
        np.zeros(len(system.rows)),
        A_ub=vstack([At, coo_matrix(-b.reshape(1, -1))]).tocsr(),
        b_ub=np.concatenate([np.zeros(At.shape[0]), [-1.0]]),
        bounds=[(None, None) if e else (0, None) for e in eq],
        method="highs-ds",
        options=HIGHS,
    )
    if res.status != 0:
        return False
    y0 = np.where(np.abs(res.x) > 1e-9, res.x, 0.0)
    for d in ROUNDING:
        y = _rationals(y0, d)
        if _is_farkas(system, y):
            return True
    return False


def _is_farkas(system: LinearSystem, y: list) -> bool:
    col = [mpq(0)] * len(system.names)
    yb = mpq(0)
    for yi, (co, sense, rhs) in zip(y, system.rows):
        if not yi:
            continue
        if sense == GE and yi < 0:
            return False
        yb += yi * rhs
        for j, a in co.items():
            col[j] += yi * a
    return yb > 0 and all(v <= 0 for v in col)


def simplex_feasible(system: LinearSystem, max_pivots: int = 200_000) -> LPResult:
    """Exact phase-1 simplex; a YES carries an exact vertex."""
    n = len(system.names)
    rows: list[dict] = []
    rhs: list = []
    ncols = n
    needs_art: list[bool] = []
    basis: list[int] = []
    for co, sense, b in system.rows:
        r = {c: mpq(v) for c, v in co.items()}
        b = mpq(b)
        slack = None
        if sense == GE:
            slack = ncols
            ncols += 1
            r[slack] = mpq(-1)
        if b < 0 or (b == 0 and slack is not None):
            r = {c: -v for c, v in r.items()}
            b = -b
        rows.append(r)
        rhs.append(b)
        if slack is not None and r[slack] == 1:
            basis.append(slack)
            needs_art.append(False)
        else:
            basis.append(-1)
            needs_art.append(True)

    col_rows: dict[int, set] = {}
    for i, r in enumerate(rows):
        for c in r:
            col_rows.setdefault(c, set()).add(i)

    # singleton structural columns with positive coefficient can start basic
    for i, r in enumerate(rows):
        if not needs_art[i]:
            continue
        for c in sorted(r):
            if c < n and len(col_rows[c]) == 1 and r[c] > 0 and c not in basis:
                piv = r[c]
                if piv != 1:
                    for cc in r:
                        r[cc] /= piv
                    rhs[i] /= piv
                basis[i] = c
                needs_art[i] = False
                break

    # phase-1 objective: minimise the sum of artificials
    obj: dict[int, mpq] = {}
    w = mpq(0)
    art_rows = [i for i in range(len(rows)) if needs_art[i]]
    for i in art_rows:
        w += rhs[i]
        for c, v in rows[i].items():
            obj[c] = obj.get(c, mpq(0)) - v
    obj = {c: v for c, v in obj.items() if v}
    is_art = list(needs_art)

    pivots = 0
    degenerate = 0
    while w > 0:
        negs = [c for c, v in obj.items() if v < 0]
        if not negs:
            return LPResult(False, None, pivots)
        if degenerate >= DEGENERATE_RUN:
            j = min(negs)
        else:
            j = min(negs, key=lambda c: (obj[c], c))
        best = None
        best_key = None
        for i in col_rows.get(j, ()):
            a = rows[i][j]
            if a > 0:
                ratio = rhs[i] / a
                # artificial rows leave first on ties, then smallest basic index
                key = (ratio, 0 if is_art[i] else 1, basis[i])
                if best_key is None or key < best_key:
                    best, best_key = i, key
        if best is None:  # cannot happen: phase-1 objective is bounded below
            raise AssertionError("unbounded phase-1 direction")
        if pivots >= max_pivots:
            raise CapExceeded(f"simplex pivot limit {max_pivots} reached")
        pivots += 1
        degenerate = degenerate + 1 if best_key[0] == 0 else 0
        _pivot(rows, rhs, col_rows, best, j)
        basis[best] = j
        is_art[best] = False
        dj = obj.pop(j)
        pr = rows[best]
        for c, v in pr.items():
            if c == j:
                continue
            nv = obj.get(c, 0) - dj * v
            if nv:
                obj[c] = nv
            else:
                obj.pop(c, None)
        w += dj * rhs[best]

    point = {name: mpq(0) for name in system.names}
    for i, c in enumerate(basis):
        if 0 <= c < n and not is_art[i]:
            point[system.names[c]] = rhs[i]
    return LPResult(True, point, pivots)


def _pivot(rows, rhs, col_rows, r, j) -> None:
    pr = rows[r]
    piv = pr[j]
    if piv != 1:
        for c in pr:
            pr[c] /= piv
        rhs[r] /= piv
    br = rhs[r]
    for i in list(col_rows[j]):
        if i == r:
            continue
        row = rows[i]
        f = row[j]
        for c, v in pr.items():
            nv = row.get(c, 0) - f * v
            if nv:
                if c not in row:
                    col_rows.setdefault(c, set()).add(i)
                row[c] = nv
            else:
                if c in row:
                    del row[c]
                    col_rows[c].discard(i)
        rhs[i] -= f * br
    col_rows[j] = {r}


@dataclass
class Presolved:
    system: LinearSystem
    infeasible: bool
    zero: set  # column names fixed at 0
    rep: dict  # column name -> name of its representative column

    def lift(self, point: dict) -> dict:
        """Extend a point of the reduced system to every original column."""
        return {n: (mpq(0) if n in self.zero else point[self.rep[n]]) for n in self.rep}


def presolve(system: LinearSystem) -> Presolved:
    """Exact reductions valid for every nonnegative solution.

    * a homogeneous equality whose coefficients share one sign forces all
      its columns to 0 (likewise a ``>= 0`` row with no positive entry);
    * a homogeneous ``>= 0`` row with no negative entry is dropped;
    * ``a - b = 0`` merges ``b`` into ``a``.
    """
    n = len(system.names)
    parent = list(range(n))

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    zero = [False] * n
    rows = [(dict(co), sense, rhs) for co, sense, rhs in system.rows]
    changed = True
    infeasible = False
    while changed and not infeasible:
        changed = False
        kept = []
        for co, sense, rhs in rows:
            acc: dict = {}
            for c, v in co.items():
                r = find(c)
                if not zero[r]:
                    acc[r] = acc.get(r, 0) + v
            acc = {c: v for c, v in acc.items() if v}
            pos = any(v > 0 for v in acc.values())
            neg = any(v < 0 for v in acc.values())
            if sense == EQ:
                if rhs == 0 and not (pos and neg):
                    for c in acc:
                        zero[c] = True
                    changed = changed or bool(acc)
                    continue
                if rhs != 0 and not acc:
                    infeasible = True
                    break
                if rhs == 0 and len(acc) == 2:
                    a, b = sorted(acc)
                    if acc[a] == -acc[b]:
                        parent[b] = a
                        changed = True
                        continue
            else:
                if rhs <= 0 and not neg:
                    continue
                if rhs > 0 and not pos:
                    infeasible = True
                    break
                if rhs == 0 and not pos:
                    for c in acc:
                        zero[c] = True
                    changed = True
                    continue
            kept.append((acc, sense, rhs))
        rows = kept
    if infeasible:  # rows may still name columns zeroed in this pass
        return Presolved(LinearSystem([]), True, set(system.names), {})

    reps = sorted({find(c) for c in range(n) if not zero[find(c)]})
    new_index = {c: i for i, c in enumerate(reps)}
    out = LinearSystem([system.names[c] for c in reps])
    seen = set()
    for co, sense, rhs in rows:
        nco = {new_index[c]: v for c, v in co.items()}
        key = (tuple(sorted(nco.items())), sense, rhs)
        if key not in seen:
            seen.add(key)
            out.rows.append((nco, sense, rhs))
    zero_names = {system.names[c] for c in range(n) if zero[find(c)]}
    rep = {system.names[c]: system.names[find(c)] for c in range(n)}
    return Presolved(out, infeasible, zero_names, rep)
