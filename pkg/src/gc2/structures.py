"""Finite structures: evaluation, normal-form checking, spectra and oracles."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from itertools import product

from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .syntax import (
    And,
    Atom,
    Const,
    Count,
    Eq,
    Exists,
    Forall,
    Formula,
    GC2Error,
    Iff,
    Imp,
    Not,
    Or,
    ParseError,
    Signature,
)
from .typespace import ProblemTypes, TwoType, TypeSpace, bits


@dataclass
class Structure:
    n: int
    unary: dict = field(default_factory=dict)  # name -> frozenset of elements
    binary: dict = field(default_factory=dict)  # name -> frozenset of pairs
    nullary: dict = field(default_factory=dict)  # name -> bool

    def __post_init__(self):
        if self.n < 0:
            raise GC2Error("domain size must be nonnegative")
        self.unary = {k: frozenset(v) for k, v in self.unary.items()}
        self.binary = {k: frozenset(tuple(p) for p in v) for k, v in self.binary.items()}
        self.nullary = {k: bool(v) for k, v in self.nullary.items()}
        for name, ext in self.unary.items():
            if any(not 0 <= a < self.n for a in ext):
                raise GC2Error(f"unary {name}: element out of range")
        for name, ext in self.binary.items():
            if any(not (0 <= a < self.n and 0 <= b < self.n) for a, b in ext):
                raise GC2Error(f"binary {name}: element out of range")

    def holds(self, pred: str, args: tuple) -> bool:
        if not args:
            return self.nullary.get(pred, False)
        if len(args) == 1:
            return args[0] in self.unary.get(pred, ())
        return args in self.binary.get(pred, ())


def reduct(st: Structure, sig: Signature, nullary: dict | None = None) -> Structure:
    """``st`` restricted to ``sig``, with nullary values from ``nullary`` (default false)."""
    nullary = nullary or {}
    return Structure(
        st.n,
        {u: st.unary.get(u, ()) for u in sig.unary},
        {r: st.binary.get(r, ()) for r in sig.binary},
        {b: nullary.get(b, st.nullary.get(b, False)) for b in sig.nullary},
    )


def render_structure(st: Structure) -> str:
    lines = [f"domain {st.n}"]
    for name, v in st.nullary.items():
        lines.append(f"nullary {name}: {'true' if v else 'false'}")
    for name, ext in st.unary.items():
        lines.append(f"unary {name}:" + "".join(f" {a}" for a in sorted(ext)))
    for name, ext in st.binary.items():
        lines.append(f"binary {name}:" + "".join(f" ({a},{b})" for a, b in sorted(ext)))
    return "\n".join(lines) + "\n"


_PAIR = re.compile(r"\((\d+),(\d+)\)")


def parse_structure(text: str) -> Structure:
    n = None
    unary, binary, nullary = {}, {}, {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "domain":
                n = int(rest)
            elif head in ("unary", "binary", "nullary"):
                name, sep, body = rest.partition(":")
                name = name.strip()
                if not sep or not name:
                    raise ParseError("expected '<kind> <name>: ...'", lineno, 1)
                if head == "unary":
                    unary[name] = {int(a) for a in body.split()}
                elif head == "nullary":
                    if body.strip() not in ("true", "false"):
                        raise ParseError("nullary value must be true or false", lineno, 1)
                    nullary[name] = body.strip() == "true"
                else:
                    pairs = _PAIR.findall(body)
                    if _PAIR.sub("", body).strip():
                        raise ParseError("binary extension must be a list of (a,b) pairs", lineno, 1)
                    binary[name] = {(int(a), int(b)) for a, b in pairs}
            else:
                raise ParseError(f"unknown line kind {head!r}", lineno, 1)
        except ValueError:
            raise ParseError("malformed number", lineno, 1) from None
    if n is None:
        raise ParseError("missing 'domain N' line")
    try:
        return Structure(n, unary, binary, nullary)
    except GC2Error as e:
        raise ParseError(str(e)) from None


# --- evaluation ----------------------------------------------------------


def evaluate(f: Formula, st: Structure, env: dict | None = None) -> bool:
    """Standard semantics; counting quantifiers count over the whole domain."""
    env = dict(env or {})
    dom = range(st.n)

    def go(g) -> bool:
        if isinstance(g, Const):
            return g.value
        if isinstance(g, Atom):
            return st.holds(g.pred, tuple(env[v] for v in g.args))
        if isinstance(g, Eq):
            return env[g.left] == env[g.right]
        if isinstance(g, Not):
            return not go(g.arg)
        if isinstance(g, And):
            return all(go(a) for a in g.args)
        if isinstance(g, Or):
            return any(go(a) for a in g.args)
        if isinstance(g, Imp):
            return (not go(g.left)) or go(g.right)
        if isinstance(g, Iff):
            return go(g.left) == go(g.right)
        if isinstance(g, (Forall, Exists, Count)):
            saved = env.get(g.var)
            try:
                if isinstance(g, Forall):
                    return all(_bind(env, g.var, a) or go(g.body) for a in dom)
                if isinstance(g, Exists):
                    return any(not _bind(env, g.var, a) and go(g.body) for a in dom)
                n = sum(1 for a in dom if not _bind(env, g.var, a) and go(g.guard) and go(g.body))
                if g.kind == "atleast":
                    return n >= g.bound
                if g.kind == "atmost":
                    return n <= g.bound
                return n == g.bound
            finally:
                if saved is None:
                    env.pop(g.var, None)
                else:
                    env[g.var] = saved
        raise TypeError(f"not a formula: {g!r}")

    return go(f)


def _bind(env, var, a) -> bool:
    env[var] = a
    return False


# --- normal-form view ----------------------------------------------------


class ModelView:
    """A structure read through the type space of a normal-form problem."""

    def __init__(self, prob, st: Structure, types: ProblemTypes | None = None, limits: Limits = DEFAULT_LIMITS):
        self.prob = prob
        self.st = st
        self.types = types or ProblemTypes(prob, limits)
        ts = self.ts = self.types.ts
        tp = [0] * st.n
        for u in ts.unary:
            bit = ts.unary_bit(u)
            for a in st.unary.get(u, ()):
                tp[a] |= bit
        self.links: dict = {}  # (a, b) with a != b -> (fwd, bwd)
        for r in ts.binary:
            bit = ts.bin_bit(r)
            for a, b in st.binary.get(r, ()):
                if a == b:
                    tp[a] |= bit
                else:
                    fw, bw = self.links.get((a, b), (0, 0))
                    self.links[(a, b)] = (fw | bit, bw)
                    fw, bw = self.links.get((b, a), (0, 0))
                    self.links[(b, a)] = (fw, bw | bit)
        self.tp = tp
        self.out: list[list] = [[] for _ in range(st.n)]
        for (a, b) in self.links:
            self.out[a].append(b)
        for lst in self.out:
            lst.sort()

    def two_type(self, a: int, b: int) -> TwoType:
        fw, bw = self.links.get((a, b), (0, 0))
        return TwoType(self.tp[a], self.tp[b], fw, bw)

    def blocks(self) -> dict:
        out: dict = {}
        for a, pi in enumerate(self.tp):
            out.setdefault(pi, []).append(a)
        return out

    # spectra and tallies

    def leaf_contributions(self, a: int):
        """``(sp, tl)``: dicts leaf-index -> count vector, for messages sent by ``a``."""
        ts = self.ts
        sp: dict = {}
        tl: dict = {}
        for b in self.out[a]:
            tau = self.two_type(a, b)
            if not ts.is_message(tau):
                continue
            c = ts.c_vector(tau)
            if ts.classify(tau) == "invertible-message":
                key = tau.pi2
                sp[key] = tuple(x + y for x, y in zip(sp.get(key, (0,) * ts.m), c))
            else:
                key = ts.m_index(tau)
                tl[key] = tuple(x + y for x, y in zip(tl.get(key, (0,) * ts.m), c))
        return sp, tl

    def spectrum(self, a: int, s: str) -> tuple:
        sp, _ = self.leaf_contributions(a)
        rng = self.ts.pi_block(s)
        return _sum_in(sp, rng, self.ts.m)

    def tally(self, a: int, t: str) -> tuple:
        _, tl = self.leaf_contributions(a)
        rng = self.ts.m_block(t)
        return _sum_in(tl, rng, self.ts.m)

    def all_spectra(self, a: int):
        """Every ``sp_s`` and ``tl_t`` of ``a`` as two dicts keyed by bit string."""
        ts = self.ts
        sp, tl = self.leaf_contributions(a)
        return _prefix_sums(sp, ts.p, ts.m), _prefix_sums(tl, ts.q, ts.m)


def _sum_in(d: dict, rng: range, m: int) -> tuple:
    total = (0,) * m
    for k, v in d.items():
        if k in rng:
            total = tuple(x + y for x, y in zip(total, v))
    return total


def _prefix_sums(leaves: dict, depth: int, m: int) -> dict:
    """Sum leaf vectors into every prefix node (all strings of length <= depth)."""
    zero = (0,) * m
    out = {}
    level = {bits(k, depth): v for k, v in leaves.items()}
    for length in range(depth, -1, -1):
        for i in range(1 << length):
            s = bits(i, length)
            out[s] = level.get(s, zero)
        nxt: dict = {}
        for s, v in level.items():
            parent = s[:-1]
            nxt[parent] = tuple(x + y for x, y in zip(nxt.get(parent, zero), v))
        level = nxt
    return out


def spectrum(st: Structure, prob, a: int, s: str) -> tuple:
    return ModelView(prob, st).spectrum(a, s)


def tally(st: Structure, prob, a: int, t: str) -> tuple:
    return ModelView(prob, st).tally(a, t)


@dataclass
class NFReport:
    ok: bool
    alpha: str | None = None
    forbidden: str | None = None
    counting: str | None = None

    def violations(self) -> list[str]:
        return [v for v in (self.alpha, self.forbidden, self.counting) if v]


def check_normal_form(prob, st: Structure, view: ModelView | None = None) -> NFReport:
    """Check ``st`` against the normal form: alpha, forbidden pairs, exact counts.

    Linked pairs are checked one by one; unlinked pairs of 1-type classes
    share the 2-type with no cross atoms and are checked per class pair.
    """
    v = view or ModelView(prob, st)
    types, ts = v.types, v.ts
    rep = NFReport(True)
    for a, pi in enumerate(v.tp):
        if not types.alpha_ok[pi]:
            rep.alpha = f"alpha fails at element {a}"
            break
    for (a, b) in sorted(v.links):
        if types.is_forbidden(v.two_type(a, b)):
            rep.forbidden = f"forbidden 2-type on pair ({a},{b})"
            break
    if rep.forbidden is None:
        blocks = v.blocks()
        linked: dict = {}
        for (a, b) in v.links:
            key = (v.tp[a], v.tp[b])
            linked[key] = linked.get(key, 0) + 1
        for pi in sorted(blocks):
            for rho in sorted(blocks):
                total = len(blocks[pi]) * len(blocks[rho]) - (len(blocks[pi]) if pi == rho else 0)
                if total > linked.get((pi, rho), 0) and types.is_forbidden(TwoType(pi, rho, 0, 0)):
                    pair = _unlinked_pair(v, blocks[pi], blocks[rho])
                    rep.forbidden = f"forbidden 2-type on unlinked pair {pair}"
                    break
            if rep.forbidden:
                break
    for i, (f, C) in enumerate(prob.counts):
        bit = ts.bin_bit(f)
        for a in range(st.n):
            n = sum(1 for b in v.out[a] if v.links[(a, b)][0] & bit)
            if n != C:
                rep.counting = f"element {a} has {n} {f}-successors, expected {C}"
                break
        if rep.counting:
            break
    rep.ok = not rep.violations()
    return rep


def _unlinked_pair(v: ModelView, A, B):
    for a in A:
        for b in B:
            if a != b and (a, b) not in v.links:
                return (a, b)
    return None


# --- duplication and colouring -------------------------------------------


def duplicate(st: Structure, N: int) -> Structure:
    """``N`` disjoint copies of ``st``; copy ``k`` holds elements ``k*n .. k*n+n-1``."""
    if N < 1:
        raise GC2Error("duplication factor must be at least 1")
    n = st.n
    unary = {p: {a + k * n for k in range(N) for a in ext} for p, ext in st.unary.items()}
    binary = {r: {(a + k * n, b + k * n) for k in range(N) for a, b in ext} for r, ext in st.binary.items()}
    return Structure(n * N, unary, binary, dict(st.nullary))


def chromatic_graph(view: ModelView) -> list[set]:
    ts = view.ts
    inv = [set() for _ in range(view.st.n)]
    for (a, b) in view.links:
        if ts.classify(view.two_type(a, b)) == "invertible-message":
            inv[a].add(b)
    adj = [set(s) for s in inv]
    for a in range(view.st.n):
        for b in inv[a]:
            for c in inv[b]:
                if c != a:
                    adj[a].add(c)
                    adj[c].add(a)
    for a in range(view.st.n):
        for b in inv[a]:
            adj[b].add(a)
    return adj


def is_chromatic(prob, st: Structure) -> bool:
    v = ModelView(prob, st)
    adj = chromatic_graph(v)
    return all(v.tp[a] != v.tp[b] for a in range(st.n) for b in adj[a])


def make_chromatic(st: Structure, prob) -> Structure:
    """Recolour the padding predicates greedily so that ``st`` becomes chromatic."""
    if not prob.padding:
        raise GC2Error("problem has no padding predicates to colour with")
    v = ModelView(prob, st)
    adj = chromatic_graph(v)
    limit = (prob.m * prob.C) ** 2
    colour = [0] * st.n
    for a in range(st.n):
        if len(adj[a]) > limit:
            raise AssertionError(f"chromatic graph degree {len(adj[a])} exceeds (mC)^2 = {limit}")
        used = {colour[b] for b in adj[a] if b < a}
        c = 0
        while c in used:
            c += 1
        colour[a] = c
    width = len(prob.padding)
    unary = {u: ext for u, ext in st.unary.items() if u not in prob.padding}
    for j, name in enumerate(prob.padding):
        bit = 1 << (width - 1 - j)
        unary[name] = {a for a in range(st.n) if colour[a] & bit}
    return Structure(st.n, unary, st.binary, st.nullary)


# --- the solution a model induces ----------------------------------------


def solution_from_model(st: Structure, prob, limits: Limits = DEFAULT_LIMITS, check: bool = True) -> dict:
    """theta read off the chromatic ``3mC``-fold duplicate of a model."""
    from .constraint_compiler import generate_E, violated

    chrom = make_chromatic(st, prob)
    big = duplicate(chrom, 3 * prob.m * prob.C)
    types = ProblemTypes(prob, limits)
    v = ModelView(prob, big, types)
    theta = theta_of(v)
    if check:
        cs = generate_E(prob, limits)
        bad = violated(cs, theta)
        if bad:
            raise AssertionError(f"induced solution violates {len(bad)} constraint(s), e.g. {bad[0]}")
    return theta


def theta_of(v: ModelView) -> dict:
    ts = v.ts
    theta: dict = {}

    def inc(key):
        theta[key] = theta.get(key, 0) + 1

    for a in range(v.st.n):
        pi = v.tp[a]
        seen = set()
        for b in v.out[a]:
            tau = v.two_type(a, b)
            if ts.classify(tau) == "invertible-message" and tau not in seen:
                seen.add(tau)
                inc(("x", tau))
        sp, tl = v.all_spectra(a)
        for s, u in sp.items():
            inc(("y", pi, s, u))
            if len(s) < ts.p:
                inc(("yh", pi, s, sp[s + "0"], sp[s + "1"]))
        for t, u in tl.items():
            inc(("z", pi, t, u))
            if len(t) < ts.q:
                inc(("zh", pi, t, tl[t + "0"], tl[t + "1"]))
    return theta


# --- exhaustive oracle ---------------------------------------------------


def oracle_finsat(prob, max_n: int, limits: Limits = DEFAULT_LIMITS) -> Structure | None:
    """Some model of the normal form with at most ``max_n`` elements, or None.

    Padding predicates are left empty (they occur in no conjunct).  Elements
    carry nondecreasing 1-types; each unordered pair chooses which counting
    atoms hold in either direction, pruned by exact counts; the remaining
    binary atoms of the pair are then any choice that is not forbidden.
    """
    if max_n > limits.oracle_max:
        raise CapExceeded(f"oracle domain bound {max_n} exceeds limit {limits.oracle_max}")
    base = replace(prob, padding=()) if prob.padding else prob
    types = ProblemTypes(base, limits)
    ts = types.ts
    ok_types = [pi for pi in range(ts.P) if types.alpha_ok[pi]]
    if not ok_types:
        return None
    cbits = ts.count_bits
    Cv = prob.Cvec
    cm = ts.cmask
    crosses = range(1 << ts.k)

    # pattern table: (pi, rho) -> {(fw & cm, bw & cm): (fw, bw) realising it}
    patterns: dict = {}

    def pats(pi, rho):
        key = (pi, rho)
        if key not in patterns:
            table: dict = {}
            for fw in crosses:
                for bw in crosses:
                    tau = TwoType(pi, rho, fw, bw)
                    if types.is_forbidden(tau) or types.is_forbidden(tau.invert()):
                        continue
                    table.setdefault((fw & cm, bw & cm), (fw, bw))
            patterns[key] = sorted(table.items())
        return patterns[key]

    def counts_of(word):
        return tuple(1 if word & b else 0 for b in cbits)

    for n in range(1, max_n + 1):
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
        # number of pairs not yet decided that involve each element, by position
        remaining_after = []
        for idx in range(len(pairs) + 1):
            rem = [0] * n
            for a, b in pairs[idx:]:
                rem[a] += 1
                rem[b] += 1
            remaining_after.append(rem)
        for tps in _nondecreasing(ok_types, n):
            choice = [None] * len(pairs)
            have = [[0] * len(Cv) for _ in range(n)]
            if _search(0, pairs, tps, choice, have, Cv, remaining_after, pats, counts_of):
                return _assemble(base, ts, n, tps, pairs, choice)
    return None


def _nondecreasing(items, n):
    def go(start, acc):
        if len(acc) == n:
            yield tuple(acc)
            return
        for i in range(start, len(items)):
            acc.append(items[i])
            yield from go(i, acc)
            acc.pop()

    yield from go(0, [])


def _search(idx, pairs, tps, choice, have, Cv, remaining_after, pats, counts_of) -> bool:
    if idx == len(pairs):
        return all(list(h) == list(Cv) for h in have)
    a, b = pairs[idx]
    rem = remaining_after[idx + 1]
    for (pf, pb), real in pats(tps[a], tps[b]):
        ca, cb = counts_of(pf), counts_of(pb)
        good = True
        for i, C in enumerate(Cv):
            ha, hb = have[a][i] + ca[i], have[b][i] + cb[i]
            if ha > C or hb > C or ha + rem[a] < C or hb + rem[b] < C:
                good = False
                break
        if not good:
            continue
        for i in range(len(Cv)):
            have[a][i] += ca[i]
            have[b][i] += cb[i]
        choice[idx] = real
        if _search(idx + 1, pairs, tps, choice, have, Cv, remaining_after, pats, counts_of):
            return True
        for i in range(len(Cv)):
            have[a][i] -= ca[i]
            have[b][i] -= cb[i]
    choice[idx] = None
    return False


def _assemble(prob, ts: TypeSpace, n, tps, pairs, choice) -> Structure:
    unary = {u: set() for u in prob.unary}
    binary = {r: set() for r in prob.binary}
    for a, pi in enumerate(tps):
        for u in prob.unary:
            if pi & ts.unary_bit(u):
                unary[u].add(a)
        for r in prob.binary:
            if pi & ts.bin_bit(r):
                binary[r].add((a, a))
    for (a, b), (fw, bw) in zip(pairs, choice):
        for r in prob.binary:
            bit = ts.bin_bit(r)
            if fw & bit:
                binary[r].add((a, b))
            if bw & bit:
                binary[r].add((b, a))
    return Structure(n, unary, binary)


def oracle_formula(f: Formula, sig: Signature, max_n: int, limits: Limits = DEFAULT_LIMITS) -> Structure | None:
    """Brute-force model search for an arbitrary sentence (tiny signatures only)."""
    if max_n > limits.oracle_max:
        raise CapExceeded(f"oracle domain bound {max_n} exceeds limit {limits.oracle_max}")
    for n in range(1, max_n + 1):
        nbits = len(sig.nullary) + n * len(sig.unary) + n * n * len(sig.binary)
        if nbits > 24:
            raise CapExceeded(f"brute-force formula oracle would enumerate 2^{nbits} structures")
        cells = [("0", p, ()) for p in sig.nullary]
        cells += [("1", p, (a,)) for p in sig.unary for a in range(n)]
        cells += [("2", p, (a, b)) for p in sig.binary for a in range(n) for b in range(n)]
        for vals in product((False, True), repeat=len(cells)):
            st = _from_cells(n, sig, cells, vals)
            if evaluate(f, st):
                return st
    return None


def _from_cells(n, sig, cells, vals) -> Structure:
    unary = {p: set() for p in sig.unary}
    binary = {p: set() for p in sig.binary}
    nullary = {p: False for p in sig.nullary}
    for (kind, p, args), v in zip(cells, vals):
        if not v:
            continue
        if kind == "0":
            nullary[p] = True
        elif kind == "1":
            unary[p].add(args[0])
        else:
            binary[p].add(args)
    return Structure(n, unary, binary, nullary)
