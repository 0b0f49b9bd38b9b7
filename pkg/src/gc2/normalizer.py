"""From an arbitrary GC2 sentence to padded normal-form problems.

The pipeline is: name every closed quantified subsentence that is not a
top-level conjunct by a fresh nullary predicate, branch over all truth
assignments to nullary predicates, and compile each surviving branch (a
conjunction of closed sentences and their negations) into one
normal-form problem.

Compilation works innermost-out.  A quantified subformula with one free
variable is replaced by a fresh unary predicate ``p``; only the directions
of ``p <-> Q`` that its polarity requires are emitted.  Every such
direction is written as ``cond(x) -> N y (guard & psi)`` with ``N`` one of
at-least / at-most / exactly ``k`` and is split into a diagonal part
(``y = x``, folded into alpha) and an off-diagonal part realised by guard
pairs and fresh counting predicates.
"""
from __future__ import annotations

from itertools import product

from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .problem import NormalFormProblem, pad_signature
from .syntax import (
    FALSE,
    TRUE,
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
    Signature,
    conj,
    disj,
    free_vars,
    neg,
    predicates,
    rename,
    simplify,
    substitute_atoms,
    swap_xy,
    validate_gc2,
)

POS, NEG = 1, -1
BOTH = frozenset((POS, NEG))


def eliminate_nullary(f: Formula, sig: Signature, limits: Limits = DEFAULT_LIMITS) -> list[tuple[Formula, Signature]]:
    """One simplified branch per truth assignment to the nullary predicates."""
    names = sig.nullary
    if len(names) > limits.max_nullary:
        raise CapExceeded(f"{len(names)} nullary predicates (limit {limits.max_nullary})")
    rest = Signature((), sig.unary, sig.binary, sig.counting)
    out = []
    for values in product((True, False), repeat=len(names)):
        table = dict(zip(names, values))
        out.append((simplify(substitute_atoms(f, table)), rest))
    return out


def _conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return [g for a in f.args for g in _conjuncts(a)]
    return [f]


def _is_quantified(f: Formula) -> bool:
    return isinstance(f, (Forall, Exists, Count))


def _is_sentence_literal(f: Formula) -> bool:
    if isinstance(f, Not):
        f = f.arg
    return _is_quantified(f) and not free_vars(f)


class _Names:
    """Deterministic fresh predicate names avoiding a taken set."""

    def __init__(self, taken):
        self.taken = set(taken)
        self.counter: dict[str, int] = {}

    def fresh(self, prefix: str) -> str:
        while True:
            i = self.counter.get(prefix, 0) + 1
            self.counter[prefix] = i
            name = f"{prefix}{i}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def lift_closed(f: Formula, sig: Signature, limits: Limits = DEFAULT_LIMITS) -> tuple[Formula, Signature]:
    """Replace nested closed quantified subsentences by fresh nullary atoms.

    Returns ``f'`` and the extended signature, where ``f'`` is the
    skeleton conjoined with ``b <-> S`` for every lifted sentence ``S``.
    Top-level conjuncts that are sentences (or negated sentences) stay in
    place, so a plain conjunction of sentences needs no branching.
    """
    names = _Names(sig.nullary + sig.unary + sig.binary)
    new: list[str] = []
    defs: list[Formula] = []

    def go(g: Formula, keep: bool) -> Formula:
        if isinstance(g, (Atom, Eq, Const)):
            return g
        if isinstance(g, Not):
            return Not(go(g.arg, keep))
        if isinstance(g, (And, Or)):
            return type(g)(tuple(go(a, False) for a in g.args))
        if isinstance(g, (Imp, Iff)):
            return type(g)(go(g.left, False), go(g.right, False))
        if isinstance(g, (Forall, Exists)):
            h = type(g)(g.var, go(g.body, False))
        else:
            h = Count(g.kind, g.bound, g.var, g.guard, go(g.body, False))
        if keep or free_vars(h):
            return h
        b = names.fresh("s")
        new.append(b)
        defs.append(Iff(Atom(b, ()), h))
        return Atom(b, ())

    parts = [go(c, True) for c in _conjuncts(f)]
    if len(sig.nullary) + len(new) > limits.max_nullary:
        raise CapExceeded(
            f"{len(sig.nullary)} nullary predicates plus {len(new)} lifted sentences (limit {limits.max_nullary})"
        )
    out_sig = Signature(sig.nullary + tuple(new), sig.unary, sig.binary, sig.counting)
    return conj(parts + defs), out_sig


# --- compilation of one branch ---------------------------------------------


def _ne(f: Formula) -> Formula:
    """``f`` read under ``x != y``: equalities between distinct variables are false."""
    if isinstance(f, Eq):
        return TRUE if f.left == f.right else FALSE
    if isinstance(f, (Atom, Const)):
        return f
    if isinstance(f, Not):
        return Not(_ne(f.arg))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_ne(a) for a in f.args))
    if isinstance(f, (Imp, Iff)):
        return type(f)(_ne(f.left), _ne(f.right))
    raise TypeError(f"expected a quantifier-free formula: {f!r}")


def _diag(f: Formula) -> Formula:
    """``f[y := x]``."""
    return simplify(rename(f, {"y": "x"}))


class _Compiler:
    def __init__(self, sig: Signature):
        self.sig = sig
        self.names = _Names(sig.unary + sig.binary + sig.nullary)
        self.unary: list[str] = []
        self.binary: list[str] = []
        self.alpha: list[Formula] = []
        self.guards: dict[str, list[Formula]] = {}
        self.counts: list[tuple[str, int]] = []

    # fresh symbols
    def fresh_unary(self) -> Atom:
        p = self.names.fresh("p")
        self.unary.append(p)
        return Atom(p, ("x",))

    def fresh_count(self, k: int) -> str:
        f = self.names.fresh("f")
        self.binary.append(f)
        self.counts.append((f, k))
        return f

    def guard(self, gamma: Atom, beta: Formula) -> None:
        """``forall x y (gamma & x != y -> beta)`` as a guard pair on gamma's predicate."""
        if gamma.args != ("x", "y"):
            beta = swap_xy(beta)
        beta = simplify(beta)
        if beta != TRUE:
            self.guards.setdefault(gamma.pred, []).append(beta)

    def require(self, f: Formula) -> None:
        f = simplify(f)
        if f != TRUE:
            self.alpha.append(f)

    # replacing quantified subformulas by unary atoms
    def replace(self, f: Formula, pols: frozenset) -> Formula:
        if isinstance(f, (Atom, Eq, Const)):
            return f
        if isinstance(f, Not):
            return Not(self.replace(f.arg, frozenset(-p for p in pols)))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(self.replace(a, pols) for a in f.args))
        if isinstance(f, Imp):
            return Imp(self.replace(f.left, frozenset(-p for p in pols)), self.replace(f.right, pols))
        if isinstance(f, Iff):
            return Iff(self.replace(f.left, BOTH), self.replace(f.right, BOTH))
        fv = free_vars(f)
        if not fv:
            raise GC2Error("closed subsentence inside a formula; run normalize(), which branches on it")
        if fv == {"y"}:
            return swap_xy(self.replace(swap_xy(f), pols))
        if fv != {"x"}:
            raise GC2Error("quantified subformula with two free variables")
        if isinstance(f, (Forall, Exists)) and "y" not in free_vars(f.body):
            return self.replace(f.body, pols)
        p = self.fresh_unary()
        self.define(p, f, pols)
        return p

    def define(self, cond: Formula, q: Formula, pols: frozenset) -> None:
        """Emit ``cond -> q`` (POS) and/or ``cond' -> not q`` (NEG), q quantified over y."""
        kind, k, gamma, psi = _as_count(q)
        if kind == "exactly":
            body_pols = BOTH
        elif kind == "atmost":
            body_pols = frozenset(-p for p in pols)
        else:
            body_pols = pols
        psi = self.replace(psi, body_pols)
        if POS in pols:
            self.emit(cond, kind, k, gamma, psi)
        if NEG in pols:
            c = neg(cond)
            if kind == "atleast":
                self.emit(c, "atmost", k - 1, gamma, psi)
            elif kind == "atmost":
                self.emit(c, "atleast", k + 1, gamma, psi)
            else:
                q2 = self.fresh_unary()
                self.emit(conj([c, q2]), "atmost", k - 1, gamma, psi)
                self.emit(conj([c, neg(q2)]), "atleast", k + 1, gamma, psi)

    def emit(self, cond: Formula, kind: str, k: int, gamma: Formula, psi: Formula) -> None:
        """``cond(x) -> N_k y (gamma & psi)`` for quantifier-free ``psi``."""
        cond = simplify(cond)
        if cond == FALSE or (kind == "atleast" and k <= 0):
            return
        if kind == "atmost" and k < 0:
            self.require(neg(cond))
            return
        diag = _diag(conj([gamma, psi]))
        if isinstance(gamma, Eq):
            # the only candidate is y = x itself
            if kind == "atmost":
                if k == 0:
                    self.require(Imp(cond, neg(diag)))
            elif k >= 2:
                self.require(neg(cond))
            else:
                self.require(Imp(cond, diag if k == 1 else neg(diag)))
            return
        psi_ne = simplify(_ne(psi))
        for c, kk in ((conj([cond, diag]), k - 1), (conj([cond, neg(diag)]), k)):
            c = simplify(c)
            if c == FALSE:
                continue
            if kk < 0:
                if kind != "atleast":
                    self.require(neg(c))
                continue
            self.emit_ne(c, kind, kk, gamma, psi_ne)

    def emit_ne(self, c: Formula, kind: str, k: int, gamma: Atom, psi: Formula) -> None:
        """``c(x) -> N_k y (y != x & gamma & psi)``."""
        if kind == "atleast" and k == 0:
            return
        if kind in ("atmost", "exactly") and k == 0:
            self.guard(gamma, disj([neg(c), neg(psi)]))
            return
        if (
            kind == "exactly"
            and c == TRUE
            and psi == TRUE
            and gamma.args == ("x", "y")
            and gamma.pred not in {f for f, _ in self.counts}
        ):
            # already a normal-form counting conjunct
            self.counts.append((gamma.pred, k))
            return
        f = self.fresh_count(k)
        fxy = Atom(f, ("x", "y"))
        if kind in ("atleast", "exactly"):
            self.guard(fxy, disj([neg(c), conj([gamma, psi])]))
        if kind in ("atmost", "exactly"):
            self.guard(gamma, disj([neg(c), neg(psi), fxy]))

    def sentence(self, s: Formula) -> None:
        """Compile one closed sentence (or negated sentence) asserted true."""
        if isinstance(s, Not):
            g = s.arg
            if isinstance(g, Forall):
                s = Exists(g.var, Not(g.body))
            elif isinstance(g, Exists):
                s = Forall(g.var, Not(g.body))
            else:
                raise GC2Error("negated counting sentence has free variables")
        if s.var == "y":
            s = swap_xy(s)
        body = simplify(s.body)
        if isinstance(s, Forall):
            for part in _conjuncts(body):
                if _is_quantified(part) and free_vars(part) == {"x"} and not (
                    isinstance(part, (Forall, Exists)) and "y" not in free_vars(part.body)
                ):
                    self.define(TRUE, part, frozenset((POS,)))
                else:
                    self.require(self.replace(part, frozenset((POS,))))
        elif isinstance(s, Exists):
            w = self.fresh_unary()
            self.require(Imp(w, self.replace(body, frozenset((POS,)))))
            f = self.fresh_count(1)
            self.guard(Atom(f, ("x", "y")), disj([w, rename(w, {"x": "y"})]))
        else:
            raise GC2Error("counting sentence has free variables")

    def problem(self) -> NormalFormProblem:
        if not self.counts:
            self.fresh_count(1)
        if not self.guards:
            self.guards[self.counts[0][0]] = [TRUE]
        guards = tuple((e, simplify(conj(bs))) for e, bs in self.guards.items())
        alpha = simplify(conj(self.alpha))
        used = predicates(alpha)
        for e, b in guards:
            used |= predicates(b) | {e}
        used |= {f for f, _ in self.counts}
        unary = tuple(u for u in self.sig.unary + tuple(self.unary) if u in used)
        binary = tuple(r for r in self.sig.binary + tuple(self.binary) if r in used)
        return NormalFormProblem(unary, binary, alpha, guards, tuple(self.counts))


def _as_count(q: Formula) -> tuple[str, int, Formula, Formula]:
    """Read a quantified formula with free x, bound y, as ``N_k y (gamma & psi)``."""
    if isinstance(q, Forall):
        body = q.body
        if not isinstance(body, Imp):
            raise GC2Error("unguarded universal quantifier")
        return "atmost", 0, body.left, simplify(neg(body.right))
    if isinstance(q, Exists):
        body = q.body
        if not isinstance(body, And):
            raise GC2Error("unguarded existential quantifier")
        return "atleast", 1, body.args[0], simplify(conj(list(body.args[1:])))
    return q.kind, q.bound, q.guard, simplify(q.body)


def scott_normalize(f: Formula, sig: Signature) -> NormalFormProblem:
    """Compile a nullary-free conjunction of closed sentences and their negations.

    Formulas that still contain a closed subsentence in another position
    are rejected; :func:`normalize` lifts and branches on those first.
    """
    if sig.nullary:
        raise GC2Error("eliminate nullary predicates first")
    comp = _Compiler(sig)
    f = simplify(f)
    for c in _conjuncts(f):
        if c == FALSE:
            comp.require(FALSE)
        elif c == TRUE:
            continue
        elif _is_sentence_literal(c):
            comp.sentence(c)
        else:
            raise GC2Error("top-level connective over sentences; run normalize(), which branches")
    return comp.problem()


def normalize_branches(
    f: Formula, sig: Signature, limits: Limits = DEFAULT_LIMITS
) -> list[tuple[dict, NormalFormProblem]]:
    """Padded normal-form problems, each with the values it fixes for the input's nullary predicates.

    The input is (finitely) satisfiable iff one of the problems is.  There
    is always at least one: when every branch folds to false the result is
    a single problem with ``alpha = false``.
    """
    validate_gc2(f, sig)
    lifted, lsig = lift_closed(simplify(f), sig, limits)
    out: list[tuple[dict, NormalFormProblem]] = []
    seen = set()
    names = lsig.nullary
    for values, (branch, bsig) in zip(
        product((True, False), repeat=len(names)), eliminate_nullary(lifted, lsig, limits)
    ):
        if branch == FALSE:
            continue
        p = pad_signature(scott_normalize(branch, bsig), limits)
        if p.digest() not in seen:
            seen.add(p.digest())
            table = {b: v for b, v in zip(names, values) if b in sig.nullary}
            out.append((table, p))
    if not out:
        bare = Signature((), sig.unary, sig.binary)
        table = {b: False for b in sig.nullary}
        out.append((table, pad_signature(scott_normalize(FALSE, bare), limits)))
    return out


def normalize(f: Formula, sig: Signature, limits: Limits = DEFAULT_LIMITS) -> list[NormalFormProblem]:
    return [p for _, p in normalize_branches(f, sig, limits)]


#: An infinity axiom: every element has exactly two f-successors and
#: exactly one g-successor, and every f-edge is answered by a g-edge
#: backwards.  So f-in-degree is at most 1 while f-out-degree is 2, which
#: no finite structure allows; the infinite binary tree is a model.
PSI_INF = """binary f g
(and
  (forall x (exactly 2 y (and (f x y) (not (= x y)))))
  (forall x (exactly 1 y (and (g x y) (not (= x y)))))
  (forall x (forall y (imp (f x y) (or (g y x) (= x y))))))
"""
