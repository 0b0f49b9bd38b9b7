"""Bit-encoded 1-types and 2-types over a padded signature.

Bit layout (most significant bit first, in signature order):

* a 1-type index has one bit per unary predicate ``q(x)`` followed by one
  bit per binary predicate ``r(x,x)``, so ``P = 2**|sig|``;
* a 2-type is ``(pi1, pi2, fwd, bwd)`` where ``fwd``/``bwd`` hold one bit
  per binary predicate for ``r(x,y)`` / ``r(y,x)``.

Because the 1-types are ordered by their bit word, the block of 1-types
indexed by a bit string ``s`` is exactly the set of indices with prefix
``s``; the same holds for the message lists ``M_pi`` and strings ``t``.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from typing import Callable, Iterator, NamedTuple

from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .syntax import And, Atom, Const, Eq, Formula, Iff, Imp, Not, Or, Signature, render

INVERTIBLE = "invertible-message"
NONINVERTIBLE = "noninvertible-message"
REVERSE_ONLY = "reverse-only"
SILENT = "silent"


class TwoType(NamedTuple):
    pi1: int
    pi2: int
    fwd: int
    bwd: int

    def invert(self) -> "TwoType":
        return TwoType(self.pi2, self.pi1, self.bwd, self.fwd)


def bits(n: int, width: int) -> str:
    return format(n, f"0{width}b") if width else ""


def vectors_upto(C: tuple[int, ...]) -> list[tuple[int, ...]]:
    """All vectors u with 0 <= u <= C, in lexicographic order."""
    return list(product(*(range(c + 1) for c in C)))


def bitstrings(max_len: int) -> Iterator[str]:
    """Bit strings of length 0..max_len, shortest first then lexicographic."""
    for n in range(max_len + 1):
        for i in range(1 << n):
            yield bits(i, n)


class TypeSpace:
    """Enumeration, classification and indexing of types over one signature."""

    def __init__(self, sig: Signature, limits: Limits = DEFAULT_LIMITS):
        if sig.size > limits.max_signature:
            raise CapExceeded(f"signature has {sig.size} predicates (limit {limits.max_signature})")
        self.sig = sig
        self.unary = sig.unary
        self.binary = sig.binary
        self.k = len(self.binary)
        self.p = len(self.unary) + self.k
        self.P = 1 << self.p
        self.kmask = (1 << self.k) - 1
        self.count_names = tuple(n for n, _ in sig.counting)
        self.m = len(self.count_names)
        self.Cvec = tuple(c for _, c in sig.counting)
        self.count_bits = tuple(self.bin_bit(n) for n in self.count_names)
        self.cmask = 0
        for b in self.count_bits:
            self.cmask |= b

        crosses = [(f, b) for f in range(1 << self.k) for b in range(1 << self.k)]
        crosses.sort(key=lambda fb: (fb[0] << self.k) | fb[1])
        cm = self.cmask
        self.inv_crosses = [(f, b) for f, b in crosses if f & cm and b & cm]
        self.msg_crosses = [(f, b) for f, b in crosses if f & cm and not b & cm]
        self.silent_crosses = [(f, b) for f, b in crosses if not f & cm and not b & cm]
        # M_pi is laid out in 2^m classes: one per nonzero C-vector of the
        # forward half (messages), then the silent class.  Inside a class the
        # far-end 1-type comes first, so relabelling 1-type bits acts on
        # M_pi indices by the same bit operation.
        self.classes = [[] for _ in range(1 << self.m)]
        for f, b in self.msg_crosses:
            self.classes[self._cclass(f) - 1].append((f, b))
        self.classes[-1] = list(self.silent_crosses)
        self.W = len(self.silent_crosses)
        assert all(len(c) == self.W for c in self.classes)
        self._cross_pos = {c: (i, j) for i, cl in enumerate(self.classes) for j, c in enumerate(cl)}
        self.R = self.P * len(self.msg_crosses)
        self.Q = self.R + self.P * len(self.silent_crosses)
        self.q = self.Q.bit_length() - 1
        self.w = self.W.bit_length() - 1
        assert 1 << self.q == self.Q

    def _cclass(self, f: int) -> int:
        n = 0
        for b in self.count_bits:
            n = (n << 1) | (1 if f & b else 0)
        return n

    # -- bit helpers --

    def unary_bit(self, name: str) -> int:
        return 1 << (self.p - 1 - self.unary.index(name))

    def bin_bit(self, name: str) -> int:
        """Bit of ``name`` inside a binary word, and inside the low part of a 1-type."""
        return 1 << (self.k - 1 - self.binary.index(name))

    def self_loops(self, pi: int) -> int:
        return pi & self.kmask

    def one_type_literals(self, pi: int) -> dict[str, bool]:
        out = {f"{u}(x)": bool(pi & self.unary_bit(u)) for u in self.unary}
        out.update({f"{r}(x,x)": bool(pi & self.bin_bit(r)) for r in self.binary})
        return out

    def one_types(self) -> range:
        return range(self.P)

    def all_two_types(self) -> Iterator[TwoType]:
        for pi1 in range(self.P):
            for pi2 in range(self.P):
                for f in range(1 << self.k):
                    for b in range(1 << self.k):
                        yield TwoType(pi1, pi2, f, b)

    # -- classification --

    def classify(self, tau: TwoType) -> str:
        fw = bool(tau.fwd & self.cmask)
        bw = bool(tau.bwd & self.cmask)
        if fw and bw:
            return INVERTIBLE
        if fw:
            return NONINVERTIBLE
        if bw:
            return REVERSE_ONLY
        return SILENT

    def is_message(self, tau: TwoType) -> bool:
        return bool(tau.fwd & self.cmask)

    def c_vector(self, tau: TwoType) -> tuple[int, ...]:
        return tuple(1 if tau.fwd & b else 0 for b in self.count_bits)

    # -- blocks indexed by bit strings --

    def pi_block(self, s: str) -> range:
        """Indices of the 1-types in the block named by ``s``."""
        if len(s) > self.p:
            raise ValueError(f"bit string {s!r} longer than p={self.p}")
        width = self.p - len(s)
        start = (int(s, 2) if s else 0) << width
        return range(start, start + (1 << width))

    def m_block(self, t: str) -> range:
        if len(t) > self.q:
            raise ValueError(f"bit string {t!r} longer than q={self.q}")
        width = self.q - len(t)
        start = (int(t, 2) if t else 0) << width
        return range(start, start + (1 << width))

    def lambda_block(self, pi: int, s: str) -> list[TwoType]:
        """Invertible message-types from ``pi`` whose far end lies in the block ``s``."""
        return [TwoType(pi, rho, f, b) for rho in self.pi_block(s) for f, b in self.inv_crosses]

    def lambdas(self) -> Iterator[TwoType]:
        for pi in range(self.P):
            for rho in range(self.P):
                for f, b in self.inv_crosses:
                    yield TwoType(pi, rho, f, b)

    def mu(self, pi: int, j: int) -> TwoType:
        """Entry ``j`` of ``M_pi``: non-invertible messages first, then silent types."""
        if not 0 <= j < self.Q:
            raise IndexError(j)
        cls, rest = divmod(j, self.P * self.W)
        rho, pos = divmod(rest, self.W)
        f, b = self.classes[cls][pos]
        return TwoType(pi, rho, f, b)

    def m_family(self, pi: int) -> list[TwoType]:
        return [self.mu(pi, j) for j in range(self.Q)]

    def mu_leaf(self, pi: int, t: str) -> TwoType:
        if len(t) != self.q:
            raise ValueError("leaf strings have length q")
        return self.mu(pi, int(t, 2) if t else 0)

    def m_index(self, tau: TwoType) -> int:
        """Position of ``tau`` in ``M_{tp1(tau)}``; ``tau`` must not be reverse-only/invertible."""
        cls, pos = self._cross_pos[(tau.fwd, tau.bwd)]
        return (cls * self.P + tau.pi2) * self.W + pos


# --- evaluating quantifier-free matrices on types -------------------------

Evaluator = Callable[[int, int, int, int], bool]


def compile_matrix(f: Formula, ts: TypeSpace) -> Evaluator:
    """Compile a quantifier-free, equality-free formula over x,y to a test on 2-types."""

    def atom(pred, args):
        if len(args) == 1:
            bit = ts.unary_bit(pred) if pred in ts.unary else None
            if bit is None:
                raise ValueError(f"{pred} is not a unary predicate of the type space")
            if args[0] == "x":
                return lambda p1, p2, fw, bw: bool(p1 & bit)
            return lambda p1, p2, fw, bw: bool(p2 & bit)
        bit = ts.bin_bit(pred)
        if args == ("x", "x"):
            return lambda p1, p2, fw, bw: bool(p1 & bit)
        if args == ("y", "y"):
            return lambda p1, p2, fw, bw: bool(p2 & bit)
        if args == ("x", "y"):
            return lambda p1, p2, fw, bw: bool(fw & bit)
        return lambda p1, p2, fw, bw: bool(bw & bit)

    def go(g):
        if isinstance(g, Const):
            v = g.value
            return lambda p1, p2, fw, bw: v
        if isinstance(g, Atom):
            return atom(g.pred, g.args)
        if isinstance(g, Eq):
            if g.left == g.right:
                return lambda p1, p2, fw, bw: True
            raise ValueError(f"equality between distinct variables in a matrix: {render(g)}")
        if isinstance(g, Not):
            a = go(g.arg)
            return lambda p1, p2, fw, bw: not a(p1, p2, fw, bw)
        if isinstance(g, And):
            parts = [go(a) for a in g.args]
            return lambda p1, p2, fw, bw: all(h(p1, p2, fw, bw) for h in parts)
        if isinstance(g, Or):
            parts = [go(a) for a in g.args]
            return lambda p1, p2, fw, bw: any(h(p1, p2, fw, bw) for h in parts)
        if isinstance(g, Imp):
            a, b = go(g.left), go(g.right)
            return lambda p1, p2, fw, bw: (not a(p1, p2, fw, bw)) or b(p1, p2, fw, bw)
        if isinstance(g, Iff):
            a, b = go(g.left), go(g.right)
            return lambda p1, p2, fw, bw: a(p1, p2, fw, bw) == b(p1, p2, fw, bw)
        raise ValueError(f"not a quantifier-free matrix: {render(g)}")

    return go(f)


class ProblemTypes:
    """A :class:`TypeSpace` bound to a normal-form problem (forbidden-type tests)."""

    def __init__(self, prob, limits: Limits = DEFAULT_LIMITS):
        self.prob = prob
        self.ts = TypeSpace(prob.sig, limits)
        ts = self.ts
        alpha = compile_matrix(prob.alpha, ts)
        self.alpha_ok = [alpha(pi, 0, 0, 0) for pi in range(ts.P)]
        self._guards = [(ts.bin_bit(e), compile_matrix(beta, ts)) for e, beta in prob.guards]
        self._forbidden = lru_cache(maxsize=None)(self._compute_forbidden)

    def _compute_forbidden(self, tau: TwoType) -> bool:
        # a pair realising tau also realises its inverse, so the guards are
        # checked in both orders; otherwise a non-invertible message placed
        # in the model could break a guard read from the receiver's side
        if not (self.alpha_ok[tau.pi1] and self.alpha_ok[tau.pi2]):
            return True
        inv = tau.invert()
        for ebit, beta in self._guards:
            if tau.fwd & ebit and not beta(*tau):
                return True
            if inv.fwd & ebit and not beta(*inv):
                return True
        return False

    def is_forbidden(self, tau: TwoType) -> bool:
        return self._forbidden(TwoType(*tau))

    def silent_fill(self, pi: int, rho: int) -> TwoType:
        """The 2-type joining ``pi`` and ``rho`` with every guard atom false."""
        return TwoType(pi, rho, 0, 0)


def is_forbidden(tau: TwoType, prob) -> bool:
    return ProblemTypes(prob).is_forbidden(tau)


def enumerate_one_types(sig: Signature, limits: Limits = DEFAULT_LIMITS) -> range:
    return TypeSpace(sig, limits).one_types()


def classify(tau: TwoType, sig: Signature) -> str:
    return TypeSpace(sig).classify(tau)


def c_vector(tau: TwoType, sig: Signature) -> tuple[int, ...]:
    return TypeSpace(sig).c_vector(tau)


def m_family(pi: int, prob) -> tuple[list[TwoType], int, int]:
    """``(M_pi, R, Q)`` for the problem's padded signature."""
    ts = TypeSpace(prob.sig)
    return ts.m_family(pi), ts.R, ts.Q
