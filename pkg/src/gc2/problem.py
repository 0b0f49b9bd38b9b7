"""Normal-form problems: the object every back-end phase consumes.

A problem stands for the sentence::

    forall x alpha
    & AND_h forall x forall y (e_h(x,y) -> (beta_h | x = y))
    & AND_i forall x exists_{=C_i} y (f_i(x,y) & x != y)

over a signature of unary and binary predicates, optionally padded with
fresh unary "colour" predicates that occur in none of the conjuncts.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .syntax import (
    TRUE,
    And,
    Atom,
    Count,
    Eq,
    Exists,
    Forall,
    Formula,
    GC2Error,
    KEYWORDS,
    Imp,
    Not,
    Or,
    ParseError,
    Signature,
    _Tok,
    _SNode,
    build_formula,
    conj,
    free_vars,
    read_sexprs,
    render,
    walk,
)


@dataclass(frozen=True)
class NormalFormProblem:
    unary: tuple[str, ...]
    binary: tuple[str, ...]
    alpha: Formula
    guards: tuple[tuple[str, Formula], ...]
    counts: tuple[tuple[str, int], ...]
    padding: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "unary", tuple(self.unary))
        object.__setattr__(self, "binary", tuple(self.binary))
        object.__setattr__(self, "guards", tuple((e, b) for e, b in self.guards))
        object.__setattr__(self, "counts", tuple((f, int(c)) for f, c in self.counts))
        object.__setattr__(self, "padding", tuple(self.padding))
        if not self.guards:
            raise GC2Error("a normal-form problem needs at least one guard conjunct")
        if not self.counts:
            raise GC2Error("a normal-form problem needs at least one counting conjunct")
        names = [f for f, _ in self.counts]
        if len(set(names)) != len(names):
            raise GC2Error(f"counting predicates must be pairwise distinct, got {names}")
        sig = self.sig  # validates names and arities
        for e, _ in self.guards:
            if sig.arity(e) != 2:
                raise GC2Error(f"guard predicate {e!r} is not binary")
        _check_matrix(self.alpha, {"x"}, sig, "alpha")
        for e, beta in self.guards:
            _check_matrix(beta, {"x", "y"}, sig, f"beta for {e}")
        used = set()
        for g in [self.alpha] + [b for _, b in self.guards]:
            used |= {a.pred for a in walk(g) if isinstance(a, Atom)}
        clash = used & set(self.padding)
        if clash:
            raise GC2Error(f"padding predicates {sorted(clash)} occur in the conjuncts")

    @property
    def sig(self) -> Signature:
        return Signature((), self.unary + self.padding, self.binary, self.counts)

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.guards)

    @property
    def C(self) -> int:
        return max(c for _, c in self.counts)

    @property
    def Cvec(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.counts)

    def formula(self) -> Formula:
        """The normal-form sentence as an ordinary GC2 formula."""
        parts = [Forall("x", self.alpha)]
        for e, beta in self.guards:
            parts.append(Forall("x", Forall("y", Imp(Atom(e, ("x", "y")), Or((beta, Eq("x", "y")))))))
        for f, c in self.counts:
            parts.append(Forall("x", Count("exactly", c, "y", Atom(f, ("x", "y")), Not(Eq("x", "y")))))
        return And(tuple(parts))

    def digest(self) -> str:
        return hashlib.sha256(render_problem(self).encode()).hexdigest()[:16]


def _check_matrix(f: Formula, allowed: set[str], sig: Signature, what: str) -> None:
    for g in walk(f):
        if isinstance(g, (Forall, Exists, Count)):
            raise GC2Error(f"{what} must be quantifier-free")
        if isinstance(g, Eq):
            raise GC2Error(f"{what} must not mention equality")
        if isinstance(g, Atom):
            ar = sig.arity(g.pred)
            if ar is None or ar != len(g.args):
                raise GC2Error(f"{what}: bad atom {render(g)}")
            if ar == 0:
                raise GC2Error(f"{what}: nullary predicates are not allowed in a normal form")
    if not free_vars(f) <= allowed:
        raise GC2Error(f"{what} may only use variables {sorted(allowed)}")


def padding_count(m: int, C: int) -> int:
    """ceil(log2((mC)^2 + 1)) colour predicates."""
    return ((m * C) ** 2).bit_length()


def pad_signature(p: NormalFormProblem, limits: Limits = DEFAULT_LIMITS) -> NormalFormProblem:
    """Add the fresh unary colour predicates used by the chromatic construction."""
    if p.padding:
        raise GC2Error("problem is already padded")
    n = padding_count(p.m, p.C)
    taken = set(p.unary) | set(p.binary)
    pads = []
    i = 0
    while len(pads) < n:
        name = f"c{i}"
        while name in taken:
            name += "_"
        pads.append(name)
        taken.add(name)
        i += 1
    if len(p.unary) + len(p.binary) + n > limits.max_signature:
        raise CapExceeded(
            f"padded signature has {len(p.unary) + len(p.binary) + n} predicates "
            f"(limit {limits.max_signature})"
        )
    return replace(p, padding=tuple(pads))


# --- text format ---------------------------------------------------------

NF_KEYWORDS = ("alpha", "guard", "count", "end")


def render_problem(p: NormalFormProblem) -> str:
    lines = []
    if p.unary:
        lines.append("unary " + " ".join(p.unary))
    if p.binary:
        lines.append("binary " + " ".join(p.binary))
    if p.padding:
        lines.append("padding " + " ".join(p.padding))
    lines.append("alpha " + render(p.alpha))
    for e, beta in p.guards:
        lines.append(f"guard {e} {render(beta)}")
    for f, c in p.counts:
        lines.append(f"count {f} {c}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _infer_arities(node, out: dict[str, int]) -> None:
    if isinstance(node, _SNode) and node.items and isinstance(node.items[0], _Tok):
        head = node.items[0].text
        if head not in KEYWORDS:
            n = len(node.items) - 1
            if out.setdefault(head, n) != n:
                raise ParseError(f"predicate {head!r} used with different arities", node.line, node.col)
            return
        for it in node.items[1:]:
            _infer_arities(it, out)


def parse_problem(text: str) -> NormalFormProblem:
    """Parse the direct normal-form input format.

    Optional ``unary``/``binary``/``padding`` header lines declare the
    signature; without them arities are inferred from use.
    """
    decl: dict[str, list[str]] = {"unary": [], "binary": [], "padding": []}
    body_lines = []
    for line in text.split("\n"):
        words = line.split(";", 1)[0].split()
        if words and words[0] in decl:
            decl[words[0]].extend(words[1:])
            body_lines.append("")
        else:
            body_lines.append(line)
    items = read_sexprs("\n".join(body_lines))

    # first pass: structure
    entries = []
    i = 0
    ended = False
    while i < len(items):
        tok = items[i]
        if not isinstance(tok, _Tok) or tok.text not in NF_KEYWORDS:
            raise ParseError("expected alpha, guard, count or end", tok.line, tok.col)
        if ended:
            raise ParseError("content after 'end'", tok.line, tok.col)
        kw = tok.text
        if kw == "end":
            ended = True
            i += 1
            continue
        if kw == "alpha":
            if i + 1 >= len(items):
                raise ParseError("alpha needs a formula", tok.line, tok.col)
            entries.append(("alpha", None, items[i + 1], tok))
            i += 2
        elif kw == "guard":
            if i + 2 >= len(items) or not isinstance(items[i + 1], _Tok):
                raise ParseError("guard needs a predicate and a formula", tok.line, tok.col)
            entries.append(("guard", items[i + 1].text, items[i + 2], tok))
            i += 3
        else:
            if i + 2 >= len(items) or not all(isinstance(t, _Tok) for t in items[i + 1 : i + 3]):
                raise ParseError("count needs a predicate and a bound", tok.line, tok.col)
            bound = items[i + 2]
            if not bound.text.isdigit() or int(bound.text) < 1:
                raise ParseError("count bound must be a positive integer", bound.line, bound.col)
            entries.append(("count", items[i + 1].text, int(bound.text), tok))
            i += 3
    if not ended:
        raise ParseError("missing 'end'")

    unary, binary = list(decl["unary"]), list(decl["binary"])
    if not unary and not binary:
        arities: dict[str, int] = {}
        for kind, name, node, _ in entries:
            if kind in ("guard", "count"):
                if arities.setdefault(name, 2) != 2:
                    raise ParseError(f"{name!r} must be binary")
            if kind in ("alpha", "guard"):
                _infer_arities(node, arities)
        for name, ar in arities.items():
            if ar == 1:
                unary.append(name)
            elif ar == 2:
                binary.append(name)
            else:
                raise ParseError(f"predicate {name!r} has unsupported arity {ar}")
    sig = Signature((), tuple(unary) + tuple(decl["padding"]), tuple(binary))

    alphas, guards, counts = [], [], []
    for kind, name, node, tok in entries:
        if kind == "alpha":
            alphas.append(build_formula(node, sig))
        elif kind == "guard":
            guards.append((name, build_formula(node, sig)))
        else:
            counts.append((name, node))
    try:
        return NormalFormProblem(
            tuple(unary),
            tuple(binary),
            conj(alphas) if alphas else TRUE,
            tuple(guards),
            tuple(counts),
            tuple(decl["padding"]),
        )
    except GC2Error as e:
        raise ParseError(str(e)) from None
