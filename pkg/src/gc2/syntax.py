"""Abstract syntax, parser, printer and guardedness check for GC2 formulas.

Formulas are immutable trees over the two variables ``x`` and ``y``.  The
concrete syntax is a small s-expression language::

    nullary b
    unary p q
    binary f
    (and (forall x (p x))
         (forall x (exactly 1 y (and (f x y) (not (= x y))))))

Counting quantifiers always keep their guard atom apart from the body, so
``(atleast 2 y (and (f x y) (q y)))`` parses to a :class:`Count` node with
guard ``f(x,y)`` and body ``q(y)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

VARS = ("x", "y")
COUNT_KINDS = ("atleast", "atmost", "exactly")
KEYWORDS = frozenset(
    {"and", "or", "not", "imp", "iff", "forall", "exists", "true", "false", "="}
    | set(COUNT_KINDS)
    | set(VARS)
)
HEADER_KEYWORDS = ("nullary", "unary", "binary")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_']*\Z")


class GC2Error(Exception):
    """Base class for errors raised on malformed input."""


class ParseError(GC2Error):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + msg)


class GuardViolation(GC2Error):
    def __init__(self, msg: str, subformula: "Formula"):
        self.subformula = subformula
        super().__init__(f"{msg}: {render(subformula)}")


@dataclass(frozen=True)
class Signature:
    nullary: tuple[str, ...] = ()
    unary: tuple[str, ...] = ()
    binary: tuple[str, ...] = ()
    # (name, bound) pairs naming the counting predicates f_1..f_m
    counting: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nullary", tuple(self.nullary))
        object.__setattr__(self, "unary", tuple(self.unary))
        object.__setattr__(self, "binary", tuple(self.binary))
        object.__setattr__(self, "counting", tuple((n, int(c)) for n, c in self.counting))
        names = self.nullary + self.unary + self.binary
        if len(set(names)) != len(names):
            raise GC2Error(f"predicate names must be distinct: {names}")
        for n in names:
            if not _NAME_RE.match(n) or n in KEYWORDS:
                raise GC2Error(f"bad predicate name {n!r}")
        cnames = [n for n, _ in self.counting]
        if len(set(cnames)) != len(cnames):
            raise GC2Error("counting predicates must be pairwise distinct")
        for n, c in self.counting:
            if n not in self.binary:
                raise GC2Error(f"counting predicate {n!r} is not binary")
            if c < 1:
                raise GC2Error(f"counting bound for {n!r} must be positive")

    def arity(self, name: str) -> int | None:
        if name in self.nullary:
            return 0
        if name in self.unary:
            return 1
        if name in self.binary:
            return 2
        return None

    @property
    def size(self) -> int:
        """Number of unary and binary predicates (nullary ones are not counted)."""
        return len(self.unary) + len(self.binary)


# --- formula nodes -------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Imp:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Count:
    kind: str  # one of COUNT_KINDS
    bound: int
    var: str
    guard: "Formula"
    body: "Formula"


Formula = Union[Atom, Eq, Const, Not, And, Or, Imp, Iff, Forall, Exists, Count]

TRUE = Const(True)
FALSE = Const(False)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Atom, Eq, Const)):
        return ()
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, (Imp, Iff)):
        return (f.left, f.right)
    if isinstance(f, (Forall, Exists)):
        return (f.body,)
    if isinstance(f, Count):
        return (f.guard, f.body)
    raise TypeError(f"not a formula: {f!r}")


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset(f.args)
    if isinstance(f, Eq):
        return frozenset((f.left, f.right))
    if isinstance(f, (Forall, Exists, Count)):
        inner = free_vars(f.body)
        if isinstance(f, Count):
            inner |= free_vars(f.guard)
        return inner - {f.var}
    out: frozenset[str] = frozenset()
    for c in children(f):
        out |= free_vars(c)
    return out


def predicates(f: Formula) -> set[str]:
    return {g.pred for g in walk(f) if isinstance(g, Atom)}


def formula_size(f: Formula) -> int:
    """Node count, plus the binary length of every counting subscript."""
    total = 0
    for g in walk(f):
        total += 1
        if isinstance(g, Count):
            total += g.bound.bit_length()
    return total


def is_guard_atom(g: Formula, sig: Signature | None = None) -> bool:
    if isinstance(g, Eq):
        return {g.left, g.right} == {"x", "y"}
    if isinstance(g, Atom) and len(g.args) == 2 and set(g.args) == {"x", "y"}:
        return sig is None or sig.arity(g.pred) == 2
    return False


# --- rendering -----------------------------------------------------------


def render(f: Formula) -> str:
    if isinstance(f, Atom):
        return "(" + " ".join((f.pred,) + f.args) + ")"
    if isinstance(f, Eq):
        return f"(= {f.left} {f.right})"
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return f"(not {render(f.arg)})"
    if isinstance(f, And):
        return "(and " + " ".join(render(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(render(a) for a in f.args) + ")"
    if isinstance(f, Imp):
        return f"(imp {render(f.left)} {render(f.right)})"
    if isinstance(f, Iff):
        return f"(iff {render(f.left)} {render(f.right)})"
    if isinstance(f, Forall):
        return f"(forall {f.var} {render(f.body)})"
    if isinstance(f, Exists):
        return f"(exists {f.var} {render(f.body)})"
    if isinstance(f, Count):
        return f"({f.kind} {f.bound} {f.var} (and {render(f.guard)} {render(f.body)}))"
    raise TypeError(f"not a formula: {f!r}")


def render_signature(sig: Signature) -> str:
    lines = []
    for kw, names in zip(HEADER_KEYWORDS, (sig.nullary, sig.unary, sig.binary)):
        if names:
            lines.append(" ".join((kw,) + names))
    return "\n".join(lines)


def render_file(sig: Signature, f: Formula) -> str:
    head = render_signature(sig)
    return (head + "\n" if head else "") + render(f) + "\n"


# --- parsing -------------------------------------------------------------


@dataclass
class _Tok:
    text: str
    line: int
    col: int


@dataclass
class _SNode:
    items: list = field(default_factory=list)
    line: int = 0
    col: int = 0


def _tokenize(text: str, line0: int = 1) -> list[_Tok]:
    toks = []
    for lineno, line in enumerate(text.split("\n"), start=line0):
        i = 0
        while i < len(line):
            ch = line[i]
            if ch == ";":
                break
            if ch.isspace():
                i += 1
            elif ch in "()":
                toks.append(_Tok(ch, lineno, i + 1))
                i += 1
            else:
                j = i
                while j < len(line) and not line[j].isspace() and line[j] not in "();":
                    j += 1
                toks.append(_Tok(line[i:j], lineno, i + 1))
                i = j
    return toks


def read_sexprs(text: str, line0: int = 1) -> list:
    """Read s-expressions into nested :class:`_SNode` / :class:`_Tok` values."""
    toks = _tokenize(text, line0)
    out: list = []
    stack: list[_SNode] = []
    for t in toks:
        if t.text == "(":
            stack.append(_SNode([], t.line, t.col))
        elif t.text == ")":
            if not stack:
                raise ParseError("unbalanced ')'", t.line, t.col)
            node = stack.pop()
            (stack[-1].items if stack else out).append(node)
        else:
            (stack[-1].items if stack else out).append(t)
    if stack:
        raise ParseError("unclosed '('", stack[-1].line, stack[-1].col)
    return out


def _where(node) -> tuple[int, int]:
    return node.line, node.col


def _var(tok, allowed=VARS) -> str:
    if not isinstance(tok, _Tok):
        raise ParseError("expected a variable", *_where(tok))
    if tok.text not in allowed:
        raise ParseError(f"variable must be x or y, got {tok.text!r}", tok.line, tok.col)
    return tok.text


def build_formula(node, sig: Signature) -> Formula:
    """Turn one s-expression into a formula, checking predicate arities."""
    if isinstance(node, _Tok):
        if node.text == "true":
            return TRUE
        if node.text == "false":
            return FALSE
        raise ParseError(f"unexpected symbol {node.text!r}", node.line, node.col)
    if not node.items:
        raise ParseError("empty expression", *_where(node))
    head = node.items[0]
    if not isinstance(head, _Tok):
        raise ParseError("expected an operator or predicate", *_where(node))
    op, rest = head.text, node.items[1:]

    def sub(i):
        return build_formula(rest[i], sig)

    def need(n):
        if len(rest) != n:
            raise ParseError(f"'{op}' takes {n} argument(s), got {len(rest)}", head.line, head.col)

    if op in ("and", "or"):
        if not rest:
            raise ParseError(f"'{op}' needs at least one argument", head.line, head.col)
        args = tuple(build_formula(r, sig) for r in rest)
        return And(args) if op == "and" else Or(args)
    if op == "not":
        need(1)
        return Not(sub(0))
    if op in ("imp", "iff"):
        need(2)
        return (Imp if op == "imp" else Iff)(sub(0), sub(1))
    if op in ("forall", "exists"):
        need(2)
        return (Forall if op == "forall" else Exists)(_var(rest[0]), sub(1))
    if op in COUNT_KINDS:
        need(3)
        ntok = rest[0]
        if not isinstance(ntok, _Tok) or not ntok.text.isdigit() or int(ntok.text) < 1:
            raise ParseError("counting bound must be a positive decimal integer", *_where(ntok))
        var = _var(rest[1])
        body = rest[2]
        if (
            isinstance(body, _SNode)
            and body.items
            and isinstance(body.items[0], _Tok)
            and body.items[0].text == "and"
            and len(body.items) >= 2
        ):
            parts = [build_formula(b, sig) for b in body.items[1:]]
            guard = parts[0]
            if len(parts) == 1:
                inner: Formula = TRUE
            elif len(parts) == 2:
                inner = parts[1]
            else:
                inner = And(tuple(parts[1:]))
        else:
            # no (and guard ...) wrapper; the validator rejects this later
            guard, inner = build_formula(body, sig), TRUE
        return Count(op, int(ntok.text), var, guard, inner)
    if op == "=":
        need(2)
        return Eq(_var(rest[0]), _var(rest[1]))
    if op in KEYWORDS:
        raise ParseError(f"misplaced keyword {op!r}", head.line, head.col)
    ar = sig.arity(op)
    if ar is None:
        raise ParseError(f"unknown predicate {op!r}", head.line, head.col)
    if len(rest) != ar:
        raise ParseError(f"predicate {op!r} has arity {ar}, got {len(rest)} argument(s)", head.line, head.col)
    return Atom(op, tuple(_var(r) for r in rest))


def split_header(text: str) -> tuple[dict[str, list[str]], str, int]:
    """Strip leading ``nullary/unary/binary`` lines.

    Returns the declared names by keyword, the remaining text and the line
    number at which it starts.
    """
    decl: dict[str, list[str]] = {k: [] for k in HEADER_KEYWORDS}
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        stripped = lines[i].split(";", 1)[0].strip()
        if not stripped:
            i += 1
            continue
        words = stripped.split()
        if words[0] not in HEADER_KEYWORDS:
            break
        decl[words[0]].extend(words[1:])
        i += 1
    return decl, "\n".join(lines[i:]), i + 1


def parse_signature(decl: dict[str, list[str]]) -> Signature:
    try:
        return Signature(tuple(decl["nullary"]), tuple(decl["unary"]), tuple(decl["binary"]))
    except GC2Error as e:
        raise ParseError(str(e)) from None


def parse_formula(text: str) -> tuple[Signature, Formula]:
    """Parse a formula file: optional header lines, then one s-expression."""
    decl, body, line0 = split_header(text)
    sig = parse_signature(decl)
    exprs = read_sexprs(body, line0)
    if len(exprs) != 1:
        if not exprs:
            raise ParseError("no formula found")
        extra = exprs[1]
        raise ParseError("expected exactly one formula", *_where(extra))
    return sig, build_formula(exprs[0], sig)


def parse_expr(text: str, sig: Signature) -> Formula:
    exprs = read_sexprs(text)
    if len(exprs) != 1:
        raise ParseError(f"expected one formula in {text!r}")
    return build_formula(exprs[0], sig)


# --- GC2 validation ------------------------------------------------------


@dataclass(frozen=True)
class Validated:
    """A formula accepted by :func:`validate_gc2`, with free variables per node."""

    formula: Formula
    free: dict = field(compare=False, hash=False, repr=False)


def validate_gc2(f: Formula, sig: Signature) -> Validated:
    free: dict = {}

    def check_atom(g):
        if isinstance(g, Atom):
            ar = sig.arity(g.pred)
            if ar is None:
                raise GuardViolation("unknown predicate", g)
            if ar != len(g.args) or any(a not in VARS for a in g.args):
                raise GuardViolation("malformed atom", g)
        elif isinstance(g, Eq):
            if g.left not in VARS or g.right not in VARS:
                raise GuardViolation("malformed equality", g)

    def visit(g) -> frozenset:
        if isinstance(g, (Atom, Eq)):
            check_atom(g)
            fv = free_vars(g)
        elif isinstance(g, Const):
            fv = frozenset()
        elif isinstance(g, (Not, And, Or, Imp, Iff)):
            fv = frozenset().union(*(visit(c) for c in children(g)))
        elif isinstance(g, (Forall, Exists)):
            if g.var not in VARS:
                raise GuardViolation("bad quantified variable", g)
            inner = visit(g.body)
            if len(inner) > 1:
                # rule 3: forall u (guard -> phi) / exists u (guard & phi)
                if isinstance(g, Forall):
                    ok = isinstance(g.body, Imp) and is_guard_atom(g.body.left, sig)
                else:
                    ok = (
                        isinstance(g.body, And)
                        and len(g.body.args) >= 2
                        and is_guard_atom(g.body.args[0], sig)
                    )
                if not ok:
                    raise GuardViolation("unguarded quantification of a formula with two free variables", g)
            fv = inner - {g.var}
        elif isinstance(g, Count):
            if g.var not in VARS:
                raise GuardViolation("bad quantified variable", g)
            if g.bound < 1:
                raise GuardViolation("counting bound must be positive", g)
            if not is_guard_atom(g.guard, sig):
                raise GuardViolation("counting quantifier without a guard atom", g)
            check_atom(g.guard)
            fv = (visit(g.guard) | visit(g.body)) - {g.var}
        else:
            raise TypeError(f"not a formula: {g!r}")
        free[g] = fv
        return fv

    visit(f)
    return Validated(f, free)


# --- small formula utilities used by later phases ------------------------


def rename(f: Formula, mapping: dict[str, str]) -> Formula:
    """Rename free variables simultaneously (bound occurrences untouched)."""

    def go(g, m):
        if isinstance(g, Atom):
            return Atom(g.pred, tuple(m.get(a, a) for a in g.args))
        if isinstance(g, Eq):
            return Eq(m.get(g.left, g.left), m.get(g.right, g.right))
        if isinstance(g, Const):
            return g
        if isinstance(g, Not):
            return Not(go(g.arg, m))
        if isinstance(g, And):
            return And(tuple(go(a, m) for a in g.args))
        if isinstance(g, Or):
            return Or(tuple(go(a, m) for a in g.args))
        if isinstance(g, Imp):
            return Imp(go(g.left, m), go(g.right, m))
        if isinstance(g, Iff):
            return Iff(go(g.left, m), go(g.right, m))
        inner = {k: v for k, v in m.items() if k != g.var}
        if any(v == g.var for v in inner.values()):
            raise ValueError("renaming would capture a bound variable")
        if isinstance(g, Forall):
            return Forall(g.var, go(g.body, inner))
        if isinstance(g, Exists):
            return Exists(g.var, go(g.body, inner))
        return Count(g.kind, g.bound, g.var, go(g.guard, inner), go(g.body, inner))

    return go(f, mapping)


def swap_xy(f: Formula) -> Formula:
    """Exchange x and y everywhere, binders included; meaning is kept up to the swap."""
    sw = {"x": "y", "y": "x"}
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(sw.get(a, a) for a in f.args))
    if isinstance(f, Eq):
        return Eq(sw[f.left], sw[f.right])
    if isinstance(f, Const):
        return f
    if isinstance(f, Not):
        return Not(swap_xy(f.arg))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(swap_xy(a) for a in f.args))
    if isinstance(f, (Imp, Iff)):
        return type(f)(swap_xy(f.left), swap_xy(f.right))
    if isinstance(f, (Forall, Exists)):
        return type(f)(sw[f.var], swap_xy(f.body))
    return Count(f.kind, f.bound, sw[f.var], swap_xy(f.guard), swap_xy(f.body))


def conj(parts) -> Formula:
    parts = [p for p in parts if p != TRUE]
    if any(p == FALSE for p in parts):
        return FALSE
    if not parts:
        return TRUE
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def disj(parts) -> Formula:
    parts = [p for p in parts if p != FALSE]
    if any(p == TRUE for p in parts):
        return TRUE
    if not parts:
        return FALSE
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return Const(not f.value)
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def simplify(f: Formula) -> Formula:
    """Constant folding; also flattens nested and/or."""
    if isinstance(f, (Atom, Const)):
        return f
    if isinstance(f, Eq):
        return TRUE if f.left == f.right else f
    if isinstance(f, Not):
        return neg(simplify(f.arg))
    if isinstance(f, (And, Or)):
        flat = []
        for a in f.args:
            a = simplify(a)
            if type(a) is type(f):
                flat.extend(a.args)
            else:
                flat.append(a)
        return conj(flat) if isinstance(f, And) else disj(flat)
    if isinstance(f, Imp):
        return disj([neg(simplify(f.left)), simplify(f.right)])
    if isinstance(f, Iff):
        a, b = simplify(f.left), simplify(f.right)
        if isinstance(a, Const):
            return b if a.value else neg(b)
        if isinstance(b, Const):
            return a if b.value else neg(a)
        return Iff(a, b)
    if isinstance(f, Forall) and isinstance(f.body, Imp) and is_guard_atom(f.body.left):
        rest = simplify(f.body.right)
        return TRUE if rest == TRUE else Forall(f.var, Imp(f.body.left, rest))
    if isinstance(f, Exists) and isinstance(f.body, And) and is_guard_atom(f.body.args[0]):
        rest = simplify(conj(f.body.args[1:]) if len(f.body.args) > 1 else TRUE)
        return FALSE if rest == FALSE else Exists(f.var, And((f.body.args[0], rest)))
    if isinstance(f, (Forall, Exists)):
        body = simplify(f.body)
        if isinstance(body, Const):
            return body
        return type(f)(f.var, body)
    if isinstance(f, Count):
        guard, body = simplify(f.guard), simplify(f.body)
        if body == FALSE or guard == FALSE:
            # nothing satisfies the matrix
            return TRUE if f.kind == "atmost" else FALSE
        return Count(f.kind, f.bound, f.var, guard, body)
    raise TypeError(f"not a formula: {f!r}")


def substitute_atoms(f: Formula, table: dict[str, bool]) -> Formula:
    """Replace nullary atoms by truth values."""
    if isinstance(f, Atom):
        if not f.args and f.pred in table:
            return Const(table[f.pred])
        return f
    if isinstance(f, (Eq, Const)):
        return f
    if isinstance(f, Not):
        return Not(substitute_atoms(f.arg, table))
    if isinstance(f, And):
        return And(tuple(substitute_atoms(a, table) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(substitute_atoms(a, table) for a in f.args))
    if isinstance(f, Imp):
        return Imp(substitute_atoms(f.left, table), substitute_atoms(f.right, table))
    if isinstance(f, Iff):
        return Iff(substitute_atoms(f.left, table), substitute_atoms(f.right, table))
    if isinstance(f, Forall):
        return Forall(f.var, substitute_atoms(f.body, table))
    if isinstance(f, Exists):
        return Exists(f.var, substitute_atoms(f.body, table))
    return Count(f.kind, f.bound, f.var, f.guard, substitute_atoms(f.body, table))
