"""The variable space V and the constraint system E = E1 u E2 u E3.

Variables are plain tuples so they hash and sort cheaply:

* ``("x", lam)``            one per invertible message-type ``lam``
* ``("y", pi, s, u)``       spectrum counts, ``len(s) <= p``
* ``("z", pi, t, u)``       tally counts, ``len(t) <= q``
* ``("yh", pi, s, v, w)``   spectrum splits, ``len(s) < p``
* ``("zh", pi, t, v, w)``   tally splits, ``len(t) < q``

Every constraint has one of four shapes: ``SumEq`` (sum of terms equals a
variable), ``SumGe1``, ``Zero`` and ``Cond`` (``x > 0 => sum >= D``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .syntax import GC2Error, ParseError
from .typespace import ProblemTypes, TwoType, bits, vectors_upto

TAGS = ("x", "y", "z", "yh", "zh")


class SumEq(NamedTuple):
    terms: tuple
    target: tuple


class SumGe1(NamedTuple):
    terms: tuple


class Zero(NamedTuple):
    var: tuple


class Cond(NamedTuple):
    ante: tuple
    terms: tuple
    D: int


Constraint = SumEq | SumGe1 | Zero | Cond


@dataclass
class ConstraintSet:
    vars: list
    constraints: list
    m: int
    C: int
    prob: object = None
    families: dict = field(default_factory=dict)
    # >1 when the set is the quotient by colour relabelling (see Orbits)
    orbit: int = 1

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.vars)}

    def __len__(self):
        return len(self.constraints)


def family_sizes(P: int, p: int, Q: int, q: int, n_inv_cross: int, n_vec: int) -> dict[str, int]:
    """Closed-form sizes of the five variable families."""
    return {
        "x": P * P * n_inv_cross,
        "y": P * ((1 << (p + 1)) - 1) * n_vec,
        "z": P * ((1 << (q + 1)) - 1) * n_vec,
        "yh": P * ((1 << p) - 1) * n_vec * n_vec,
        "zh": P * ((1 << q) - 1) * n_vec * n_vec,
    }


def _strings(n: int):
    for length in range(n + 1):
        for i in range(1 << length):
            yield bits(i, length)


class Orbits:
    """Canonical representatives under relabelling of the padding colours.

    Padding predicates occur in no conjunct, so XOR-ing the colour bits of
    every 1-type by one mask maps E onto itself.  Every variable is
    anchored at a 1-type ``pi`` (its first 1-type), and the group acts
    freely there, so the representative of an orbit is the member whose
    anchor has all colour bits clear.
    """

    def __init__(self, ts, mask: int = 0):
        self.ts = ts
        self.mask = mask
        self.size = 1 << bin(mask).count("1")

    def base(self, pi: int) -> bool:
        return not pi & self.mask

    def image(self, v, M: int):
        """``v`` relabelled by the colour mask ``M``."""
        if not M:
            return v
        ts = self.ts
        tag = v[0]
        if tag == "x":
            lam = v[1]
            return ("x", TwoType(lam.pi1 ^ M, lam.pi2 ^ M, lam.fwd, lam.bwd))
        s = v[2]
        # M acting on bit strings of the far-end tree
        Ms, depth = (M, ts.p) if tag in ("y", "yh") else (M << ts.w, ts.q)
        if s:
            s = bits(int(s, 2) ^ (Ms >> (depth - len(s))), len(s))
        if tag in ("yh", "zh") and (Ms >> (depth - len(s) - 1)) & 1:
            # the two halves below s trade places
            return (tag, v[1] ^ M, s, v[4], v[3])
        return (tag, v[1] ^ M, s) + v[3:]

    def canon(self, v):
        anchor = v[1].pi1 if v[0] == "x" else v[1]
        return self.image(v, anchor & self.mask)


def colour_mask(prob, ts) -> int:
    mask = 0
    for c in prob.padding:
        mask |= ts.unary_bit(c)
    return mask


def build_variable_space(
    prob, limits: Limits = DEFAULT_LIMITS, types: ProblemTypes | None = None, symmetric: bool = False
) -> list:
    """All of V, or only the orbit representatives when ``symmetric``."""
    types = types or ProblemTypes(prob, limits)
    ts = types.ts
    U = vectors_upto(prob.Cvec)
    sizes = family_sizes(ts.P, ts.p, ts.Q, ts.q, len(ts.inv_crosses), len(U))
    total = sum(sizes.values())
    orb = Orbits(ts, colour_mask(prob, ts) if symmetric else 0)
    if total // orb.size > limits.max_vars:
        what = "orbit representatives" if symmetric else "variables"
        raise CapExceeded(f"variable space has {total // orb.size} {what} (limit {limits.max_vars})")
    anchors = [pi for pi in range(ts.P) if orb.base(pi)]
    out = [("x", lam) for lam in ts.lambdas() if orb.base(lam.pi1)]
    for pi in anchors:
        for s in _strings(ts.p):
            out.extend(("y", pi, s, u) for u in U)
    for pi in anchors:
        for t in _strings(ts.q):
            out.extend(("z", pi, t, u) for u in U)
    for pi in anchors:
        for s in _strings(ts.p - 1) if ts.p else ():
            out.extend(("yh", pi, s, v, w) for v in U for w in U)
    for pi in anchors:
        for t in _strings(ts.q - 1) if ts.q else ():
            out.extend(("zh", pi, t, v, w) for v in U for w in U)
    assert len(out) == total // orb.size
    return out


def vadd(u, v):
    return tuple(a + b for a, b in zip(u, v))


def vsub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def vle(u, v):
    return all(a <= b for a, b in zip(u, v))


def is_scalar_multiple(u, c) -> bool:
    """True iff ``u = n * c`` for some natural ``n`` (``c`` a 0/1 vector)."""
    n = None
    for a, b in zip(u, c):
        if b == 0:
            if a != 0:
                return False
        elif n is None:
            n = a
        elif a != n * b:
            return False
    return True


def generate_E(prob, limits: Limits = DEFAULT_LIMITS, symmetric: bool = False) -> ConstraintSet:
    """E1 u E2 u E3 for ``prob``.

    With ``symmetric`` the result is the quotient of E by colour
    relabelling: every variable is replaced by its orbit representative.
    A point is feasible for the quotient iff the point that copies it onto
    every orbit member is feasible for E, and orbit-averaging turns any
    rational (or {0, aleph0}) solution of E into such a point.
    """
    types = ProblemTypes(prob, limits)
    ts = types.ts
    V = build_variable_space(prob, limits, types, symmetric)
    orb = Orbits(ts, colour_mask(prob, ts) if symmetric else 0)
    c = orb.canon if symmetric else (lambda v: v)
    anchors = [pi for pi in range(ts.P) if orb.base(pi)]
    Cv = prob.Cvec
    U = vectors_upto(Cv)
    Upos = [u for u in U if any(u)]
    P, p, q = ts.P, ts.p, ts.q
    D = 3 * prob.m * prob.C
    out: list = []
    add = out.append

    # E1
    for pi in anchors:
        for u in U:
            add(SumEq((("y", pi, "", vsub(Cv, u)),), ("z", pi, "", u)))
    for tag, hat, depth in (("y", "yh", p), ("z", "zh", q)):
        for pi in anchors:
            for s in _strings(depth - 1) if depth else ():
                for u in U:
                    terms = []
                    for v in U:
                        if vle(v, u):
                            terms.append((hat, pi, s, v, vsub(u, v)))
                    add(SumEq(tuple(terms), (tag, pi, s, u)))
                for v in U:
                    terms = tuple((hat, pi, s, v, w) for w in U if vle(vadd(v, w), Cv))
                    add(SumEq(terms, (tag, pi, s + "0", v)))
                for w in U:
                    terms = tuple((hat, pi, s, v, w) for v in U if vle(vadd(v, w), Cv))
                    add(SumEq(terms, (tag, pi, s + "1", w)))
    add(SumGe1(tuple(dict.fromkeys(c(("y", pi, "", u)) for pi in range(P) for u in U))))

    # E2
    by_vec: dict = {}
    for f, b in ts.inv_crosses:
        by_vec.setdefault(ts.c_vector(TwoType(0, 0, f, b)), []).append((f, b))
    for pi in anchors:
        for rho in range(P):
            s = bits(rho, p)
            for u in Upos:
                terms = tuple(("x", TwoType(pi, rho, f, b)) for f, b in by_vec.get(u, ()))
                add(SumEq(terms, ("y", pi, s, u)))
    for pi in anchors:
        for j in range(ts.Q):
            t = bits(j, q)
            cvec = ts.c_vector(ts.mu(pi, j))
            for u in Upos:
                if not is_scalar_multiple(u, cvec):
                    add(Zero(("z", pi, t, u)))
    lams = [lam for lam in ts.lambdas() if orb.base(lam.pi1)]
    for lam in lams:
        a, b = c(("x", lam)), c(("x", lam.invert()))
        if a < b:
            add(SumEq((a,), b))
        elif b < a and symmetric:
            add(SumEq((b,), a))
    for lam in lams:
        if lam.pi1 == lam.pi2:
            add(Zero(("x", lam)))
    for lam in lams:
        if types.is_forbidden(lam):
            add(Zero(("x", lam)))
    for pi in anchors:
        for j in range(ts.Q):
            if types.is_forbidden(ts.mu(pi, j)):
                t = bits(j, q)
                for u in Upos:
                    add(Zero(("z", pi, t, u)))

    # E3
    for pi in anchors:
        for j in range(ts.Q):
            t = bits(j, q)
            rho = ts.mu(pi, j).pi2
            block = tuple(c(("y", rho, "", u)) for u in U)
            for u in Upos:
                add(Cond(("z", pi, t, u), block, D))

    if symmetric:
        out = list(dict.fromkeys(out))
    cs = ConstraintSet(V, out, prob.m, prob.C, prob, orbit=orb.size)
    cs.families = family_sizes(P, p, ts.Q, q, len(ts.inv_crosses), len(U))
    return cs


def expand_solution(cs: ConstraintSet, theta: dict, limits: Limits = DEFAULT_LIMITS) -> dict:
    """Copy a solution of a symmetric quotient onto every member of each orbit.

    Only the support is expanded, so this never enumerates the full V.
    """
    if cs.orbit == 1:
        return dict(theta)
    types = ProblemTypes(cs.prob, limits)
    orb = Orbits(types.ts, colour_mask(cs.prob, types.ts))
    masks = [0]
    for i in range(orb.mask.bit_length()):
        if orb.mask >> i & 1:
            masks += [M | 1 << i for M in masks]
    out = {}
    for v, n in theta.items():
        if n:
            for M in masks:
                out[orb.image(v, M)] = n
    return out


# --- direct evaluation ---------------------------------------------------


def violated(cs: ConstraintSet, theta) -> list:
    """Constraints falsified by ``theta`` (a mapping var -> natural); missing vars read 0."""
    get = theta.get
    bad = []
    for c in cs.constraints:
        if isinstance(c, SumEq):
            ok = sum(get(t, 0) for t in c.terms) == get(c.target, 0)
        elif isinstance(c, SumGe1):
            ok = sum(get(t, 0) for t in c.terms) >= 1
        elif isinstance(c, Zero):
            ok = get(c.var, 0) == 0
        else:
            ok = get(c.ante, 0) <= 0 or sum(get(t, 0) for t in c.terms) >= c.D
        if not ok:
            bad.append(c)
    return bad


def satisfies(cs: ConstraintSet, theta) -> bool:
    return not violated(cs, theta)


# --- text dump -----------------------------------------------------------


def _vec(u) -> str:
    return "(" + ",".join(str(a) for a in u) + ")"


def var_name(v, k: int | None = None) -> str:
    tag = v[0]
    if tag == "x":
        lam = v[1]
        width = k if k is not None else max(lam.fwd.bit_length(), lam.bwd.bit_length(), 1)
        return f"x[pi={lam.pi1},rho={lam.pi2},fwd={bits(lam.fwd, width)},bwd={bits(lam.bwd, width)}]"
    if tag in ("y", "z"):
        key = "s" if tag == "y" else "t"
        return f"{tag}[pi={v[1]},{key}={v[2]},u={_vec(v[3])}]"
    key = "s" if tag == "yh" else "t"
    return f"{tag}[pi={v[1]},{key}={v[2]},v={_vec(v[3])},w={_vec(v[4])}]"


_NAME_RE = re.compile(r"(x|y|z|yh|zh)\[([^\]]*)\]")


def parse_var(text: str):
    m = _NAME_RE.fullmatch(text.strip())
    if not m:
        raise ParseError(f"bad variable name {text!r}")
    tag, body = m.groups()
    fields = {}
    for part in re.findall(r"(\w+)=(\([^)]*\)|[^,]*)", body):
        fields[part[0]] = part[1]

    def vec(s):
        inner = s.strip("()")
        return tuple(int(a) for a in inner.split(",")) if inner else ()

    try:
        if tag == "x":
            return ("x", TwoType(int(fields["pi"]), int(fields["rho"]), int(fields["fwd"] or "0", 2), int(fields["bwd"] or "0", 2)))
        if tag in ("y", "z"):
            key = "s" if tag == "y" else "t"
            return (tag, int(fields["pi"]), fields[key], vec(fields["u"]))
        key = "s" if tag == "yh" else "t"
        return (tag, int(fields["pi"]), fields[key], vec(fields["v"]), vec(fields["w"]))
    except (KeyError, ValueError) as e:
        raise ParseError(f"bad variable name {text!r}") from e


def _sum(terms, name) -> str:
    return " + ".join(name(t) for t in terms) if terms else "0"


def render_constraint(c, name=var_name) -> str:
    if isinstance(c, SumEq):
        return f"{name(c.target)} = {_sum(c.terms, name)}"
    if isinstance(c, SumGe1):
        return f"{_sum(c.terms, name)} >= 1"
    if isinstance(c, Zero):
        return f"zero {name(c.var)}"
    return f"{name(c.ante)} > 0 => {_sum(c.terms, name)} >= {c.D}"


def dump_constraints(cs: ConstraintSet) -> str:
    k = None
    if cs.prob is not None:
        k = len(cs.prob.binary)
    else:
        xs = [v[1] for v in cs.vars if v[0] == "x"]
        k = max([max(l.fwd.bit_length(), l.bwd.bit_length()) for l in xs] + [1])

    def name(v):
        return var_name(v, k)

    counts = {t: 0 for t in TAGS}
    for v in cs.vars:
        counts[v[0]] += 1
    digest = cs.prob.digest() if cs.prob is not None else "-"
    head = (
        f"# gc2-constraints problem={digest} m={cs.m} C={cs.C} k={k} vars={len(cs.vars)} "
        + " ".join(f"{t}={counts[t]}" for t in TAGS)
        + f" constraints={len(cs.constraints)}"
    )
    lines = [head]
    lines.extend("var " + name(v) for v in cs.vars)
    lines.extend(render_constraint(c, name) for c in cs.constraints)
    return "\n".join(lines) + "\n"


def _parse_sum(text: str) -> tuple:
    text = text.strip()
    if text == "0":
        return ()
    return tuple(parse_var(t) for t in text.split(" + "))


def load_constraints(text: str) -> ConstraintSet:
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or not lines[0].startswith("# gc2-constraints"):
        raise ParseError("missing '# gc2-constraints' header", 1, 1)
    meta = dict(kv.split("=", 1) for kv in lines[0].split()[2:] if "=" in kv)
    try:
        m, C = int(meta["m"]), int(meta["C"])
    except (KeyError, ValueError):
        raise ParseError("header must record m and C", 1, 1) from None
    vars_, cons = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            if ln.startswith("var "):
                vars_.append(parse_var(ln[4:]))
            elif ln.startswith("zero "):
                cons.append(Zero(parse_var(ln[5:])))
            elif " => " in ln:
                ante, rest = ln.split(" => ")
                if not ante.endswith(" > 0"):
                    raise ParseError("conditional must read 'v > 0 => ...'")
                lhs, D = rest.rsplit(" >= ", 1)
                cons.append(Cond(parse_var(ante[:-4]), _parse_sum(lhs), int(D)))
            elif ln.endswith(" >= 1"):
                cons.append(SumGe1(_parse_sum(ln[:-5])))
            elif " = " in ln:
                lhs, rhs = ln.split(" = ", 1)
                cons.append(SumEq(_parse_sum(rhs), parse_var(lhs)))
            else:
                raise ParseError("unrecognised constraint")
        except (ParseError, ValueError) as e:
            raise ParseError(f"{e}", lineno, 1) from None
    known = set(vars_)
    for c in cons:
        for v in constraint_vars(c):
            if v not in known:
                raise GC2Error(f"constraint mentions undeclared variable {var_name(v)}")
    return ConstraintSet(vars_, cons, m, C)


def constraint_vars(c) -> tuple:
    if isinstance(c, SumEq):
        return c.terms + (c.target,)
    if isinstance(c, SumGe1):
        return c.terms
    if isinstance(c, Zero):
        return (c.var,)
    return (c.ante,) + c.terms
