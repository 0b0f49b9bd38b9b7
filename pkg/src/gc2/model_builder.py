"""Building a finite model from a natural-number solution of E.

Every free choice (how a block is split, which senders are paired, which
receivers are used) is made in canonical index order, so the same
solution always yields the same structure.
"""
from __future__ import annotations

from dataclasses import dataclass

from .constraint_compiler import ConstraintSet, generate_E, vadd, vsub, violated
from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .structures import Structure, check_normal_form, is_chromatic
from .typespace import ProblemTypes, TwoType, bits, vectors_upto


@dataclass
class FGBlock:
    """The spectrum/tally functions wanted by the elements of one 1-type block.

    ``f[s][i]`` / ``g[t][i]`` is the vector wanted by the ``i``-th element
    of the block, for every bit string ``s`` / ``t`` in range.
    """

    pi: int
    size: int
    f: dict
    g: dict


def _split(members: list, sizes: list) -> list[list]:
    out, pos = [], 0
    for n in sizes:
        out.append(members[pos : pos + n])
        pos += n
    if pos != len(members):
        raise AssertionError(f"decomposition sizes {sum(sizes)} do not match {len(members)} elements")
    return out


def _refine(theta, tag, hat, pi, depth, U, C, root: dict) -> dict:
    """Split ``root`` (index -> vector) down the bit-string tree of ``depth``."""
    funcs = {"": root}
    for length in range(depth):
        for i in range(1 << length):
            s = bits(i, length)
            cur = funcs[s]
            left, right = {}, {}
            for u in U:
                pre = sorted(a for a, vec in cur.items() if vec == u)
                splits = [(v, vsub(u, v)) for v in U if all(x <= y for x, y in zip(v, u))]
                sizes = [theta.get((hat, pi, s, v, w), 0) for v, w in splits]
                for (v, w), part in zip(splits, _split(pre, sizes)):
                    for a in part:
                        left[a] = v
                        right[a] = w
            funcs[s + "0"] = left
            funcs[s + "1"] = right
    for s, fn in funcs.items():
        for u in U:
            got = sum(1 for vec in fn.values() if vec == u)
            if got != theta.get((tag, pi, s, u), 0):
                raise AssertionError(f"{tag}-function at {s!r} misses its cardinality for {u}")
    return funcs


def build_fg(theta: dict, pi: int, prob, types: ProblemTypes | None = None) -> FGBlock:
    types = types or ProblemTypes(prob)
    ts = types.ts
    C = prob.Cvec
    U = vectors_upto(C)
    size = sum(theta.get(("y", pi, "", u), 0) for u in U)
    members = list(range(size))
    f_root, g_root = {}, {}
    for u, part in zip(U, _split(members, [theta.get(("y", pi, "", u), 0) for u in U])):
        for a in part:
            f_root[a] = u
            g_root[a] = vsub(C, u)
    f = _refine(theta, "y", "yh", pi, ts.p, U, C, f_root)
    g = _refine(theta, "z", "zh", pi, ts.q, U, C, g_root)
    zero = (0,) * len(C)
    for a in members:
        total = zero
        for s in (bits(i, ts.p) for i in range(1 << ts.p)):
            total = vadd(total, f[s][a])
        for t in (bits(i, ts.q) for i in range(1 << ts.q)):
            total = vadd(total, g[t][a])
        if total != C:
            raise AssertionError(f"element {a} of block {pi} wants {total} messages, not {C}")
    return FGBlock(pi, size, f, g)


def thirds(n: int) -> tuple[range, range, range]:
    a = -(-n // 3)
    b = -(-(n - a) // 2)
    return range(0, a), range(a, a + b), range(a + b, n)


def build_model(theta: dict, prob, limits: Limits = DEFAULT_LIMITS, cs: ConstraintSet | None = None) -> Structure:
    """A finite model of ``prob`` from a solution ``theta`` of its constraint system."""
    cs = cs or generate_E(prob, limits)
    bad = violated(cs, theta)
    if bad:
        raise ValueError(f"not a solution: {len(bad)} violated constraint(s), e.g. {bad[0]}")
    types = ProblemTypes(prob, limits)
    ts = types.ts
    U = vectors_upto(prob.Cvec)
    sizes = {pi: sum(theta.get(("y", pi, "", u), 0) for u in U) for pi in range(ts.P)}
    n = sum(sizes.values())
    if n > limits.max_witness:
        raise CapExceeded(f"witness model would have {n} elements (limit {limits.max_witness})")

    # Step 1: 1-types, blocks laid out in 1-type order
    start, pos = {}, 0
    tp = []
    for pi in range(ts.P):
        start[pi] = pos
        tp.extend([pi] * sizes[pi])
        pos += sizes[pi]

    blocks = {pi: build_fg(theta, pi, prob, types) for pi in range(ts.P) if sizes[pi]}

    # message plan: invertible labels via the sets A_lambda, counts n_{a,t}
    senders: dict = {}  # lambda -> list of global elements, in order
    plan_noninv: list[list] = [[] for _ in range(n)]  # (t index, count)
    for pi, blk in blocks.items():
        base = start[pi]
        for rho in range(ts.P):
            s = bits(rho, ts.p)
            fs = blk.f[s]
            for u in U:
                if not any(u):
                    continue
                pre = sorted(a for a, vec in fs.items() if vec == u)
                lams = [TwoType(pi, rho, fw, bw) for fw, bw in ts.inv_crosses]
                lams = [lam for lam in lams if ts.c_vector(lam) == u]
                parts = _split(pre, [theta.get(("x", lam), 0) for lam in lams])
                for lam, part in zip(lams, parts):
                    if part:
                        senders[lam] = [base + a for a in part]
        for j in range(ts.R):
            t = bits(j, ts.q)
            mu = ts.mu(pi, j)
            cvec = ts.c_vector(mu)
            lead = next(i for i, c in enumerate(cvec) if c)
            for a, vec in blk.g[t].items():
                if any(vec):
                    k = vec[lead] // cvec[lead]
                    if tuple(k * c for c in cvec) != vec:
                        raise AssertionError(f"tally {vec} is not a multiple of {cvec}")
                    plan_noninv[base + a].append((j, k))

    links: dict = {}  # (a, b) -> (fwd, bwd) for a != b

    def assign(a, b, tau: TwoType):
        if (a, b) in links or (b, a) in links:
            raise AssertionError(f"pair ({a},{b}) assigned twice")
        links[(a, b)] = (tau.fwd, tau.bwd)

    # Step 2: pair lambda-senders with lambda^-1-senders
    used = [set() for _ in range(n)]
    for lam in sorted(senders):
        inv = lam.invert()
        if lam > inv:
            continue
        A, B = senders[lam], senders.get(inv, [])
        if len(A) != len(B):
            raise AssertionError(f"{len(A)} senders of {lam} but {len(B)} of its inverse")
        for a, b in zip(A, B):
            assign(a, b, lam)
            used[a].add(b)
            used[b].add(a)

    # Step 3: non-invertible messages go to the next third of the target block
    third_of = [0] * n
    parts = {}
    for pi, size in sizes.items():
        if size:
            parts[pi] = [[start[pi] + i for i in r] for r in thirds(size)]
            for j, r in enumerate(parts[pi]):
                for a in r:
                    third_of[a] = j
    for a in range(n):
        for j, k in plan_noninv[a]:
            mu = ts.mu(tp[a], j)
            pool = parts.get(mu.pi2, [[], [], []])[(third_of[a] + 1) % 3]
            chosen = [b for b in pool if b not in used[a]][:k]
            if len(chosen) < k:
                raise AssertionError(f"element {a} ran out of receivers for {mu}")
            for b in chosen:
                assign(a, b, mu)
                used[a].add(b)

    # Step 4 is implicit: unassigned pairs carry no binary atoms at all
    st = _realise(prob, ts, n, tp, links)
    report = check_normal_form(prob, st)
    if not report.ok:
        raise AssertionError(f"built structure is not a model: {report.violations()}")
    if not is_chromatic(prob, st):
        raise AssertionError("built structure is not chromatic")
    return st


def _realise(prob, ts, n, tp, links) -> Structure:
    sig = prob.sig
    unary = {u: {a for a in range(n) if tp[a] & ts.unary_bit(u)} for u in sig.unary}
    binary = {}
    for r in sig.binary:
        bit = ts.bin_bit(r)
        ext = {(a, a) for a in range(n) if tp[a] & bit}
        for (a, b), (fw, bw) in links.items():
            if fw & bit:
                ext.add((a, b))
            if bw & bit:
                ext.add((b, a))
        binary[r] = ext
    return Structure(n, unary, binary)
