"""Command-line front end: ``python -m gc2 <command> FILE [options]``.

Exit status: 0 when a verdict (or requested artefact) was produced, 2 on
bad input, 3 when a resource cap stopped the run.  Verdict lines go to
standard output; diagnostics go to standard error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from .constraint_compiler import ConstraintSet, dump_constraints, expand_solution, generate_E, load_constraints
from .limits import DEFAULT_LIMITS, CapExceeded, Limits
from .model_builder import build_model
from .normalizer import normalize_branches
from .problem import NormalFormProblem, pad_signature, parse_problem, render_problem
from .solver_inf import decide_sat
from .solver_nat import decide_finsat
from .structures import (
    Structure,
    check_normal_form,
    evaluate,
    oracle_finsat,
    oracle_formula,
    parse_structure,
    reduct,
    render_structure,
)
from .syntax import GC2Error, Signature, parse_formula, validate_gc2

FORMULA, NORMAL_FORM, CONSTRAINTS, STRUCTURE = "formula", "normal-form", "constraints", "structure"
MODES = ("sat", "finsat", "both")


@dataclass
class RunConfig:
    mode: str = "both"
    limits: Limits = DEFAULT_LIMITS
    witness: str | None = None
    dump_constraints: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def detect_kind(text: str) -> str:
    """Input kind from the first meaningful line."""
    for raw in text.split("\n"):
        if raw.startswith("# gc2-constraints"):
            return CONSTRAINTS
        line = raw.split(";", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        word = line.split()[0]
        if word == "domain":
            return STRUCTURE
        if word in ("alpha", "guard", "count", "padding"):
            return NORMAL_FORM
        if word in ("nullary", "unary", "binary"):
            continue
        return FORMULA
    raise GC2Error("empty input")


# --- solving one normal-form problem ----------------------------------------


@dataclass
class Outcome:
    sat: bool | None = None
    finsat: bool | None = None
    model: Structure | None = None
    notes: list = field(default_factory=list)


def constraint_system(prob: NormalFormProblem, limits: Limits) -> ConstraintSet:
    """E for ``prob``, as its quotient by colour relabelling when the problem is padded."""
    return generate_E(prob, limits, symmetric=bool(prob.padding))


def solve_problem(prob: NormalFormProblem, mode: str, limits: Limits, want_model: bool) -> Outcome:
    cs = constraint_system(prob, limits)
    out = Outcome()
    if cs.orbit > 1:
        out.notes.append(f"E reduced by colour symmetry: {len(cs.vars)} orbit variables (orbit size {cs.orbit})")
    out.sat = decide_sat(cs).satisfiable
    if mode == "sat":
        return out
    if not out.sat:
        out.finsat = False  # finite models are models
        return out
    res = decide_finsat(cs, limits)
    out.finsat = res.finsat
    if res.finsat and want_model:
        size = res.stats["domain"] * cs.orbit
        if size > limits.max_witness:
            raise CapExceeded(f"witness model would have {size} elements (limit {limits.max_witness})")
        # quotient rows mention only orbit representatives, so they check the expansion too
        out.model = build_model(expand_solution(cs, res.witness, limits), prob, limits, cs)
    return out


# --- commands ---------------------------------------------------------------


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise GC2Error(f"cannot read {path}: {e.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise GC2Error(f"cannot write {path}: {e.strerror}") from None


def _problems(text: str, kind: str, limits: Limits) -> tuple[list, Signature | None, object]:
    """Normal-form problems of a formula or normal-form file.

    Returns ``[(nullary table, problem)]``, the input signature and the
    input formula (``None`` for normal-form input).
    """
    if kind == NORMAL_FORM:
        prob = parse_problem(text)
        if not prob.padding:
            prob = pad_signature(prob, limits)
        return [({}, prob)], None, None
    if kind == FORMULA:
        sig, f = parse_formula(text)
        validate_gc2(f, sig)
        return normalize_branches(f, sig, limits), sig, f
    raise GC2Error(f"expected a formula or normal-form file, got {kind}")


def cmd_check(args, cfg: RunConfig, out) -> int:
    text = _read(args.file)
    kind = detect_kind(text)
    if kind == CONSTRAINTS:
        cs = load_constraints(text)
        sat = decide_sat(cs).satisfiable
        fin = decide_finsat(cs, cfg.limits).finsat if cfg.mode != "sat" and sat else False
        _verdicts(out, cfg.mode, sat, fin)
        return 0
    branches, sig, f = _problems(text, kind, cfg.limits)
    if cfg.dump_constraints:
        _write(cfg.dump_constraints, "".join(dump_constraints(constraint_system(p, cfg.limits)) for _, p in branches))
    sat = fin = False
    model = None
    for table, prob in branches:
        need_model = cfg.witness is not None and not fin
        o = solve_problem(prob, cfg.mode, cfg.limits, need_model)
        for note in o.notes:
            print(f"note: {note}", file=sys.stderr)
        sat = sat or bool(o.sat)
        if o.finsat and not fin:
            fin = True
            if o.model is not None:
                model = o.model if f is None else reduct(o.model, sig, table)
                _verify(model, prob, o.model, f)
        if sat and (fin or cfg.mode == "sat"):
            break
    if fin and not sat:
        raise AssertionError("finitely satisfiable but not satisfiable")
    _verdicts(out, cfg.mode, sat, fin)
    if cfg.witness and model is not None:
        _write(cfg.witness, render_structure(model))
    return 0


def _verify(model: Structure, prob, built: Structure, f) -> None:
    report = check_normal_form(prob, built)
    if not report.ok:
        raise AssertionError(f"witness fails the model checker: {report.violations()}")
    if f is not None and not evaluate(f, model):
        raise AssertionError("witness does not satisfy the input formula")


def _verdicts(out, mode: str, sat: bool, fin: bool) -> None:
    if mode in ("sat", "both"):
        print("SAT" if sat else "UNSAT", file=out)
    if mode in ("finsat", "both"):
        print("FINSAT" if fin else "NOT-FINSAT", file=out)


def cmd_normalize(args, cfg: RunConfig, out) -> int:
    text = _read(args.file)
    branches, _, _ = _problems(text, detect_kind(text), cfg.limits)
    for i, (table, prob) in enumerate(branches, start=1):
        fixed = " ".join(f"{b}={'true' if v else 'false'}" for b, v in table.items())
        print(f"; branch {i}" + (f" with {fixed}" if fixed else ""), file=out)
        out.write(render_problem(prob))
    return 0


def cmd_constraints(args, cfg: RunConfig, out) -> int:
    text = _read(args.file)
    branches, _, _ = _problems(text, detect_kind(text), cfg.limits)
    for _, prob in branches:
        out.write(dump_constraints(constraint_system(prob, cfg.limits)))
    return 0


def cmd_model(args, cfg: RunConfig, out) -> int:
    text = _read(args.file)
    branches, sig, f = _problems(text, detect_kind(text), cfg.limits)
    for table, prob in branches:
        o = solve_problem(prob, "finsat", cfg.limits, True)
        if o.finsat:
            model = o.model if f is None else reduct(o.model, sig, table)
            _verify(model, prob, o.model, f)
            text_out = render_structure(model)
            if cfg.witness:
                _write(cfg.witness, text_out)
            else:
                out.write(text_out)
            print(f"model with {model.n} elements verified", file=sys.stderr)
            return 0
    print("NOT-FINSAT", file=out)
    return 0


def cmd_eval(args, cfg: RunConfig, out) -> int:
    text = _read(args.file)
    st = parse_structure(_read(args.structure))
    kind = detect_kind(text)
    if kind == FORMULA:
        sig, f = parse_formula(text)
        validate_gc2(f, sig)
        ok = evaluate(f, st)
    elif kind == NORMAL_FORM:
        ok = check_normal_form(parse_problem(text), st).ok
    else:
        raise GC2Error(f"expected a formula or normal-form file, got {kind}")
    print("true" if ok else "false", file=out)
    return 0


def cmd_oracle(args, cfg: RunConfig, out) -> int:
    text = _read(args.file)
    kind = detect_kind(text)
    n = cfg.limits.oracle_max
    if kind == FORMULA:
        sig, f = parse_formula(text)
        validate_gc2(f, sig)
        st = oracle_formula(f, sig, n, cfg.limits)
    elif kind == NORMAL_FORM:
        st = oracle_finsat(parse_problem(text), n, cfg.limits)
    else:
        raise GC2Error(f"expected a formula or normal-form file, got {kind}")
    if st is None:
        print(f"no model with at most {n} elements", file=out)
    else:
        print(f"model with {st.n} elements", file=out)
        out.write(render_structure(st))
    return 0


COMMANDS = {
    "check": cmd_check,
    "normalize": cmd_normalize,
    "constraints": cmd_constraints,
    "model": cmd_model,
    "eval": cmd_eval,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    d = DEFAULT_LIMITS
    ap = argparse.ArgumentParser(prog="gc2", description="Satisfiability and finite satisfiability for GC2.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("file", help="formula, normal-form, constraints or structure file")
        if name == "eval":
            sp.add_argument("structure", help="structure file")
        sp.add_argument("--mode", choices=MODES, default="both")
        sp.add_argument("--witness", metavar="PATH", help="write the verified finite model here")
        sp.add_argument("--dump-constraints", metavar="PATH", help="write the constraint system here")
        sp.add_argument("--oracle-max", type=int, default=d.oracle_max, metavar="N")
        sp.add_argument("--max-signature", type=int, default=d.max_signature, metavar="N")
        sp.add_argument("--max-vars", type=int, default=d.max_vars, metavar="N")
        sp.add_argument("--max-witness", type=int, default=d.max_witness, metavar="N")
        sp.add_argument("--max-nullary", type=int, default=d.max_nullary, metavar="N")
        sp.add_argument("--lp-pivots", type=int, default=d.lp_pivots, metavar="N")
        sp.add_argument("--exact-lp", action="store_true", help="pure rational simplex, no floating-point hints")
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        limits = Limits(
            max_nullary=args.max_nullary,
            max_signature=args.max_signature,
            max_vars=args.max_vars,
            max_witness=args.max_witness,
            oracle_max=args.oracle_max,
            lp_pivots=args.lp_pivots,
            float_hints=not args.exact_lp,
        )
        cfg = RunConfig(args.mode, limits, args.witness, args.dump_constraints)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg, out)
    except CapExceeded as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return 3
    except GC2Error as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
