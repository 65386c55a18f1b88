"""Command line front end.

Every subcommand reads and writes rule documents (JSON) and is a thin wrapper
over the library call of the same name.  Exit status: 0 on success, 1 when the
request is valid but has no answer (infeasible, not found, bad document), 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from contextlib import nullcontext
from typing import Sequence

from gmpy2 import mpfr

from . import caratheodory, extend1, extendM, generators, genzbench
from .exceptions import QuadForgeError
from .measures import parse_measure
from .numerics import DEFAULT_PRECISION, Root, format_scalar, parse_scalar, working_precision
from .rules import (
    QuadratureRule,
    load_rule,
    rule_to_document,
    sequence_to_document,
    weights_from_nodes,
)


class UsageError(Exception):
    pass


def _precision_env() -> int:
    raw = os.environ.get("QUADFORGE_PRECISION_BITS")
    if raw is None:
        return DEFAULT_PRECISION
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"QUADFORGE_PRECISION_BITS must be an integer, got {raw!r}") from exc


def _mode(text: str | None) -> tuple[str | None, int | None]:
    """``rational`` or ``decimal:<bits>``, returned as (mode, bits)."""
    if text is None:
        return None, None
    if text == "rational":
        return "rational", None
    if text.startswith("decimal:"):
        try:
            bits = int(text.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(f"bad precision in --mode {text!r}") from exc
        if bits < 2:
            raise UsageError("precision must be at least 2 bits")
        return f"decimal:{bits}", bits
    raise UsageError(f"--mode must be 'rational' or 'decimal:<bits>', got {text!r}")


def _scalars(text: str, bits: int | None) -> list:
    try:
        return [parse_scalar(t.strip(), bits) for t in text.split(",") if t.strip()]
    except QuadForgeError as exc:
        raise UsageError(str(exc)) from exc


def _scalar(text: str, bits: int | None):
    vals = _scalars(text, bits)
    if len(vals) != 1:
        raise UsageError(f"expected one number, got {text!r}")
    return vals[0]


def _to_mode(rule: QuadratureRule, mode: str | None, bits: int | None) -> QuadratureRule:
    if mode is None or mode == "rational":
        return rule
    with working_precision(bits):
        return QuadratureRule(
            tuple(+mpfr(x) for x in rule.nodes), tuple(+mpfr(w) for w in rule.weights), rule.measure
        )


def _read_rule(path: str, mode: str | None, bits: int | None) -> QuadratureRule:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    return _to_mode(load_rule(text), mode, bits)


def _emit(args, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _doc(rule: QuadratureRule, mode: str | None, **extra) -> dict:
    return rule_to_document(rule, mode if mode == "rational" or mode is None else rule.mode, **extra)


def _root_text(r: Root) -> str:
    if r.is_real:
        return format_scalar(r.real)
    return f"{format_scalar(r.real)}{'+' if r.imag >= 0 else '-'}{format_scalar(abs(r.imag))}i"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args, mode, bits):
    measure = parse_measure(args.measure)
    fam = args.family
    if fam in ("cc", "gauss"):
        if args.nodes is None or args.nodes < 1:
            raise UsageError("--nodes must be a positive integer")
        if fam == "cc":
            if args.nodes < 2:
                raise UsageError("Clenshaw-Curtis needs at least 2 nodes")
            rule = generators.clenshaw_curtis(args.nodes - 1, measure, precision=bits)
        else:
            rule = generators.gaussian(measure, args.nodes, precision=bits)
        return _doc(rule, mode)
    init = None
    if args.init:
        init = weights_from_nodes(_scalars(args.init, bits), measure)
    n_max = args.nodes if args.nodes is not None else 19
    if fam == "partial":
        rng = random.Random(args.seed) if args.shuffle else None
        seq = generators.partially_nested_sequence(measure, n_max, init=init, rng=rng, precision=bits, schedule=args.schedule)
    else:
        seq = generators.nested_sequence(measure, n_max, init=init, seed=args.seed, m_max=args.max_m, restrict=args.restrict_domain, precision=bits)
    return sequence_to_document(
        seq.rules, None if mode != "rational" else mode, family=fam, schedule=seq.schedule, seed=args.seed,
        extension_sizes=seq.extension_sizes, complete=seq.complete,
    )


def cmd_weights(args, mode, bits):
    measure = parse_measure(args.measure)
    with working_precision(bits) if bits else nullcontext():
        rule = weights_from_nodes(_scalars(args.nodes, bits), measure, allow_large=True)
    return _doc(rule, mode)


def _annotation(rule: QuadratureRule) -> str:
    """Trailing precision note for text output computed in floating point."""
    return "" if rule.is_exact else f"  # {rule.mode}"


def cmd_degree(args, mode, bits):
    return str(_read_rule(args.rule, mode, bits).verified_degree)


def cmd_intervals(args, mode, bits):
    rule = _read_rule(args.rule, mode, bits)
    with working_precision(bits or rule.precision or DEFAULT_PRECISION):
        if args.replace is not None:
            if not 0 <= args.replace < rule.size:
                raise UsageError(f"--replace index out of range 0..{rule.size - 1}")
            region = extend1.replacement_region(rule, args.replace, args.restrict_domain)
        else:
            region = extend1.addition_set(rule, args.restrict_domain)
    if args.json:
        return {"intervals": region.to_records()}
    return region.format() + _annotation(rule)


def cmd_add(args, mode, bits):
    rule = _read_rule(args.rule, mode, bits)
    return _doc(extend1.add_node(rule, _scalar(args.node, bits)), mode)


def cmd_replace(args, mode, bits):
    rule = _read_rule(args.rule, mode, bits)
    x = _scalar(args.node, bits)
    if args.index is None:
        new, k = extend1.replace_with(rule, x)
        return _doc(new, mode, removed_index=k)
    if not 0 <= args.index < rule.size:
        raise UsageError(f"--index out of range 0..{rule.size - 1}")
    return _doc(extend1.swap_node(rule, args.index, x), mode, removed_index=args.index)


def cmd_remove(args, mode, bits):
    rule = _read_rule(args.rule, mode, bits)
    if args.to_degree is not None:
        return _doc(caratheodory.reduce_to_interpolatory(rule, args.to_degree), mode)
    opts = caratheodory.removal_options(rule)
    if args.all:
        return {
            "options": [
                {"removed_index": o.removed_index, "removed_node": format_scalar(o.removed_node), "rule": _doc(o.rule, mode)}
                for o in opts
            ]
        }
    if not 0 <= args.option < len(opts):
        raise UsageError(f"--option must be below {len(opts)}")
    o = opts[args.option]
    return _doc(o.rule, mode, removed_index=o.removed_index)


def cmd_extend(args, mode, bits):
    rule = _read_rule(args.rule, mode, bits)
    rng = random.Random(args.seed)
    m, cands = extendM.minimal_extension(
        rule, m_min=args.min_m, m_max=args.max_m, restrict=args.restrict_domain,
        max_candidates=None if args.all else 1, rng=rng, precision=bits,
    )
    out = {
        "M": m,
        "candidates": [
            {
                "zeroed_indices": list(c.zeroed_indices),
                "new_nodes": [format_scalar(x) for x in c.new_nodes],
                "rule": _doc(c.resulting_rule, mode),
            }
            for c in cands
        ],
    }
    return out


def cmd_patterson(args, mode, bits):
    measure = parse_measure(args.measure)
    nodes = _scalars(args.nodes, bits) if args.nodes else []
    roots = extendM.patterson_extension(nodes, measure, args.m, method=args.method, precision=bits)
    out = {"new_nodes": [_root_text(r) for r in roots], "real": all(r.is_real for r in roots)}
    if out["real"]:
        rule = weights_from_nodes(list(nodes) + [r.real for r in roots], measure, allow_large=True)
        out["rule"] = _doc(rule, mode)
    return out


def cmd_explore(args, mode, bits):
    rule = _read_rule(args.rule, mode, bits)
    rng = random.Random(args.seed)
    m, cands = extendM.minimal_extension(rule, m_max=args.max_m, restrict=args.restrict_domain, max_candidates=1, rng=rng, precision=bits)
    cand = cands[0]
    if not cand.zeroed_indices:
        visited = [tuple(cand.new_nodes)]
    else:
        visited = extendM.explore_additions(rule, cand, args.steps, rng, args.restrict_domain)
    return {"M": m, "visited": [[format_scalar(x) for x in t] for t in visited]}


def cmd_bench(args, mode, bits):
    families = [f.strip() for f in args.rule_families.split(",") if f.strip()]
    for f in families:
        if f not in genzbench.RULE_FAMILIES:
            raise UsageError(f"unknown rule family {f!r}")
    try:
        grid = [int(v) for v in args.grid.split(",") if v.strip()]
        genz = [int(v) for v in args.genz.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad integer list: {exc}") from exc
    if any(n < 2 for n in grid):
        raise UsageError("grid sizes must be at least 2")
    records = genzbench.run_benchmark(families, grid, args.trials, args.seed, genz, randomize_sequences=args.randomize)
    return genzbench.write_csv(records).rstrip("\n")


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", help="rational or decimal:<bits>")
    common.add_argument("--restrict-domain", action="store_true", help="intersect with the support of the measure")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write to this file instead of stdout")

    p = argparse.ArgumentParser(prog="quadforge", description="Positive interpolatory quadrature rules.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a rule or a rule sequence")
    g.add_argument("--family", required=True, choices=["cc", "gauss", "partial", "nested"])
    g.add_argument("--measure", required=True)
    g.add_argument("--nodes", type=int, help="node count (cc, gauss) or largest level (sequences)")
    g.add_argument("--init", help="comma separated initial nodes for sequences")
    g.add_argument("--schedule", default="round_robin", choices=list(generators.SCHEDULES))
    g.add_argument("--shuffle", action="store_true", help="randomize the replacement order (partial)")
    g.add_argument("--max-m", type=int, default=8)
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("weights", parents=[common], help="interpolatory weights for given nodes")
    w.add_argument("--measure", required=True)
    w.add_argument("--nodes", required=True, help="comma separated nodes")
    w.set_defaults(func=cmd_weights)

    d = sub.add_parser("degree", parents=[common], help="verified polynomial degree of a rule")
    d.add_argument("--rule", required=True)
    d.set_defaults(func=cmd_degree)

    i = sub.add_parser("intervals", parents=[common], help="single-node addition set or replacement region")
    i.add_argument("--rule", required=True)
    i.add_argument("--replace", type=int, help="print the replacement region of this node instead")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_intervals)

    a = sub.add_parser("add", parents=[common], help="add one node")
    a.add_argument("--rule", required=True)
    a.add_argument("--node", required=True)
    a.set_defaults(func=cmd_add)

    r = sub.add_parser("replace", parents=[common], help="swap a node in")
    r.add_argument("--rule", required=True)
    r.add_argument("--node", required=True)
    r.add_argument("--index", type=int, help="node to remove (default: the one the swap zeroes)")
    r.set_defaults(func=cmd_replace)

    rm = sub.add_parser("remove", parents=[common], help="remove a node keeping positivity")
    rm.add_argument("--rule", required=True)
    rm.add_argument("--option", type=int, default=0)
    rm.add_argument("--all", action="store_true")
    rm.add_argument("--to-degree", type=int, help="reduce to an interpolatory rule of this degree")
    rm.set_defaults(func=cmd_remove)

    e = sub.add_parser("extend", parents=[common], help="minimal number of nodes to add")
    e.add_argument("--rule", required=True)
    e.add_argument("--min-m", type=int, default=1)
    e.add_argument("--max-m", type=int, default=4)
    e.add_argument("--all", action="store_true", help="list every feasible candidate of minimal size")
    e.set_defaults(func=cmd_extend)

    pt = sub.add_parser("patterson", parents=[common], help="Patterson-type extension of a node set")
    pt.add_argument("--measure", required=True)
    pt.add_argument("--nodes", default="", help="comma separated nodes (empty for a Gaussian rule)")
    pt.add_argument("--m", type=int, required=True)
    pt.add_argument("--method", default="embedding", choices=["embedding", "direct"])
    pt.set_defaults(func=cmd_patterson)

    x = sub.add_parser("explore", parents=[common], help="random walk through the feasible additions")
    x.add_argument("--rule", required=True)
    x.add_argument("--steps", type=int, default=10)
    x.add_argument("--max-m", type=int, default=4)
    x.set_defaults(func=cmd_explore)

    b = sub.add_parser("bench", parents=[common], help="Genz benchmark, CSV output")
    b.add_argument("--rule-families", default=",".join(genzbench.RULE_FAMILIES))
    b.add_argument("--grid", default=",".join(str(n) for n in genzbench.DEFAULT_GRID))
    b.add_argument("--genz", default="1,2,3,4,5,6")
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--randomize", action="store_true", help="rebuild the constructed sequences per trial")
    b.set_defaults(func=cmd_bench)
    return p


_VALUE_FLAGS = ("--nodes", "--node", "--init")


def _join_values(argv: Sequence[str]) -> list[str]:
    """Glue ``--nodes -1,1`` into ``--nodes=-1,1`` so leading minus signs are not options."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_join_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        mode, bits = _mode(args.mode)
        default_bits = _precision_env()
        with working_precision(bits or default_bits):
            _emit(args, args.func(args, mode, bits))
    except UsageError as exc:
        print(f"quadforge: error: {exc}", file=sys.stderr)
        return 2
    except QuadForgeError as exc:
        print(f"quadforge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"quadforge: {exc}", file=sys.stderr)
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
