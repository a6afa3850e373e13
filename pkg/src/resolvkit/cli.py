"""Batch command line front end.

Subcommands: resolve, monomialize, rectilinearize (desingularization runs
emitting JSON/DOT/text artifacts), compose (composite-series coefficient with
an independent cross-check), dc (growth-sequence analysis), and verify
(re-audit of a stored tree).

Exit codes: 0 success with all checks passed, 2 checks failed (a report is
still emitted), 3 truncation or blow-up budget exhausted, 4 input error.
All output is deterministic: maps are serialized in sorted key order.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .carleman import (
    GrowthSequence,
    derivation_closure_test,
    is_log_convex,
    log_convexity_consequences,
    quasianalytic_test,
)
from .faa_di_bruno import compose_coefficient, jet_to_table
from .parse import ParseError, parse_many, parse_polynomial
from .resolve import (
    BudgetError,
    MONOMIALIZE,
    RECTILINEARIZE,
    RESOLVE,
    RunConfig,
    monomialize_principal,
    rectilinearize,
    resolve_hypersurface,
    tree_from_json_dict,
    verify_resolution,
)
from .series import Jet, ShapeError, TruncationError, substitute

EXIT_OK = 0
EXIT_CHECKS_FAILED = 2
EXIT_RESOURCES = 3
EXIT_INPUT = 4

ENV_TRUNCATION = "RESOLVKIT_TRUNCATION"


def _default_truncation() -> int:
    raw = os.environ.get(ENV_TRUNCATION)
    if raw is None:
        return 24
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"invalid {ENV_TRUNCATION}={raw!r}")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="resolvkit",
        description="exact resolution of singularities for polynomial jets",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_run_options(p, many=False):
        if many:
            p.add_argument("exprs", nargs="+", help="polynomial expressions")
        else:
            p.add_argument("expr", help="polynomial expression, e.g. 'y^2 - x^3'")
        p.add_argument("--vars", help="comma-separated variable order")
        p.add_argument("--truncation", type=int, default=None)
        p.add_argument("--max-blowups", type=int, default=64)
        p.add_argument(
            "--base-points",
            help="semicolon-separated rational points, e.g. '0,0;1,0'",
        )
        p.add_argument("--emit", default="text", help="comma subset of json,dot,text")
        p.add_argument("--out", help="artifact path prefix (default: stdout)")
        p.add_argument("--verify", action="store_true", help="re-audit the finished tree")
        p.add_argument("--parallel", action="store_true", help="resolve sibling charts concurrently")

    add_run_options(sub.add_parser("resolve", help="resolve a hypersurface germ"))
    add_run_options(sub.add_parser("monomialize", help="principalize: pullback becomes monomial"))
    add_run_options(sub.add_parser("rectilinearize", help="turn zero sets into coordinate unions"), many=True)

    pc = sub.add_parser("compose", help="composite-series coefficient with oracle check")
    pc.add_argument("outer", help="outer series, e.g. 'y^2'")
    pc.add_argument("inner", help="comma-separated inner components, e.g. 'x + x^2'")
    pc.add_argument("--gamma", required=True, help="target exponent, e.g. '3' or '2,1'")
    pc.add_argument("--truncation", type=int, default=None)

    pd = sub.add_parser("dc", help="growth-sequence analysis")
    pd.add_argument("family", help="constant | gevrey:<s> | custom:<comma-list>")
    pd.add_argument("--depth", type=int, default=16)

    pv = sub.add_parser("verify", help="re-audit a stored tree JSON")
    pv.add_argument("tree", help="path to a tree JSON file")
    return ap


def _parse_base_points(raw, names):
    if not raw:
        return ()
    points = []
    for chunk in raw.split(";"):
        coords = [Fraction(c.strip()) for c in chunk.split(",")]
        if len(coords) != len(names):
            raise ParseError(
                f"base point {chunk!r} has {len(coords)} coordinates, expected {len(names)}",
                0,
            )
        points.append(tuple(coords))
    return tuple(points)


def _emit_tree(tree, report, args, out):
    emit = [e.strip() for e in args.emit.split(",") if e.strip()]
    unknown = set(emit) - {"json", "dot", "text"}
    if unknown:
        raise ParseError(f"unknown emit formats: {sorted(unknown)}", 0)
    artifacts = {}
    if "json" in emit:
        artifacts["json"] = tree.to_json() + "\n"
    if "dot" in emit:
        artifacts["dot"] = tree.to_dot()
    if "text" in emit:
        lines = [
            f"mode: {tree.mode}",
            f"variables: {', '.join(tree.var_names)}",
            f"blow-ups: {tree.blowup_count}",
            f"leaves: {len(tree.leaves())}",
        ]
        if tree.mode == RESOLVE:
            lines.append(
                f"strict transform order <= 1 after: {tree.smooth_after()} blow-ups"
            )
        for nid, text in tree.assumptions:
            lines.append(f"assumption (node {nid}): {text}")
        if report is not None:
            lines.extend(report.lines())
            lines.append(f"verified: {report.all_passed}")
        else:
            lines.append(f"leaves passed (driver checks): {tree.all_leaves_passed}")
        artifacts["text"] = "\n".join(lines) + "\n"
    if args.out:
        for kind, payload in sorted(artifacts.items()):
            suffix = {"json": ".json", "dot": ".dot", "text": ".txt"}[kind]
            with open(args.out + suffix, "w") as fh:
                fh.write(payload)
            print(f"wrote {args.out + suffix}", file=out)
    else:
        for kind, payload in sorted(artifacts.items()):
            out.write(payload)


def _cmd_run(args, mode, out):
    trunc = args.truncation if args.truncation is not None else _default_truncation()
    var_names = [v.strip() for v in args.vars.split(",")] if args.vars else None
    if mode == RECTILINEARIZE:
        jets, names = parse_many(args.exprs, var_names, trunc)
    else:
        jet, names = parse_polynomial(args.expr, var_names, trunc)
        jets = [jet]
    config = RunConfig(
        truncation=trunc,
        max_blowups=args.max_blowups,
        base_points=_parse_base_points(args.base_points, names),
        parallel=args.parallel,
    )
    if mode == RESOLVE:
        tree = resolve_hypersurface(jets[0], config, names)
    elif mode == MONOMIALIZE:
        tree = monomialize_principal(jets[0], config, names)
    else:
        tree = rectilinearize(jets, config, names)
    report = verify_resolution(tree) if args.verify else None
    _emit_tree(tree, report, args, out)
    if report is not None and not report.all_passed:
        return EXIT_CHECKS_FAILED
    if not tree.all_leaves_passed:
        return EXIT_CHECKS_FAILED
    return EXIT_OK


def _cmd_compose(args, out):
    trunc = args.truncation if args.truncation is not None else _default_truncation()
    inner_texts = [t.strip() for t in args.inner.split(",")]
    inner, names = parse_many(inner_texts, None, trunc)
    outer, outer_names = parse_polynomial(args.outer, None, trunc)
    if outer.nvars != len(inner):
        raise ParseError(
            f"outer series uses {outer.nvars} variables but {len(inner)} inner "
            "components were given",
            0,
        )
    gamma = tuple(int(g) for g in args.gamma.split(","))
    if len(gamma) != len(names):
        raise ParseError(
            f"gamma has {len(gamma)} entries, expected {len(names)}", 0
        )
    shifted = [c - Jet.constant(c.constant_term, c.nvars, c.trunc) for c in inner]
    coeff = compose_coefficient(
        jet_to_table(outer), [jet_to_table(c) for c in shifted], gamma
    )
    oracle = substitute(outer, inner).coeff(gamma)
    match = coeff == oracle
    print(f"coefficient at gamma={list(gamma)}: {coeff}", file=out)
    print(f"substitute oracle: {oracle}", file=out)
    print(f"oracle-match: {str(match).lower()}", file=out)
    return EXIT_OK if match else EXIT_CHECKS_FAILED


def _parse_family(spec: str) -> GrowthSequence:
    if spec == "constant":
        return GrowthSequence.constant()
    if spec.startswith("gevrey:"):
        return GrowthSequence.gevrey(Fraction(spec.split(":", 1)[1]))
    if spec.startswith("custom:"):
        parts = [Fraction(p) for p in spec.split(":", 1)[1].split(",")]
        return GrowthSequence.custom(parts)
    raise ParseError(f"unknown sequence family {spec!r}", 0)


def _cmd_dc(args, out):
    m = _parse_family(args.family)
    depth = args.depth
    if m.kind == "custom":
        depth = min(depth, len(m.prefix) - 1)
    conv = is_log_convex(m, max(2, depth))
    if conv.ok:
        print("log-convex: yes", file=out)
        cons = log_convexity_consequences(m, min(depth, 8))
        print(f"product rule m_j m_k <= m_0 m_(j+k): {'ok' if cons.product_rule_ok else 'FAIL'}", file=out)
        print(f"root growth m_k^(k+1) <= m_0 m_(k+1)^k: {'ok' if cons.root_rule_ok else 'FAIL'}", file=out)
    else:
        print(f"log-convex: no (first violation at k={conv.witness})", file=out)
    qa = quasianalytic_test(m, depth)
    print(f"quasianalytic: {qa}", file=out)
    dc = derivation_closure_test(m, depth)
    if dc.verdict == "closed":
        print("derivation-closed: yes", file=out)
    else:
        print(
            "derivation-closed: inconclusive "
            f"(empirical max ratio {dc.max_ratio} at k={dc.max_index})",
            file=out,
        )
    return EXIT_OK


def _cmd_verify(args, out):
    with open(args.tree) as fh:
        data = json.load(fh)
    tree = tree_from_json_dict(data)
    report = verify_resolution(tree)
    for line in report.lines():
        print(line, file=out)
    for nid, text in report.assumptions:
        print(f"assumption (node {nid}): {text}", file=out)
    print(f"verified: {report.all_passed}", file=out)
    return EXIT_OK if report.all_passed else EXIT_CHECKS_FAILED


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "resolve":
            return _cmd_run(args, RESOLVE, out)
        if args.command == "monomialize":
            return _cmd_run(args, MONOMIALIZE, out)
        if args.command == "rectilinearize":
            return _cmd_run(args, RECTILINEARIZE, out)
        if args.command == "compose":
            return _cmd_compose(args, out)
        if args.command == "dc":
            return _cmd_dc(args, out)
        if args.command == "verify":
            return _cmd_verify(args, out)
        raise AssertionError("unreachable")
    except (TruncationError, BudgetError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_RESOURCES
    except (ParseError, ShapeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
