"""``lfd`` command-line front end.

Exit codes: 0 found/true, 1 bottom/false, 2 input error, 3 conflicting map.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import lattice
from .core import LfdError, consistent_modulo, consistent_with_set, derivation_distance, is_valid
from .documents import (RESULT_FILES, data_text, dumps, instance_from_entities, instance_to_json,
                        parse_entities, policy_to_json)
from .reduce import Graph, Construction, gen_graph, reduce_graph
from .solve import SolveStrategy, Strategy, default_jobs, solve, solve_min_t

EXIT_TRUE, EXIT_FALSE, EXIT_INPUT, EXIT_CONFLICT = 0, 1, 2, 3
BUILTIN_PREFIX = "builtin:"


class InputError(Exception):
    pass


def _read(path: str) -> str:
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        if name not in RESULT_FILES:
            raise InputError(f"unknown builtin {name!r}; choose from {', '.join(RESULT_FILES)}")
        return data_text(RESULT_FILES[name])
    try:
        return Path(path).read_text(encoding="utf-8") if path != "-" else sys.stdin.read()
    except OSError as exc:
        raise InputError(str(exc)) from None


def _load_json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    try:
        return int(os.environ.get("LFD_SEED", "0"))
    except ValueError:
        raise InputError("LFD_SEED must be an integer") from None


def _emit(doc) -> None:
    sys.stdout.write(dumps(doc))


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    inst = instance_from_entities(parse_entities(_load_json(args.instance)))
    strategy = SolveStrategy(Strategy(args.strategy), args.restrict_features)
    kw = {"jobs": args.jobs, "check": not args.no_precheck}
    if args.minimize_t:
        out, t_used = solve_min_t(inst, strategy, t_max=args.t_max, **kw)
    else:
        out = solve(inst, strategy, **kw)
        t_used = inst.t if out.found else None
    _emit({"result": "policy" if out.found else "bottom",
           "policy": policy_to_json(out.result) if out.found else None,
           "t_used": t_used,
           "stats": {"candidates": out.candidates, "elapsed_s": round(out.elapsed, 6),
                     "strategy": strategy.kind.value, "jobs": args.jobs}})
    return EXIT_TRUE if out.found else EXIT_FALSE


def cmd_check(args) -> int:
    ent = parse_entities(_load_json(args.instance))
    demos = ent.demos + ((ent.d_new,) if ent.d_new is not None else ())
    subject = ent.candidate if ent.candidate is not None else ent.policy
    report = {"what": args.what}
    if args.what in ("validity", "consistency"):
        if subject is None:
            raise InputError("needs a policy (or candidate) to check")
        fn = is_valid if args.what == "validity" else consistent_with_set
        value = fn(subject, demos)
    elif args.what == "policy-consistency":
        if ent.candidate is None or ent.policy is None or ent.d_new is None:
            raise InputError("policy-consistency needs candidate, policy and d_new")
        value = consistent_modulo(ent.candidate, ent.policy, ent.d_new)
    else:
        if ent.candidate is None or ent.policy is None:
            raise InputError("derivability needs policy (old) and candidate (new)")
        dist = derivation_distance(ent.policy, ent.candidate)
        bound = ent.limits.get("c")
        value = dist <= bound if bound is not None else not math.isinf(dist)
        report["distance"] = "inf" if math.isinf(dist) else int(dist)
        report["c"] = bound
    report["value"] = bool(value)
    _emit(report)
    return EXIT_TRUE if value else EXIT_FALSE


def cmd_reduce(args) -> int:
    try:
        graph = Graph.from_json(_load_json(args.graph))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed graph document: {exc!r}") from None
    art = reduce_graph(Construction(args.lemma), graph, args.k, _seed(args), pd3=args.pd3)
    _emit(instance_to_json(art.instance, meta=art.meta()))
    return EXIT_TRUE


def cmd_gen(args) -> int:
    if args.model == "gnp":
        if args.n is None:
            raise InputError("gnp needs --n")
        g = gen_graph("uniform_random", _seed(args), n=args.n, edge_prob=args.p)
    else:
        if args.rows is None or args.cols is None:
            raise InputError("grid3 needs --rows and --cols")
        g = gen_graph("grid_subgraph", _seed(args), rows=args.rows, cols=args.cols,
                      keep_prob=args.keep)
    _emit(g.to_json())
    return EXIT_TRUE


def _split(text):
    return [p.strip() for p in text.split(",") if p.strip()] if text else None


def cmd_map(args) -> int:
    universe, results = lattice.load_results(_load_json(args.results))
    imap = lattice.propagate(results, universe)
    rows, cols = _split(args.rows), _split(args.cols)
    if rows is None and cols is None:
        cols = list(universe[len(universe) - len(universe) // 2:])
    if cols is None:
        cols = [p for p in universe if p not in rows]
    if rows is None:
        rows = [p for p in universe if p not in cols]
    sys.stdout.write(lattice.render_map(imap, rows, cols, args.format, annotate_raw=args.annotate))
    conflicts = lattice.detect_conflicts(imap)
    for cell, prov in conflicts:
        print(f"conflict at {{{', '.join(cell)}}}: {', '.join(prov)}", file=sys.stderr)
    return EXIT_CONFLICT if conflicts else EXIT_TRUE


def _thresholds(text: str) -> dict:
    out = {}
    for part in _split(text) or []:
        name, sep, value = part.partition("=")
        if not sep:
            raise InputError(f"threshold {part!r} is not NAME=VALUE")
        try:
            out[name.strip()] = int(value)
        except ValueError:
            raise InputError(f"threshold {part!r} needs an integer value") from None
    return out


def cmd_advise(args) -> int:
    inst = instance_from_entities(parse_entities(_load_json(args.instance)))
    universe, results = lattice.load_results(_load_json(args.results))
    imap = lattice.propagate(results, universe)
    advice = lattice.advise(inst, imap, _thresholds(args.thresholds))
    _emit(advice.to_json())
    return EXIT_TRUE


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfd", description="Exact policy inference from demonstrations, "
                                 "dominating-set reductions and intractability maps.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance document")
    p.add_argument("instance")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.BACKTRACKING.value)
    p.add_argument("--minimize-t", action="store_true", help="search for the smallest t")
    p.add_argument("--t-max", type=_positive, help="cap for --minimize-t")
    p.add_argument("--restrict-features", action="store_true",
                   help="only use features that occur in the demonstrations")
    p.add_argument("--jobs", type=_positive, default=default_jobs())
    p.add_argument("--no-precheck", action="store_true",
                   help="skip checking that the given policy fits the history")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="evaluate one predicate on a document")
    p.add_argument("instance")
    p.add_argument("--what", required=True,
                   choices=["validity", "consistency", "policy-consistency", "derivability"])
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reduce", help="build an LfD instance from a dominating-set graph")
    p.add_argument("graph")
    p.add_argument("--lemma", required=True, choices=[m.value for m in Construction])
    p.add_argument("--k", required=True, type=_positive)
    p.add_argument("--seed", type=int, help="defaults to $LFD_SEED, else 0")
    p.add_argument("--pd3", action="store_true", help="require maximum degree 3")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("gen", help="generate a graph")
    p.add_argument("--model", required=True, choices=["gnp", "grid3"])
    p.add_argument("--n", type=_positive)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--rows", type=_positive)
    p.add_argument("--cols", type=_positive)
    p.add_argument("--keep", type=float, default=1.0)
    p.add_argument("--seed", type=int, help="defaults to $LFD_SEED, else 0")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("map", help="render an intractability map")
    p.add_argument("results", help=f"raw-results JSON, or {BUILTIN_PREFIX}NAME "
                                   f"({', '.join(RESULT_FILES)})")
    p.add_argument("--rows", help="comma-separated row parameters")
    p.add_argument("--cols", help="comma-separated column parameters")
    p.add_argument("--format", choices=["md", "markdown", "csv", "json"], default="md")
    p.add_argument("--annotate", action="store_true", help="mark cells holding raw results")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("advise", help="look up an instance in an intractability map")
    p.add_argument("instance")
    p.add_argument("results")
    p.add_argument("--thresholds", default="", help="e.g. F=5,A=3")
    p.set_defaults(func=cmd_advise)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, LfdError, lattice.LatticeError) as exc:
        print(f"lfd {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
