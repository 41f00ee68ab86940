"""Command-line driver over a persistent store directory.

Data goes to stdout, diagnostics to stderr. Exit codes: 0 success, 1 domain
errors (invalid cue, schema violation, busy writer), 2 store corruption.
Output for read commands is deterministic: every printed value derives from
stored data, never from the wall clock.

The store directory is the first positional argument of every command, or
the GISTGRAPH_STORE environment variable when omitted.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .analyze import EmbedParams, surprise
from .consolidate import consolidation_pass
from .errors import CorruptLogError, GistGraphError
from .ingest import ingest_stream, parse_gist_lines
from .journal import read_log
from .provenance import (
    evaluate_governance,
    generate_propositions,
    parse_predicate_file,
    source_distribution,
)
from .recall import Cue, cue_from_json, recall_trace
from .schema import ELEMENT, OCCURRED_AT, SOURCE, validate_graph
from .store import MemoryStore
from .timevalues import TimeValue

STORE_ENV_VAR = "GISTGRAPH_STORE"

_TIME_FLOOR = "0001-01-01T00:00:00Z"
_TIME_CEILING = "9999-12-31T23:59:59Z"


class _UsageError(GistGraphError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise _UsageError(f"{self.prog}: {message}")


def _add_cue_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--element", action="append", default=[],
                        help="element name condition (repeatable)")
    parser.add_argument("--min-overlap", type=int, default=1,
                        help="minimum matching cue elements per concept")
    parser.add_argument("--from", dest="time_from", default=None,
                        help="time window start (ISO-8601)")
    parser.add_argument("--to", dest="time_to", default=None,
                        help="time window end (ISO-8601)")
    parser.add_argument("--source", default=None, help="source name condition")
    parser.add_argument("--interaction", default=None, help="interaction id condition")
    parser.add_argument("--max-concepts", type=int, default=None,
                        help="cap on recalled concepts (overlap then recency)")
    parser.add_argument("--at-version", type=int, default=None,
                        help="recall against this committed version")
    parser.add_argument("--cue", default=None, metavar="FILE",
                        help="JSON cue file with the same field names as the flags")


def _cue_from_args(args) -> Cue:
    if args.cue is not None:
        flags_used = (args.element or args.time_from or args.time_to or args.source
                      or args.interaction or args.max_concepts is not None
                      or args.min_overlap != 1)
        if flags_used:
            raise _UsageError("pass either --cue or individual cue flags, not both")
        import json

        cue, at_version = cue_from_json(json.loads(Path(args.cue).read_text(encoding="utf-8")))
        if args.at_version is None:
            args.at_version = at_version
        return cue
    window = None
    if args.time_from or args.time_to:
        window = TimeValue.interval(args.time_from or _TIME_FLOOR,
                                    args.time_to or _TIME_CEILING)
    return Cue(
        elements=tuple(args.element),
        min_element_overlap=args.min_overlap,
        time_window=window,
        source_name=args.source,
        interaction_id=args.interaction,
        max_concepts=args.max_concepts,
    )


def _resolve_store(args) -> Path:
    if getattr(args, "store", None):
        return Path(args.store)
    env = os.environ.get(STORE_ENV_VAR)
    if env:
        return Path(env)
    raise _UsageError(f"no store directory given and {STORE_ENV_VAR} is unset")


def build_parser() -> _Parser:
    parser = _Parser(prog="gistgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", parents=[], help="create an empty store")
    p.add_argument("store", nargs="?", default=None)
    p.add_argument("--dimension", action="append", default=[], metavar="TYPE:RELATION",
                   help="register an extension dimension, e.g. Emotion:HAS_EMOTION")
    p.set_defaults(handler=cmd_init)

    p = sub.add_parser("ingest", help="ingest a gist file (one JSON object per line, - for stdin)")
    p.add_argument("store", nargs="?", default=None)
    p.add_argument("gist_file", nargs="?", default=None)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("recall", help="construct working memory for a cue")
    p.add_argument("store", nargs="?", default=None)
    _add_cue_flags(p)
    p.add_argument("--trace", action="store_true", help="explain per-concept cue satisfaction")
    p.add_argument("--format", choices=("text", "subgraph"), default="text")
    p.set_defaults(handler=cmd_recall)

    p = sub.add_parser("consolidate", help="merge structurally equivalent concepts")
    p.add_argument("store", nargs="?", default=None)
    p.add_argument("--generalize-times", action="store_true",
                   help="collapse event times to the minimal covering interval")
    p.add_argument("--role-blind", action="store_true",
                   help="compare element sets without relation roles")
    p.set_defaults(handler=cmd_consolidate)

    p = sub.add_parser("surprise", help="structural divergence between two recalled versions")
    p.add_argument("store", nargs="?", default=None)
    _add_cue_flags(p)
    p.add_argument("--t1", type=int, required=True)
    p.add_argument("--t2", type=int, required=True)
    p.add_argument("--op", choices=("nbr", "emb"), default="nbr")
    p.add_argument("--k", type=int, default=2, help="neighborhood hops for --op nbr")
    p.add_argument("--dim", type=int, default=128, help="vector dimension for --op emb")
    p.add_argument("--seed", type=int, default=0, help="hash seed for --op emb")
    p.add_argument("--theta", type=float, default=0.0, help="significance threshold")
    p.set_defaults(handler=cmd_surprise)

    p = sub.add_parser("sources", help="cue-conditioned source distribution")
    p.add_argument("store", nargs="?", default=None)
    _add_cue_flags(p)
    p.add_argument("--weighting", choices=("uniform", "element-weight-sum"),
                   default="uniform")
    p.set_defaults(handler=cmd_sources)

    p = sub.add_parser("audit", help="evaluate governance predicates against a recall")
    p.add_argument("store", nargs="?", default=None)
    _add_cue_flags(p)
    p.add_argument("--predicates", required=True, help="predicate file, kind(arg,...) per line")
    p.set_defaults(handler=cmd_audit)

    p = sub.add_parser("propose", help="generate propositions from a recall")
    p.add_argument("store", nargs="?", default=None)
    _add_cue_flags(p)
    p.add_argument("--limit", type=int, default=10)
    p.set_defaults(handler=cmd_propose)

    p = sub.add_parser("validate", help="check the whole graph against its schema")
    p.add_argument("store", nargs="?", default=None)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("log", help="list committed batch records")
    p.add_argument("store", nargs="?", default=None)
    p.add_argument("--from-version", type=int, default=1)
    p.set_defaults(handler=cmd_log)

    return parser


def cmd_init(args) -> int:
    directory = _resolve_store(args)
    dimensions = []
    for dim_text in args.dimension:
        node_type, sep, relation = dim_text.partition(":")
        if not sep:
            raise _UsageError(f"--dimension wants TYPE:RELATION, got {dim_text!r}")
        dimensions.append((node_type, relation))
    with MemoryStore.create(directory, dimensions=dimensions):
        pass
    print(f"initialized store at {directory}")
    return 0


def cmd_ingest(args) -> int:
    store_arg, file_arg = args.store, args.gist_file
    if file_arg is None:
        # Single positional plus GISTGRAPH_STORE: treat it as the gist file.
        if store_arg is not None and os.environ.get(STORE_ENV_VAR):
            store_arg, file_arg = None, store_arg
        else:
            raise _UsageError("ingest wants a store directory and a gist file")
    args.store = store_arg
    directory = _resolve_store(args)

    if file_arg == "-":
        lines = sys.stdin.read().splitlines()
    else:
        lines = Path(file_arg).read_text(encoding="utf-8").splitlines()
    gists, parse_diagnostics = parse_gist_lines(lines)
    for diagnostic in parse_diagnostics:
        print(diagnostic, file=sys.stderr)

    with MemoryStore.open(directory, writable=True) as store:
        result = ingest_stream(store, gists, now=datetime.now(timezone.utc))
        for diagnostic in result.diagnostics:
            print(diagnostic, file=sys.stderr)
        for receipt in result.receipts:
            print(f"ingested concept={receipt.concept_id} version={receipt.version} "
                  f"new-nodes={len(receipt.created_node_ids)} "
                  f"relations={receipt.created_relation_count}")
    return 0


def _describe_concept(wm, concept_id) -> str:
    elements = sorted(
        wm.nodes[dst].name for (src, _rel, dst) in wm.relations
        if src == concept_id and wm.nodes[dst].type == ELEMENT
    )
    sources = sorted(
        wm.nodes[src].name for (src, rel, dst) in wm.relations
        if dst == concept_id and wm.nodes[src].type == SOURCE
    )
    times = sorted(
        wm.nodes[dst].name for (src, rel, dst) in wm.relations
        if src == concept_id and rel == OCCURRED_AT
    )
    label = wm.nodes[concept_id].name
    return (f"concept {concept_id} \"{label}\" elements=[{', '.join(elements)}]"
            f" sources=[{', '.join(sources)}] times=[{', '.join(times)}]")


def cmd_recall(args) -> int:
    directory = _resolve_store(args)
    cue = _cue_from_args(args)
    with MemoryStore.open(directory) as store:
        wm, trace = recall_trace(store, cue, at_version=args.at_version)
    if args.format == "subgraph":
        print(wm.document())
    else:
        print(f"version: {wm.version}")
        print(f"cue: {cue.describe()}")
        print(f"concepts: {len(wm.concept_ids())} nodes: {len(wm.nodes)} "
              f"relations: {len(wm.relations)}")
        for concept_id in wm.concept_ids():
            print(_describe_concept(wm, concept_id))
    if args.trace:
        print(trace.render())
    return 0


def cmd_consolidate(args) -> int:
    directory = _resolve_store(args)
    with MemoryStore.open(directory, writable=True) as store:
        report = consolidation_pass(store, generalize_times=args.generalize_times,
                                    role_blind=args.role_blind)
    print(report.render())
    return 0


def cmd_surprise(args) -> int:
    directory = _resolve_store(args)
    cue = _cue_from_args(args)
    with MemoryStore.open(directory) as store:
        report = surprise(
            store, cue, args.t1, args.t2, args.op, k=args.k,
            embed_params=EmbedParams(dimension=args.dim, rounds=args.k, seed=args.seed),
            theta=args.theta,
        )
    print(report.render())
    return 0


def cmd_sources(args) -> int:
    directory = _resolve_store(args)
    cue = _cue_from_args(args)
    with MemoryStore.open(directory) as store:
        wm, _ = recall_trace(store, cue, at_version=args.at_version)
    print(source_distribution(wm, args.weighting).render())
    return 0


def cmd_audit(args) -> int:
    directory = _resolve_store(args)
    cue = _cue_from_args(args)
    predicates = parse_predicate_file(
        Path(args.predicates).read_text(encoding="utf-8").splitlines()
    )
    with MemoryStore.open(directory) as store:
        wm, _ = recall_trace(store, cue, at_version=args.at_version)
    report = evaluate_governance(wm, predicates)
    print(report.render())
    return 1 if report.errors else 0


def cmd_propose(args) -> int:
    directory = _resolve_store(args)
    cue = _cue_from_args(args)
    with MemoryStore.open(directory) as store:
        wm, _ = recall_trace(store, cue, at_version=args.at_version)
    for proposition in generate_propositions(wm, limit=args.limit):
        print(proposition.text)
        print(proposition.audit_line())
    return 0


def cmd_validate(args) -> int:
    directory = _resolve_store(args)
    with MemoryStore.open(directory) as store:
        report = validate_graph(store.schema, store.graph)
    print(report.render())
    return 0 if report.is_empty else 1


def cmd_log(args) -> int:
    directory = _resolve_store(args)
    contents = read_log(directory / "memory.log")
    for record in contents.records:
        if record.version < args.from_version:
            continue
        if record.kind == "ING":
            print(f"ING version={record.version} nodes={len(record.body['nodes'])} "
                  f"relations={len(record.body['rels'])}")
        else:
            print(f"CSL version={record.version} kept={record.body['kept']} "
                  f"absorbed={record.body['absorbed']} "
                  f"removed={len(record.body['removed'])} "
                  f"upserts={len(record.body['upserts'])}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CorruptLogError as exc:
        print(f"store corruption: {exc}", file=sys.stderr)
        return 2
    except GistGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
