"""``ltr`` command line: ingest, query, eval, synth.

Exit codes: 0 success, 1 usage error, 2 data or validation error. Diagnostics
go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import ingest_corpus
from .embedding_client import EmbeddingClient
from .evaluator import DEFAULT_K_GRID, eval_run
from .exceptions import LtrError
from .index import CorpusIndex
from .retriever import METHODS, Lexicon, Query, link_query_entities, retrieve
from .synth import SynthParams, generate
from .vectors import read_embedding_file

logger = logging.getLogger("ltr")

RESULT_COLUMNS = ["rank", "chunk_id", "doc_id", "score", "method", "text"]

FORMATS_HELP = """\
file formats:
  documents.jsonl   {"doc_id","title","abstract","year","citations"}
  chunks.jsonl      {"chunk_id","doc_id","position","text"}
  annotations.jsonl {"chunk_id","entities":[{"id","type","span","text"}],"relations":[{"head","tail","type"}]}
  gold.jsonl        {"question_id","question","query_entities","relevant_doc_ids","question_embedding"?}
  embeddings.bin    "EMBIDX01", u32 version=1, u32 dim, u64 count, count*dim float32 (little-endian)
  ids.txt           one chunk_id per line
  lexicon.tsv       entity_id<TAB>type<TAB>surface
  index directory   documents.bin, chunks.bin, annotations.bin (header "LTRIDX1"),
                    embeddings.bin, ids.txt, graph.json, summary.json
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        shown = f"unknown method {bad[0]!r}; " if bad else ""
        raise argparse.ArgumentTypeError(f"{shown}methods must be drawn from {','.join(METHODS)}")
    return list(dict.fromkeys(methods))


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _add_embed_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embed-endpoint", help="HTTP embedding provider URL (POST {\"input\": text} -> {\"embedding\": [...]})")
    p.add_argument("--embed-auth-env", help="environment variable whose value is sent as the Authorization header")


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-year", type=int, help="drop chunks of documents published before this year")
    p.add_argument("--min-citations", type=_non_negative, help="drop chunks of documents with fewer citations")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ltr",
        description="Knowledge-graph, embedding-similarity and hybrid retrieval with a benchmark harness.",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"ltr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate corpus files and build an index directory")
    p.add_argument("--docs", required=True, help="documents.jsonl")
    p.add_argument("--chunks", help="chunks.jsonl; omitted means sentence-split title and abstract")
    p.add_argument("--annotations", required=True, help="annotations.jsonl")
    p.add_argument("--embeddings", required=True, help="embeddings.bin (EMBIDX01 v1)")
    p.add_argument("--ids", required=True, help="ids.txt, one chunk_id per embedding row")
    p.add_argument("--out", required=True, help="index directory to create")

    p = sub.add_parser("query", help="retrieve chunks for one question")
    p.add_argument("--index", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--k", type=_non_negative, default=20)
    p.add_argument("--entities", help="comma-separated entity ids (overrides lexicon linking)")
    p.add_argument("--lexicon", help="lexicon.tsv used to link entities in --question")
    p.add_argument("--question", default="", help="question text")
    p.add_argument("--question-embedding", help="EMBIDX01 file holding one row")
    _add_filter_flags(p)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--out", help="output file (default stdout)")
    _add_embed_flags(p)

    p = sub.add_parser("eval", help="precision/recall@K and cluster coverage against a gold file")
    p.add_argument("--index", required=True)
    p.add_argument("--gold", required=True, help="gold.jsonl")
    p.add_argument("--methods", type=_methods, default=list(METHODS))
    p.add_argument("--k-grid", type=_int_list, default=list(DEFAULT_K_GRID))
    p.add_argument("--clusters", type=_non_negative, default=200, help="k-means cluster count (0 disables)")
    p.add_argument("--seed", type=int, default=0, help="k-means seed")
    p.add_argument("--lexicon", help="links entities for gold questions without query_entities")
    _add_filter_flags(p)
    p.add_argument("--out", required=True, help="output directory for metrics.csv, detail.csv, skipped.csv")
    _add_embed_flags(p)

    p = sub.add_parser("synth", help="write a deterministic synthetic corpus")
    p.add_argument("--seed", type=int, default=SynthParams.seed)
    p.add_argument("--out", required=True)
    for name, kind in (
        ("dim", int), ("n_clusters", int), ("n_docs", int), ("min_chunks", int), ("max_chunks", int),
        ("skew", float), ("n_gold", int), ("gold_spread", int), ("noise", float), ("topic_pull", float),
    ):
        p.add_argument("--" + name.replace("_", "-"), type=kind, default=getattr(SynthParams, name))
    return parser


def _client(args) -> EmbeddingClient | None:
    if args.embed_auth_env and not args.embed_endpoint:
        raise UsageError("--embed-auth-env requires --embed-endpoint")
    return EmbeddingClient(args.embed_endpoint, args.embed_auth_env) if args.embed_endpoint else None


def _cmd_ingest(args) -> None:
    summary = ingest_corpus(args.docs, args.chunks, args.annotations, args.embeddings, args.ids, args.out)
    print(json.dumps(summary.to_dict(), sort_keys=True))


def _cmd_query(args) -> None:
    if args.question_embedding and args.embed_endpoint:
        raise UsageError("--question-embedding and --embed-endpoint are mutually exclusive")
    client = _client(args)
    index = CorpusIndex.load(args.index)

    if args.entities:
        entities = tuple(e.strip() for e in args.entities.split(",") if e.strip())
    elif args.lexicon and args.question:
        entities = tuple(link_query_entities(args.question, Lexicon.load(args.lexicon)))
    else:
        entities = ()

    embedding = None
    if args.method in ("es", "hybrid"):
        if args.question_embedding:
            rows = read_embedding_file(args.question_embedding)
            if rows.shape[0] != 1:
                raise LtrError(f"{args.question_embedding}: expected exactly one row, found {rows.shape[0]}")
            embedding = rows[0].astype(np.float64)
        elif client is not None and args.question:
            embedding = client.embed(args.question)

    query = Query(args.question, entities, embedding)
    result = retrieve(index, args.method, query, args.k, args.min_year, args.min_citations)
    if result.flags.get("disconnected"):
        logger.warning("query entities are not connected in the graph; using their 1-hop neighbourhoods")

    chunks = index.store.chunks
    records = [
        {"rank": h.rank, "chunk_id": h.chunk_id, "doc_id": h.doc_id, "score": h.score, "method": result.method,
         "text": chunks[h.chunk_id].text}
        for h in result.ranked
    ]
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        if args.format == "jsonl":
            for r in records:
                out.write(json.dumps(r, ensure_ascii=False) + "\n")
        else:
            w = csv.DictWriter(out, fieldnames=RESULT_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(records)
    finally:
        if out is not sys.stdout:
            out.close()


def _cmd_eval(args) -> None:
    client = _client(args)
    lexicon = Lexicon.load(args.lexicon) if args.lexicon else None
    report = eval_run(
        args.index, args.gold, args.methods, args.k_grid, args.clusters, args.seed, args.out,
        lexicon=lexicon, client=client, min_year=args.min_year, min_citations=args.min_citations,
    )
    for qid, method, reason in report.skipped:
        logger.warning("skipped %s/%s: %s", qid, method, reason)
    logger.info("wrote %d metric rows to %s", len(report.rows) + len(report.aggregates), Path(args.out) / "metrics.csv")


def _cmd_synth(args) -> None:
    fields = ("dim", "n_clusters", "n_docs", "min_chunks", "max_chunks", "skew", "n_gold", "gold_spread", "noise", "topic_pull")
    params = SynthParams(seed=args.seed, **{f: getattr(args, f) for f in fields})
    try:
        params.validate()
    except ValueError as exc:
        raise LtrError(str(exc)) from exc
    stats = generate(params, args.out)
    print(json.dumps({k: stats[k] for k in ("documents", "chunks", "gold_docs", "question_entity")}, sort_keys=True))


COMMANDS = {"ingest": _cmd_ingest, "query": _cmd_query, "eval": _cmd_eval, "synth": _cmd_synth}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="ltr: %(levelname)s: %(message)s",
            stream=sys.stderr,
        )
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (LtrError, ValueError, KeyError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"ltr: error: {message}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
