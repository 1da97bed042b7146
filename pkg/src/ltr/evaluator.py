"""Document-level precision/recall@K and cluster-coverage benchmark runs."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clustering import ClusterModel, cluster_coverage, fit_kmeans
from .corpus import GoldStandard, load_gold
from .embedding_client import EmbeddingClient
from .exceptions import LtrError
from .index import CorpusIndex
from .retriever import RETRIEVERS, Lexicon, Query, RetrievalResult, link_query_entities

logger = logging.getLogger(__name__)

DEFAULT_K_GRID = (10, 25, 50, 100, 250, 500, 1000)
METRICS_HEADER = ["question_id", "method", "K", "n_docs", "precision", "recall", "clusters_hit"]
DETAIL_HEADER = ["question_id", "method", "rank", "chunk_id", "doc_id", "cluster", "is_gold"]
SKIPPED_HEADER = ["question_id", "method", "reason"]
MEAN_ID, CI_ID = "__mean__", "__ci95__"


@dataclass(frozen=True)
class MetricsRow:
    question_id: str
    method: str
    K: int
    n_docs: float
    precision: float
    recall: float
    clusters_hit: float


@dataclass
class EvalReport:
    rows: list[MetricsRow] = field(default_factory=list)
    aggregates: list[MetricsRow] = field(default_factory=list)
    skipped: list[tuple[str, str, str]] = field(default_factory=list)
    results: dict[tuple[str, str], RetrievalResult] = field(default_factory=dict)


def doc_metrics(result: RetrievalResult, gold: Iterable[str], k: int | None = None) -> tuple[float, float]:
    """(precision, recall) over the documents owning the first ``k`` retrieved chunks."""
    gold = set(gold)
    if not gold:
        raise ValueError("gold standard has no relevant documents")
    hits = result.ranked if k is None else result.ranked[:k]
    docs = set(h.doc_id for h in hits)
    if not docs:
        return 0.0, 0.0
    tp = len(docs & gold)
    return tp / len(docs), tp / len(gold)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def build_query(
    gold: GoldStandard, lexicon: Lexicon | None = None, client: EmbeddingClient | None = None
) -> Query:
    entities = tuple(gold.query_entity_ids)
    if not entities and lexicon is not None:
        entities = tuple(link_query_entities(gold.question, lexicon))
    emb = None
    if gold.question_embedding is not None:
        emb = np.asarray(gold.question_embedding, dtype=np.float64)
    elif client is not None:
        emb = client.embed(gold.question)
    return Query(gold.question, entities, emb)


def aggregate(rows: Sequence[MetricsRow]) -> list[MetricsRow]:
    """Mean and 95% half-width (1.96 standard errors) per (method, K)."""
    groups: dict[tuple[str, int], list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.method, r.K), []).append(r)
    out = []
    for (method, k), grp in groups.items():
        cols = {f: np.array([getattr(r, f) for r in grp], dtype=np.float64) for f in ("n_docs", "precision", "recall", "clusters_hit")}
        mean = {f: float(v.mean()) for f, v in cols.items()}
        n = len(grp)
        ci = {f: (1.96 * float(v.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0) for f, v in cols.items()}
        out.append(MetricsRow(MEAN_ID, method, k, **mean))
        out.append(MetricsRow(CI_ID, method, k, **ci))
    return out


def evaluate(
    index: CorpusIndex,
    questions: Sequence[GoldStandard],
    methods: Sequence[str] = ("es", "kg", "hybrid"),
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    clusters: ClusterModel | None = None,
    lexicon: Lexicon | None = None,
    client: EmbeddingClient | None = None,
    min_year: int | None = None,
    min_citations: int | None = None,
) -> EvalReport:
    """Run every method once per question at ``max(k_grid)`` and score each prefix."""
    k_grid = sorted(set(int(k) for k in k_grid))
    if not k_grid or k_grid[0] < 1:
        raise ValueError("K grid must hold positive integers")
    for m in methods:
        if m not in RETRIEVERS:
            raise ValueError(f"unknown method {m!r}")
    k_max = k_grid[-1]
    retrievers = {
        m: RETRIEVERS[m](k=k_max, min_year=min_year, min_citations=min_citations).fit(index) for m in methods
    }
    report = EvalReport()
    for gold in questions:
        try:
            query = build_query(gold, lexicon, client)
        except LtrError as exc:
            for m in methods:
                report.skipped.append((gold.question_id, m, str(exc)))
            continue
        for m in methods:
            try:
                result = retrievers[m].retrieve(query)
            except (LtrError, KeyError) as exc:
                reason = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
                logger.warning("skipping %s/%s: %s", gold.question_id, m, reason)
                report.skipped.append((gold.question_id, m, str(reason)))
                continue
            report.results[(gold.question_id, m)] = result
            for k in k_grid:
                prefix = result.truncate(k)
                precision, recall = doc_metrics(prefix, gold.relevant_doc_ids)
                hit = cluster_coverage(clusters, prefix.chunk_ids) if clusters is not None else 0
                report.rows.append(
                    MetricsRow(gold.question_id, m, k, len(prefix.retrieved_docs), precision, recall, hit)
                )
    report.aggregates = aggregate(report.rows)
    return report


def write_report(report: EvalReport, questions: Sequence[GoldStandard], clusters: ClusterModel | None, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in [*report.rows, *report.aggregates]:
            w.writerow([r.question_id, r.method, r.K, _fmt(r.n_docs), _fmt(r.precision), _fmt(r.recall), _fmt(r.clusters_hit)])
    gold_by_id = {g.question_id: g.relevant_doc_ids for g in questions}
    with open(out / "detail.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETAIL_HEADER)
        for (qid, method), result in report.results.items():
            for h in result.ranked:
                cluster = clusters.assignments.get(h.chunk_id, "") if clusters is not None else ""
                w.writerow([qid, method, h.rank, h.chunk_id, h.doc_id, cluster, int(h.doc_id in gold_by_id[qid])])
    with open(out / "skipped.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SKIPPED_HEADER)
        w.writerows(report.skipped)


def eval_run(
    index: CorpusIndex | str | Path,
    gold_path: str | Path,
    methods: Sequence[str] = ("es", "kg", "hybrid"),
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    k_clusters: int = 200,
    seed: int = 0,
    out_dir: str | Path = "eval_out",
    lexicon: Lexicon | None = None,
    client: EmbeddingClient | None = None,
    min_year: int | None = None,
    min_citations: int | None = None,
) -> EvalReport:
    """Evaluate and write ``metrics.csv``, ``detail.csv`` and ``skipped.csv`` under ``out_dir``.

    ``k_clusters=0`` skips clustering; ``clusters_hit`` is then 0 and the
    detail ``cluster`` column is empty.
    """
    if not isinstance(index, CorpusIndex):
        index = CorpusIndex.load(index)
    questions, _ = load_gold(gold_path, index.store)
    clusters = fit_kmeans(index.vectors.matrix, k_clusters, seed) if k_clusters else None
    report = evaluate(index, questions, methods, k_grid, clusters, lexicon, client, min_year, min_citations)
    write_report(report, questions, clusters, out_dir)
    return report
