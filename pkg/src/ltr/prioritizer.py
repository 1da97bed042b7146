"""Recency/impact prioritization of the chunks along a retrieval scope.

Ranking proceeds in passes. In pass ``S`` each scope element, in scope order,
resolves the documents behind its remaining chunks, keeps the documents on
the (year, citations) Pareto front, and collects their chunks. Everything
collected in the pass gets score ``S`` and leaves every element's pool. Passes
stop once ``k`` chunks are collected or all pools are empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import CorpusStore, Document
from .graph import KnowledgeGraph, RetrievalScope, ScopeElement


@dataclass(frozen=True)
class ParetoItem:
    doc_id: str
    year: int
    citations: int


@dataclass(frozen=True)
class RankedChunk:
    chunk_id: str
    score: int
    source: ScopeElement | int
    order_key: tuple


def dominates(x: ParetoItem, y: ParetoItem) -> bool:
    return (
        x.year >= y.year
        and x.citations >= y.citations
        and (x.year > y.year or x.citations > y.citations)
    )


def pareto_front(items: Sequence[ParetoItem]) -> list[ParetoItem]:
    """Items not dominated on (year, citations); both objectives maximized.

    Items sharing identical coordinates never dominate each other. Runs in
    O(n log n) and returns the survivors in input order.
    """
    if not items:
        return []
    order = sorted(range(len(items)), key=lambda i: (-items[i].year, -items[i].citations))
    keep = [False] * len(items)
    best_newer = -1  # max citations among strictly newer years
    i = 0
    while i < len(order):
        year = items[order[i]].year
        top = items[order[i]].citations
        j = i
        while j < len(order) and items[order[j]].year == year:
            idx = order[j]
            if items[idx].citations == top and top > best_newer:
                keep[idx] = True
            j += 1
        best_newer = max(best_newer, top)
        i = j
    return [it for it, k in zip(items, keep) if k]


def apply_filters(
    chunk_ids: Iterable[str],
    store: CorpusStore,
    min_year: int | None = None,
    min_citations: int | None = None,
) -> list[str]:
    """Drop chunks whose document is older than ``min_year`` or cited less than ``min_citations``."""
    out = []
    for cid in chunk_ids:
        doc = store.doc_of(cid)
        if min_year is not None and doc.year < min_year:
            continue
        if min_citations is not None and doc.citations < min_citations:
            continue
        out.append(cid)
    return out


def rank_pools(
    pools: Sequence[Iterable[str]],
    chunk_doc: Mapping[str, tuple[str, int]],
    documents: Mapping[str, Document],
    k: int | None = None,
    sources: Sequence | None = None,
) -> list[RankedChunk]:
    """Pass-wise Pareto peeling over per-element chunk pools.

    ``chunk_doc`` maps chunk id to (doc_id, position). ``k=None`` peels every
    pool to exhaustion. ``sources`` labels each pool (defaults to its index).
    """
    if k is not None and k <= 0:
        return []
    sources = list(range(len(pools))) if sources is None else list(sources)
    remaining = [set(p) for p in pools]
    emitted: dict[str, RankedChunk] = {}
    score = 1
    while any(remaining) and (k is None or len(emitted) < k):
        collected: dict[str, RankedChunk] = {}
        for idx, pool in enumerate(remaining):
            if not pool:
                continue
            by_doc: dict[str, list[str]] = {}
            for cid in pool:
                by_doc.setdefault(chunk_doc[cid][0], []).append(cid)
            items = [ParetoItem(d, documents[d].year, documents[d].citations) for d in sorted(by_doc)]
            for item in pareto_front(items):
                for cid in by_doc[item.doc_id]:
                    if cid in collected:
                        continue  # earlier element in scope order keeps the chunk
                    key = (score, idx, -item.citations, -item.year, item.doc_id, chunk_doc[cid][1], cid)
                    collected[cid] = RankedChunk(cid, score, sources[idx], key)
        for pool in remaining:
            pool.difference_update(collected)
        emitted.update(collected)
        score += 1
    ranked = sorted(emitted.values(), key=lambda r: r.order_key)
    return ranked if k is None else ranked[:k]


def rank_scope(
    scope: RetrievalScope,
    graph: KnowledgeGraph,
    store: CorpusStore,
    k: int | None = None,
    min_year: int | None = None,
    min_citations: int | None = None,
    allowed: set[str] | None = None,
) -> list[RankedChunk]:
    """Rank the chunks mapped to ``scope``; at most ``k`` results.

    Filters prune each element's pool before ranking. ``allowed`` further
    restricts pools to a chunk subset (e.g. chunks with an embedding row).
    """
    pools = []
    for el in scope.elements:
        pool = graph.chunks_of(el)
        if allowed is not None:
            pool = pool & allowed
        if min_year is not None or min_citations is not None:
            pool = apply_filters(sorted(pool), store, min_year, min_citations)
        pools.append(pool)
    chunk_doc = {}
    for pool in pools:
        for cid in pool:
            c = store.chunks[cid]
            chunk_doc[cid] = (c.doc_id, c.position)
    return rank_pools(pools, chunk_doc, store.documents, k, scope.elements)
