"""Query linking and the three retrieval strategies.

Each strategy is a scikit-learn style estimator: construct it with its
hyper-parameters, ``fit`` it on a :class:`~ltr.index.CorpusIndex` (or an index
directory), then call ``retrieve`` for one query or ``predict`` for many.

>>> kg = KGRetriever(k=50).fit("idx/")          # doctest: +SKIP
>>> kg.retrieve(Query(entity_ids=["MESH:D001249"])).retrieved_docs  # doctest: +SKIP
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import QueryError
from .index import CorpusIndex
from .prioritizer import RankedChunk, rank_scope

METHODS = ("es", "kg", "hybrid")


@dataclass(frozen=True)
class Query:
    question: str = ""
    entity_ids: tuple[str, ...] = ()
    question_embedding: np.ndarray | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Hit:
    rank: int
    chunk_id: str
    doc_id: str
    score: float


@dataclass
class RetrievalResult:
    method: str
    ranked: list[Hit]
    flags: dict = field(default_factory=dict)

    @property
    def chunk_ids(self) -> list[str]:
        return [h.chunk_id for h in self.ranked]

    @property
    def retrieved_docs(self) -> list[str]:
        return list(dict.fromkeys(h.doc_id for h in self.ranked))

    def truncate(self, k: int) -> RetrievalResult:
        return RetrievalResult(self.method, self.ranked[:k], dict(self.flags))


# ---------------------------------------------------------------------------
# entity linking


@dataclass(frozen=True)
class LexiconEntry:
    entity_id: str
    entity_type: str
    surface: str


class Lexicon:
    def __init__(self, entries: Iterable[LexiconEntry]):
        self.entries = list(entries)
        self._surfaces = sorted({(e.surface.lower(), e.entity_id) for e in self.entries if e.surface.strip()})

    @classmethod
    def load(cls, path: str | Path) -> Lexicon:
        entries = []
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
                if not row or not "".join(row).strip():
                    continue
                if len(row) != 3:
                    raise QueryError(f"{path}:{lineno}: expected entity_id<TAB>type<TAB>surface")
                entries.append(LexiconEntry(*row))
        return cls(entries)

    def __len__(self) -> int:
        return len(self.entries)


def link_query_entities(question: str, lexicon: Lexicon) -> list[str]:
    """Entity ids whose surface forms occur in ``question``.

    Matching is case-insensitive on word boundaries. Longer matches are
    accepted first and later matches may not overlap them. Returned ids are
    deduplicated in order of their position in the question.
    """
    text = question.lower()
    found = []
    for surface, eid in lexicon._surfaces:
        for m in re.finditer(r"(?<!\w)" + re.escape(surface) + r"(?!\w)", text):
            found.append((m.start(), m.end(), eid))
    found.sort(key=lambda f: (-(f[1] - f[0]), f[0], f[2]))
    taken: list[tuple[int, int, str]] = []
    for start, end, eid in found:
        if all(end <= s or start >= e for s, e, _ in taken):
            taken.append((start, end, eid))
    taken.sort()
    return list(dict.fromkeys(eid for _, _, eid in taken))


# ---------------------------------------------------------------------------
# fusion


def hybrid_scores(es_scores: Mapping[str, float], kg_ranking: Sequence[RankedChunk]) -> dict[str, float]:
    """Average of min-max rescaled cosine and KG output position.

    The candidate pool is exactly the chunks in ``kg_ranking``. Position ``p``
    (1-based) maps to ``(max_p - p) / (max_p - 1)``. A method whose pool values
    are all equal contributes 1.0 to every candidate. The returned dict is
    ordered by fused score descending, then chunk id.
    """
    pool = [r.chunk_id for r in kg_ranking]
    if not pool:
        return {}
    missing = [c for c in pool if c not in es_scores]
    if missing:
        raise QueryError(f"chunk {missing[0]!r} has no embedding score")
    es = np.array([es_scores[c] for c in pool], dtype=np.float64)
    lo, hi = es.min(), es.max()
    g_es = np.ones_like(es) if hi == lo else (es - lo) / (hi - lo)
    n = len(pool)
    positions = np.arange(1, n + 1, dtype=np.float64)
    g_kg = np.ones(n) if n == 1 else (n - positions) / (n - 1)
    fused = (g_es + g_kg) / 2.0
    order = sorted(range(n), key=lambda i: (-fused[i], pool[i]))
    return {pool[i]: float(fused[i]) for i in order}


# ---------------------------------------------------------------------------
# estimators


def _as_index(X) -> CorpusIndex:
    if isinstance(X, CorpusIndex):
        return X
    if isinstance(X, (str, Path)):
        return CorpusIndex.load(X)
    raise TypeError(f"expected a CorpusIndex or an index directory, got {type(X).__name__}")


class _BaseRetriever(BaseEstimator):
    method = ""

    def __init__(self, k: int = 20, min_year: int | None = None, min_citations: int | None = None):
        self.k = k
        self.min_year = min_year
        self.min_citations = min_citations

    def _check_params(self) -> None:
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k!r}")
        for name in ("min_year", "min_citations"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, np.integer))):
                raise ValueError(f"{name} must be an integer or None")

    def fit(self, X, y=None):
        self._check_params()
        self.index_ = _as_index(X)
        return self

    def retrieve(self, query: Query) -> RetrievalResult:
        check_is_fitted(self, "index_")
        return self._retrieve(query)

    def predict(self, X: Iterable[Query]) -> list[RetrievalResult]:
        return [self.retrieve(q) for q in X]

    def _hits(self, pairs: Iterable[tuple[str, float]]) -> list[Hit]:
        chunks = self.index_.store.chunks
        return [Hit(i, cid, chunks[cid].doc_id, score) for i, (cid, score) in enumerate(pairs, start=1)]

    def _embedding(self, query: Query) -> np.ndarray:
        if query.question_embedding is None:
            raise QueryError(f"method {self.method} needs a question embedding")
        return np.asarray(query.question_embedding, dtype=np.float64)

    def _scope(self, query: Query):
        if not query.entity_ids:
            raise QueryError("no query entities")
        return self.index_.graph.scope_for_entities(query.entity_ids)


class ESRetriever(_BaseRetriever):
    """Cosine top-k over every embedded chunk."""

    method = "es"

    def _retrieve(self, query: Query) -> RetrievalResult:
        q = self._embedding(query)
        mask = self.index_.row_mask(self.min_year, self.min_citations)
        top = self.index_.vectors.top_k(q, self.k, mask)
        return RetrievalResult(self.method, self._hits((s.chunk_id, s.score) for s in top))


class KGRetriever(_BaseRetriever):
    """Pareto recency/impact ranking along the graph scope of the query entities."""

    method = "kg"

    def _retrieve(self, query: Query) -> RetrievalResult:
        scope = self._scope(query)
        ranked = rank_scope(scope, self.index_.graph, self.index_.store, self.k, self.min_year, self.min_citations)
        flags = {"disconnected": scope.disconnected, "path": list(scope.path)}
        return RetrievalResult(self.method, self._hits((r.chunk_id, float(r.score)) for r in ranked), flags)


class HybridRetriever(_BaseRetriever):
    """Fused cosine and KG ranking over the KG-mapped chunks of the scope."""

    method = "hybrid"

    def _retrieve(self, query: Query) -> RetrievalResult:
        q = self._embedding(query)
        scope = self._scope(query)
        ranked = rank_scope(scope, self.index_.graph, self.index_.store, None, self.min_year, self.min_citations)
        es = self.index_.vectors.score_ids(q, [r.chunk_id for r in ranked]) if ranked else {}
        fused = hybrid_scores(es, ranked)
        flags = {"disconnected": scope.disconnected, "path": list(scope.path)}
        return RetrievalResult(self.method, self._hits(list(fused.items())[: self.k]), flags)


RETRIEVERS = {"es": ESRetriever, "kg": KGRetriever, "hybrid": HybridRetriever}


def retrieve(
    index: CorpusIndex,
    method: str,
    query: Query,
    k: int,
    min_year: int | None = None,
    min_citations: int | None = None,
) -> RetrievalResult:
    if method not in RETRIEVERS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return RETRIEVERS[method](k=k, min_year=min_year, min_citations=min_citations).fit(index).retrieve(query)
