"""Read-only bundle of everything an ingested index directory holds."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import EMBEDDINGS_FILE, IDS_FILE, CorpusStore
from .exceptions import CorpusValidationError
from .graph import KnowledgeGraph, build_graph
from .vectors import EmbeddingMatrix, VectorIndex, load_embeddings


@dataclass
class CorpusIndex:
    store: CorpusStore
    vectors: VectorIndex
    graph: KnowledgeGraph
    _row_docs: list = field(default=None, repr=False)

    @classmethod
    def from_parts(cls, store: CorpusStore, matrix: EmbeddingMatrix) -> CorpusIndex:
        missing = [cid for cid in matrix.ids if cid not in store.chunks]
        if missing:
            raise CorpusValidationError(f"embedding id {missing[0]!r} does not resolve to a chunk")
        return cls(store, VectorIndex(matrix), build_graph(store))

    @classmethod
    def load(cls, index_dir: str | Path) -> CorpusIndex:
        index_dir = Path(index_dir)
        store = CorpusStore.load(index_dir)
        matrix = load_embeddings(index_dir / EMBEDDINGS_FILE, index_dir / IDS_FILE)
        return cls.from_parts(store, matrix)

    def row_mask(self, min_year: int | None = None, min_citations: int | None = None) -> np.ndarray | None:
        """Boolean mask over embedding rows passing the document filters."""
        if min_year is None and min_citations is None:
            return None
        if self._row_docs is None:
            self._row_docs = [self.store.doc_of(cid) for cid in self.vectors.matrix.ids]
        return np.fromiter(
            (
                (min_year is None or d.year >= min_year) and (min_citations is None or d.citations >= min_citations)
                for d in self._row_docs
            ),
            dtype=bool,
            count=len(self._row_docs),
        )
