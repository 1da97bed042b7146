"""Knowledge-graph and embedding-similarity retrieval over annotated corpora."""

from .clustering import DeterministicKMeans, cluster_coverage, fit_kmeans
from .corpus import CorpusStore, ingest_corpus, split_sentences
from .graph import KnowledgeGraph, build_graph
from .index import CorpusIndex
from .prioritizer import pareto_front, rank_scope
from .retriever import ESRetriever, HybridRetriever, KGRetriever, Query, hybrid_scores, retrieve
from .vectors import VectorIndex, cosine_similarity, load_embeddings

__all__ = [
    "CorpusIndex",
    "CorpusStore",
    "DeterministicKMeans",
    "ESRetriever",
    "HybridRetriever",
    "KGRetriever",
    "KnowledgeGraph",
    "Query",
    "VectorIndex",
    "build_graph",
    "cluster_coverage",
    "cosine_similarity",
    "fit_kmeans",
    "hybrid_scores",
    "ingest_corpus",
    "load_embeddings",
    "pareto_front",
    "rank_scope",
    "retrieve",
    "split_sentences",
]

__version__ = "0.1.0"
