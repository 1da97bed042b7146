from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ltr.corpus import ChunkAnnotations, Chunk, CorpusStore, Document, EntityAnnotation, RelationAnnotation, ingest_corpus
from ltr.graph import KgEdge, KgNode, KnowledgeGraph, build_graph, edge_key
from ltr.prioritizer import RankedChunk
from ltr.vectors import write_embedding_file


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def write_corpus(root: Path, docs, chunks, annotations, vectors: dict[str, list[float]] | None = None, dim=4, seed=0):
    """Write a corpus file set; missing vectors are random."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = [c["chunk_id"] for c in chunks]
    vectors = vectors or {}
    rows = np.array([vectors.get(i, rng.standard_normal(dim) + 0.1) for i in ids], dtype=np.float32)
    paths = {
        "docs": write_jsonl(root / "documents.jsonl", docs),
        "chunks": write_jsonl(root / "chunks.jsonl", chunks),
        "annotations": write_jsonl(root / "annotations.jsonl", annotations),
        "embeddings": root / "embeddings.bin",
        "ids": root / "ids.txt",
    }
    write_embedding_file(paths["embeddings"], rows)
    paths["ids"].write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
    return paths


def ingest_paths(paths, out: Path):
    return ingest_corpus(paths["docs"], paths["chunks"], paths["annotations"], paths["embeddings"], paths["ids"], out)


def ent(eid, etype, text, surface):
    start = text.index(surface)
    return {"id": eid, "type": etype, "span": [start, start + len(surface)], "text": surface}


# -- graph fixtures ------------------------------------------------------------------

TYPES = {"A": "gene", "B": "disease", "C": "chemical", "D": "gene", "E": "chemical"}

MAPPING_FIXTURE = {
    "c1": ([], []),                                          # annotated but no entity
    "c2": None,                                              # no annotation record
    "c3": (["A"], []),                                       # single entity
    "c4": (["A", "B"], [("A", "B")]),                        # labelled pair
    "c5": (["B", "C"], []),                                  # unlabelled pair
    "c6": (["A", "B", "C"], [("A", "B")]),                   # 3 entities
    "c7": (["A", "B", "C", "D"], [("A", "B"), ("D", "C")]),  # 4 entities, two labels
    "c8": (["D", "E", "D"], [("E", "D")]),                   # repeated mention
}


def mapping_store(layout):
    """layout: chunk_id -> (entity ids, relation pairs) or None for no annotation record."""
    docs = [Document("doc", "t", "a", 2020, 1)]
    chunks, anns = [], []
    for pos, (cid, content) in enumerate(layout.items()):
        chunks.append(Chunk(cid, "doc", pos, "x" * 40))
        if content is None:
            continue
        ents, rels = content
        anns.append(
            ChunkAnnotations(
                cid,
                tuple(EntityAnnotation(e, TYPES[e], i, i + 1, e) for i, e in enumerate(ents)),
                tuple(RelationAnnotation(h, t, "association") for h, t in rels),
            )
        )
    return CorpusStore.from_records(docs, chunks, anns)


def bare_graph(edges, isolated=()):
    """Graph with the given undirected edges, one dummy chunk per edge."""
    nodes = {n: KgNode(n, "gene") for e in edges for n in e}
    nodes.update({n: KgNode(n, "gene") for n in isolated})
    return KnowledgeGraph(nodes, {edge_key(a, b): KgEdge(*edge_key(a, b), {"association"}, {f"{a}-{b}"}) for a, b in edges})


def single_node_corpus(docs, chunks_per_doc=None, entity="D1"):
    """docs: list of (doc_id, year, citations); every chunk mentions only ``entity``."""
    documents, chunks, anns = [], [], []
    for i, (d, y, c) in enumerate(docs):
        documents.append(Document(d, "t", "a", y, c))
        n = 1 if chunks_per_doc is None else chunks_per_doc[i]
        for pos in range(n):
            cid = f"{d}:{pos}"
            chunks.append(Chunk(cid, d, pos, "D1 text"))
            anns.append(ChunkAnnotations(cid, (EntityAnnotation(entity, "disease", 0, 2, "D1"),), ()))
    store = CorpusStore.from_records(documents, chunks, anns)
    graph = build_graph(store)
    return store, graph, graph.scope_for_entities([entity])


def ranked(cid):
    return RankedChunk(cid, 1, "n", ())
