from __future__ import annotations

import pytest

from ltr.corpus import ingest_corpus
from ltr.index import CorpusIndex
from ltr.synth import SynthParams, generate

from .helpers import ent, ingest_paths, write_corpus, write_jsonl


@pytest.fixture
def toy_corpus(tmp_path):
    """Six documents, one disease D1 with gene neighbours, 2-d embeddings."""
    docs = [
        {"doc_id": "d1", "title": "t1", "abstract": "a", "year": 2020, "citations": 10},
        {"doc_id": "d2", "title": "t2", "abstract": "a", "year": 2018, "citations": 50},
        {"doc_id": "d3", "title": "t3", "abstract": "a", "year": 2019, "citations": 5},
        {"doc_id": "d4", "title": "t4", "abstract": "a", "year": 2015, "citations": 1},
        {"doc_id": "d5", "title": "t5", "abstract": "a", "year": 2022, "citations": 0},
        {"doc_id": "d6", "title": "t6", "abstract": "a", "year": 2010, "citations": 3},
    ]
    texts = {
        "d1:0": "D1 is common.",
        "d1:1": "G1 binds D1 strongly.",
        "d2:0": "D1 and G2 were studied.",
        "d2:1": "Nothing here.",
        "d3:0": "D1 appears again.",
        "d4:0": "G1 alone.",
        "d5:0": "G3 inhibits D1.",
        "d6:0": "Unrelated text.",
    }
    chunks = [
        {"chunk_id": cid, "doc_id": cid.split(":")[0], "position": int(cid.split(":")[1]), "text": t}
        for cid, t in texts.items()
    ]
    annotations = [
        {"chunk_id": "d1:0", "entities": [ent("D1", "disease", texts["d1:0"], "D1")], "relations": []},
        {
            "chunk_id": "d1:1",
            "entities": [ent("G1", "gene", texts["d1:1"], "G1"), ent("D1", "disease", texts["d1:1"], "D1")],
            "relations": [{"head": "G1", "tail": "D1", "type": "bind"}],
        },
        {
            "chunk_id": "d2:0",
            "entities": [ent("D1", "disease", texts["d2:0"], "D1"), ent("G2", "gene", texts["d2:0"], "G2")],
            "relations": [],
        },
        {"chunk_id": "d3:0", "entities": [ent("D1", "disease", texts["d3:0"], "D1")], "relations": []},
        {"chunk_id": "d4:0", "entities": [ent("G1", "gene", texts["d4:0"], "G1")], "relations": []},
        {
            "chunk_id": "d5:0",
            "entities": [ent("G3", "gene", texts["d5:0"], "G3"), ent("D1", "disease", texts["d5:0"], "D1")],
            "relations": [{"head": "G3", "tail": "D1", "type": "negative_correlation"}],
        },
    ]
    vectors = {
        "d1:0": [1.0, 0.0],
        "d1:1": [0.9, 0.1],
        "d2:0": [0.5, 0.5],
        "d2:1": [0.0, 1.0],
        "d3:0": [0.8, -0.2],
        "d4:0": [-1.0, 0.2],
        "d5:0": [0.2, 0.9],
        "d6:0": [-0.5, -0.5],
    }
    paths = write_corpus(tmp_path / "raw", docs, chunks, annotations, vectors, dim=2)
    gold = {
        "question_id": "q1",
        "question": "What are the known drug targets for treating D1?",
        "query_entities": ["D1"],
        "relevant_doc_ids": ["d1", "d5", "d9"],
        "question_embedding": [1.0, 0.0],
    }
    paths["gold"] = write_jsonl(tmp_path / "raw" / "gold.jsonl", [gold])
    ingest_paths(paths, tmp_path / "idx")
    return {"paths": paths, "index_dir": tmp_path / "idx", "index": CorpusIndex.load(tmp_path / "idx")}


@pytest.fixture(scope="session")
def synth_default(tmp_path_factory):
    """Default synthetic corpus (seed 42), ingested."""
    root = tmp_path_factory.mktemp("synth42")
    stats = generate(SynthParams(seed=42), root / "raw")
    raw = root / "raw"
    ingest_corpus(
        raw / "documents.jsonl", raw / "chunks.jsonl", raw / "annotations.jsonl",
        raw / "embeddings.bin", raw / "ids.txt", root / "idx",
    )
    return {"raw": raw, "index_dir": root / "idx", "index": CorpusIndex.load(root / "idx"), "stats": stats}
