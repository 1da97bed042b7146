"""Acceptance criteria, one PASS/FAIL line each.

Each line is printed with output capture disabled, so it shows under
``pytest -v`` as well as ``pytest -m acceptance``.
"""

from __future__ import annotations

import hashlib
import json
import random
import time

import numpy as np
import pytest

from ltr.cli import main
from ltr.corpus import ingest_corpus
from ltr.evaluator import eval_run
from ltr.graph import build_graph
from ltr.index import CorpusIndex
from ltr.prioritizer import rank_scope
from ltr.retriever import Query, hybrid_scores, retrieve
from ltr.synth import SynthParams, generate
from ltr.vectors import EmbeddingMatrix, VectorIndex, write_embedding_file

from .helpers import MAPPING_FIXTURE, bare_graph, ingest_paths, mapping_store, ranked, single_node_corpus, write_corpus
from .oracles import bfs_hops, brute_top_k, chunks_mentioning, nds_layers, recount_corpus

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(request, capsys):
    """Record one criterion outcome and print a PASS/FAIL line outside capture."""

    def report(name: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[acceptance] {'PASS' if ok else 'FAIL'} {name}" + (f" :: {detail}" if detail else ""))
        assert ok, f"{name}: {detail}"

    return report


def test_vector_search_matches_exhaustive_oracle(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(20)
    values = rng.standard_normal((200, 32)).astype(np.float32)
    ids = [f"v{i:03d}" for i in range(200)]
    index = VectorIndex(EmbeddingMatrix(ids, values))
    rows = values.astype(np.float64).tolist()
    mismatches = 0
    for _ in range(50):
        q = rng.standard_normal(32)
        for k in (1, 10, 200):
            if [s.chunk_id for s in index.top_k(q, k)] != brute_top_k(rows, ids, q.tolist(), k):
                mismatches += 1
    elapsed = time.perf_counter() - start
    verdict("vector top-k equals exhaustive scan (50 queries x k in {1,10,200}, < 5 s)",
            mismatches == 0 and elapsed < 5.0, f"mismatches={mismatches} time={elapsed:.2f}s")


def test_pareto_passes_match_nds_oracle(verdict):
    start = time.perf_counter()
    rng = random.Random(77)
    bad = 0
    for _ in range(100):
        n = rng.randint(1, 200)
        docs = [(f"d{i:03d}", rng.randint(1990, 2024), rng.randint(0, 80)) for i in range(n)]
        store, graph, scope = single_node_corpus(docs, [rng.randint(1, 3) for _ in docs])
        passes = {}
        for r in rank_scope(scope, graph, store, k=None):
            passes.setdefault(r.score, set()).add(store.chunks[r.chunk_id].doc_id)
        if [passes[s] for s in sorted(passes)] != nds_layers({d: (y, c) for d, y, c in docs}):
            bad += 1
    elapsed = time.perf_counter() - start
    verdict("Pareto pass sets equal non-dominated sorting layers (100 pools, n <= 200, < 10 s)",
            bad == 0 and elapsed < 10.0, f"mismatched pools={bad} time={elapsed:.2f}s")


def test_bfs_hops_match_oracle(verdict):
    rng = random.Random(50)
    nodes = [f"n{i:02d}" for i in range(50)]
    edges = set()
    while len(edges) < 75:
        a, b = rng.sample(nodes, 2)
        edges.add((min(a, b), max(a, b)))
    graph = bare_graph(sorted(edges), isolated=nodes)
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    bad = 0
    for _ in range(100):
        a, b = rng.choice(nodes), rng.choice(nodes)
        path = graph.shortest_path(a, b)
        got = None if path is None else len(path) - 1
        bad += got != bfs_hops(adj, a, b)
    verdict("shortest-path hop counts equal BFS oracle (50 nodes, 100 pairs)", bad == 0, f"mismatches={bad}")


def test_mapping_rule_fixture(verdict):
    g = build_graph(mapping_store(MAPPING_FIXTURE))
    nodes = {k: n.chunk_ids for k, n in g.nodes.items()}
    edges = {k: e.chunk_ids for k, e in g.edges.items()}
    expected_nodes = {"A": {"c3", "c6", "c7"}, "B": {"c5", "c6", "c7"}, "C": {"c5", "c6", "c7"}, "D": {"c7"}, "E": set()}
    expected_edges = {("A", "B"): {"c4", "c6", "c7"}, ("C", "D"): {"c7"}, ("D", "E"): {"c8"}}
    verdict("8-chunk mapping fixture yields the hand-derived node/edge chunk sets",
            nodes == expected_nodes and edges == expected_edges, f"nodes={nodes} edges={edges}")


# -- directional reproduction on the default synthetic corpus -----------------------


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """Generate, ingest and evaluate the seed-42 corpus; time the whole pipeline."""
    root = tmp_path_factory.mktemp("accept42")
    start = time.perf_counter()
    raw = root / "raw"
    stats = generate(SynthParams(seed=42), raw)
    ingest_corpus(raw / "documents.jsonl", raw / "chunks.jsonl", raw / "annotations.jsonl",
                  raw / "embeddings.bin", raw / "ids.txt", root / "idx")
    index = CorpusIndex.load(root / "idx")
    grid = (10, 25, 50, 100, 200, 250, 500, 1000)
    report = eval_run(index, raw / "gold.jsonl", ("es", "kg", "hybrid"), grid, k_clusters=200, seed=0, out_dir=root / "eval")
    elapsed = time.perf_counter() - start
    rows = {(r.method, r.K): r for r in report.rows}
    return {"raw": raw, "index": index, "rows": rows, "elapsed": elapsed, "stats": stats, "report": report}


def test_directional_reproduction(verdict, default_run):
    rows = default_run["rows"]
    r = lambda m, k: rows[(m, k)].recall  # noqa: E731
    c = lambda m, k: rows[(m, k)].clusters_hit  # noqa: E731
    kg_vs_es = r("kg", 200) >= 1.5 * r("es", 200)
    hybrid_best = r("hybrid", 50) >= max(r("es", 50), r("kg", 50))
    spread = c("kg", 200) >= 1.5 * c("es", 200)
    fast = default_run["elapsed"] < 60.0
    detail = (
        f"recall@200 kg={r('kg', 200):.3f} es={r('es', 200):.3f}; "
        f"recall@50 hybrid={r('hybrid', 50):.3f} es={r('es', 50):.3f} kg={r('kg', 50):.3f}; "
        f"clusters@200 kg={c('kg', 200):.0f} es={c('es', 200):.0f}; time={default_run['elapsed']:.1f}s"
    )
    verdict("KG recall@200 >= 1.5x ES", kg_vs_es, detail)
    verdict("hybrid recall@50 >= max(ES, KG)", hybrid_best, detail)
    verdict("KG cluster coverage@200 >= 1.5x ES", spread, detail)
    verdict("seed-42 pipeline end-to-end < 60 s", fast, detail)


def test_crossover_and_coverage_bound(verdict, default_run):
    index = default_run["index"]
    raw = default_run["raw"]
    gold = json.loads((raw / "gold.jsonl").read_text())
    relevant = set(gold["relevant_doc_ids"])
    total = len(index.store.chunks)
    query = Query(gold["question"], tuple(gold["query_entities"]), np.asarray(gold["question_embedding"]))

    kg_all = retrieve(index, "kg", query, total)
    kg_recall_inf = len(set(kg_all.retrieved_docs) & relevant) / len(relevant)
    _, scope_docs = chunks_mentioning(raw / "chunks.jsonl", raw / "annotations.jsonl", gold["query_entities"][0])
    bound = len(scope_docs & relevant) / len(relevant)
    verdict("KG recall@inf equals the graph-coverage bound", kg_recall_inf == bound,
            f"kg@inf={kg_recall_inf} bound={bound}")

    # walk a doubling grid: KG must first lead, and ES must later catch up
    es_full = retrieve(index, "es", query, total)
    grid = sorted({min(10 * 2**i, total) for i in range(32) if 10 * 2**i < 2 * total})
    k_lead = k_star = None
    for kk in grid:
        es_r = len(set(es_full.truncate(kk).retrieved_docs) & relevant)
        kg_r = len(set(kg_all.truncate(kk).retrieved_docs) & relevant)
        if k_lead is None and kg_r > es_r:
            k_lead = kk
        elif k_lead is not None and es_r >= kg_r:
            k_star = kk
            break
    verdict("crossover: ES recall >= KG recall at some K* <= total chunks",
            k_star is not None and k_star <= total, f"KG leads from K={k_lead}; K*={k_star} total_chunks={total}")


def test_metric_sanity_suite(verdict, default_run, tmp_path):
    report = default_run["report"]
    problems = []
    series = {}
    for row in report.rows:
        series.setdefault(row.method, []).append(row)
        if not (0.0 <= row.precision <= 1.0 and 0.0 <= row.recall <= 1.0):
            problems.append(f"out of range {row}")
    for method, rows in series.items():
        rows = sorted(rows, key=lambda r: r.K)
        if any(a.recall > b.recall for a, b in zip(rows, rows[1:])):
            problems.append(f"recall decreases for {method}")
    hybrid = report.results[("q0", "hybrid")]
    if not all(0.0 <= h.score <= 1.0 for h in hybrid.ranked):
        problems.append("hybrid score outside [0, 1]")

    rng = random.Random(3)
    for _ in range(200):
        ids = [f"c{i:02d}" for i in range(rng.randint(1, 25))]
        es = {c: rng.randint(-64, 64) / 64 for c in ids}
        ranking = [ranked(c) for c in ids]
        if list(hybrid_scores(es, ranking)) != list(hybrid_scores({c: 2.0 * v + 0.5 for c, v in es.items()}, ranking)):
            problems.append("cosine rescaling not invariant under monotone transform")
            break

    for trial in range(30):
        docs = [(f"d{i}", rng.randint(2000, 2020), rng.randint(0, 40)) for i in range(rng.randint(1, 40))]
        a = rank_scope(*_scope_args(docs))
        b = rank_scope(*_scope_args([(d, y, c * 7) for d, y, c in docs]))
        if [(x.chunk_id, x.score) for x in a] != [(x.chunk_id, x.score) for x in b]:
            problems.append("citation scaling changes Pareto passes")
            break

    digests = [_cli_pipeline_digest(tmp_path / f"run{i}") for i in (0, 1)]
    if digests[0] != digests[1]:
        differing = sorted(k for k in digests[0] if digests[0][k] != digests[1].get(k))
        problems.append(f"non-deterministic outputs: {differing}")
    verdict("metric sanity suite (ranges, monotone recall, invariances, byte-identical reruns)",
            not problems, "; ".join(problems) or f"{len(digests[0])} output files identical")


def _scope_args(docs):
    store, graph, scope = single_node_corpus(docs)
    return scope, graph, store


def _cli_pipeline_digest(root):
    small = ["--dim", "16", "--n-clusters", "10", "--n-docs", "400", "--n-gold", "20", "--gold-spread", "5"]
    raw, idx = root / "raw", root / "idx"
    codes = [main(["synth", "--seed", "5", "--out", str(raw), *small])]
    codes.append(main([
        "ingest", "--docs", str(raw / "documents.jsonl"), "--chunks", str(raw / "chunks.jsonl"),
        "--annotations", str(raw / "annotations.jsonl"), "--embeddings", str(raw / "embeddings.bin"),
        "--ids", str(raw / "ids.txt"), "--out", str(idx),
    ]))
    for method in ("es", "kg", "hybrid"):
        gold = json.loads((raw / "gold.jsonl").read_text())
        qemb = root / "q.bin"
        write_embedding_file(qemb, np.asarray([gold["question_embedding"]]))
        codes.append(main([
            "query", "--index", str(idx), "--method", method, "--k", "30", "--question", gold["question"],
            "--lexicon", str(raw / "lexicon.tsv"), "--question-embedding", str(qemb),
            "--format", "csv", "--out", str(root / f"{method}.csv"),
        ]))
    codes.append(main(["eval", "--index", str(idx), "--gold", str(raw / "gold.jsonl"), "--k-grid", "10,50",
                       "--clusters", "12", "--out", str(root / "eval")]))
    assert codes == [0] * len(codes)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


# -- corpus statistics fixture --------------------------------------------------------

ASTHMA = "MESH:D001249"


def _asthma_fixture(root):
    """Corpus shaped like the asthma 1-hop neighbourhood: 1278 docs, 3670 mapped chunks.

    1114 in-scope docs carry three asthma chunks and 164 carry two
    (1114 * 3 + 164 * 2 = 3670). Asthma appears alone, in labelled pairs
    (edge chunks) and in unlabelled pairs (node chunks). Every in-scope doc
    also has one unannotated chunk, and 300 outside docs mention genes only.
    """
    rng = random.Random(1249)
    docs, chunks, anns = [], [], []
    genes = [f"HGNC:G{i:03d}" for i in range(40)]

    def add_chunk(doc_id, pos, entities, relations):
        text = " ".join(s for _, _, s in entities) + " text."
        cid = f"{doc_id}:{pos}"
        chunks.append({"chunk_id": cid, "doc_id": doc_id, "position": pos, "text": text})
        if entities:
            spans, offset = [], 0
            for eid, etype, surface in entities:
                spans.append({"id": eid, "type": etype, "span": [offset, offset + len(surface)], "text": surface})
                offset += len(surface) + 1
            anns.append({"chunk_id": cid, "entities": spans, "relations": relations})

    for d in range(1278):
        doc_id = f"A{d:04d}"
        docs.append({"doc_id": doc_id, "title": "t", "abstract": "a", "year": rng.randint(1990, 2023),
                     "citations": rng.randint(0, 500)})
        n_mapped = 3 if d < 1114 else 2
        for pos in range(n_mapped):
            kind = rng.randrange(3)
            gene = rng.choice(genes)
            if kind == 0:
                add_chunk(doc_id, pos, [(ASTHMA, "disease", "asthma")], [])
            elif kind == 1:
                add_chunk(doc_id, pos, [(gene, "gene", "gx"), (ASTHMA, "disease", "asthma")],
                          [{"head": gene, "tail": ASTHMA, "type": "association"}])
            else:
                add_chunk(doc_id, pos, [(ASTHMA, "disease", "asthma"), (gene, "gene", "gx")], [])
        add_chunk(doc_id, n_mapped, [], [])
    for d in range(300):
        doc_id = f"B{d:04d}"
        docs.append({"doc_id": doc_id, "title": "t", "abstract": "a", "year": 2010, "citations": 1})
        g1, g2 = rng.sample(genes, 2)
        add_chunk(doc_id, 0, [(g1, "gene", "gx"), (g2, "gene", "gy")], [{"head": g1, "tail": g2, "type": "bind"}])
    return write_corpus(root, docs, chunks, anns, dim=8, seed=4)


def test_corpus_statistics_fixture(verdict, tmp_path):
    paths = _asthma_fixture(tmp_path / "raw")
    summary = ingest_paths(paths, tmp_path / "idx").to_dict()
    recount = recount_corpus(paths["docs"], paths["chunks"], paths["annotations"])
    summary_ok = {k: summary[k] for k in recount} == recount
    verdict("asthma-shaped fixture: ingest summary equals independent recount", summary_ok,
            f"summary={ {k: summary[k] for k in recount} } recount={recount}")

    index = CorpusIndex.load(tmp_path / "idx")
    graph = index.graph
    scope = graph.scope_for_entities([ASTHMA])
    scope_chunks = set()
    for el in scope.elements:
        scope_chunks |= graph.nodes[el.key].chunk_ids if el.kind == "node" else graph.edges[el.key].chunk_ids
    scope_docs = {index.store.chunks[c].doc_id for c in scope_chunks}
    oracle_chunks, oracle_docs = chunks_mentioning(paths["chunks"], paths["annotations"], ASTHMA)
    ok = (len(scope_docs), len(scope_chunks)) == (1278, 3670) and scope_chunks == oracle_chunks and scope_docs == oracle_docs
    verdict("asthma 1-hop scope holds 1278 documents and 3670 chunks", ok,
            f"docs={len(scope_docs)} chunks={len(scope_chunks)} oracle=({len(oracle_docs)}, {len(oracle_chunks)})")
