"""Deterministic synthetic corpus with an over-represented topic near the question.

Construction, in order:

1. ``n_clusters`` topic centres drawn uniformly on the unit sphere. Documents
   are split over topics with Zipf(``skew``) sizes; topic 0 is the largest.
2. Every topic is themed with 1-3 entities (its first theme entity is unique
   to it). Chunks mention theme entities independently; co-occurring pairs are
   relation-labelled with probability ``p_relation``.
3. The question entity (disease 0) is mentioned often inside topic 0 and
   rarely elsewhere.
4. Gold documents are planted in ``gold_spread`` topics, topic 0 included
   but holding at most a quarter of them. Each gold document gets one chunk
   that relation-links the question entity to its topic's first theme entity,
   and a few non-gold documents of the same topics get such a chunk too.
5. Chunk embeddings are ``centre + N(0, noise^2)``. The gold relation chunks
   additionally get ``topic_pull`` times the unit question direction. The
   question itself sits inside topic 0.

Same parameters give byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import RELATION_TYPES
from .vectors import write_embedding_file

QUESTION_TEMPLATE = "What are the known drug targets for treating {}?"


@dataclass(frozen=True)
class SynthParams:
    seed: int = 42
    dim: int = 64
    n_clusters: int = 40
    n_docs: int = 5000
    min_chunks: int = 3
    max_chunks: int = 10
    skew: float = 1.2
    n_gold: int = 40
    gold_spread: int = 12
    n_genes: int = 30
    n_diseases: int = 10
    n_chemicals: int = 20
    noise: float = 0.15
    topic_pull: float = 0.6
    p_mention: float = 0.3
    p_relation: float = 0.5
    question_rate_dominant: float = 0.05
    question_rate_background: float = 0.005
    distractors_per_gold_cluster: int = 2
    max_dominant_gold_fraction: float = 0.25

    def validate(self) -> None:
        errors = []
        if self.dim < 1 or self.n_clusters < 1 or self.n_docs < 1:
            errors.append("dim, n_clusters and n_docs must be positive")
        if not 1 <= self.min_chunks <= self.max_chunks:
            errors.append("need 1 <= min_chunks <= max_chunks")
        if self.gold_spread > self.n_clusters:
            errors.append(f"gold_spread={self.gold_spread} exceeds n_clusters={self.n_clusters}")
        if self.n_gold > self.n_docs:
            errors.append(f"n_gold={self.n_gold} exceeds n_docs={self.n_docs}")
        if self.n_gold < self.gold_spread or self.gold_spread < 1:
            errors.append("need 1 <= gold_spread <= n_gold")
        if self.n_diseases < 1:
            errors.append("need at least one disease for the question entity")
        if self.n_genes + self.n_chemicals + self.n_diseases - 1 < self.n_clusters:
            errors.append("entity pool too small to give every topic its own theme entity")
        if self.skew < 0 or self.noise < 0 or self.topic_pull < 0:
            errors.append("skew, noise and topic_pull must be non-negative")
        for name in ("p_mention", "p_relation", "question_rate_dominant", "question_rate_background",
                     "max_dominant_gold_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                errors.append(f"{name} must lie in [0, 1]")
        if errors:
            raise ValueError("infeasible synthetic corpus parameters: " + "; ".join(errors))


@dataclass(frozen=True)
class _Entity:
    entity_id: str
    entity_type: str
    surface: str


def _entities(p: SynthParams) -> list[_Entity]:
    out = [_Entity(f"SYN:D{i:03d}", "disease", f"dis{i:02d} disease") for i in range(p.n_diseases)]
    out += [_Entity(f"SYN:G{i:03d}", "gene", f"gn{i:02d}") for i in range(p.n_genes)]
    out += [_Entity(f"SYN:C{i:03d}", "chemical", f"chem{i:02d}") for i in range(p.n_chemicals)]
    return out


def _allocate(total: int, weights: np.ndarray, minimum: int = 1) -> np.ndarray:
    """Largest-remainder split of ``total`` proportional to ``weights``, each part >= minimum."""
    base = np.full(len(weights), minimum, dtype=np.int64)
    rest = total - base.sum()
    if rest < 0:
        raise ValueError("infeasible synthetic corpus parameters: too few documents for the topics")
    share = weights / weights.sum() * rest
    counts = np.floor(share).astype(np.int64)
    remainder = share - counts
    for i in np.argsort(-remainder, kind="stable")[: rest - counts.sum()]:
        counts[i] += 1
    return base + counts


def _sentence(ents: list[_Entity], relation: str | None, tag: str) -> tuple[str, list[dict]]:
    """Templated sentence mentioning ``ents`` and the annotation spans for them."""
    if not ents:
        return f"Background observation {tag} was recorded in this cohort.", []
    if relation is not None and len(ents) == 2:
        parts = ["In experiment ", tag, ", ", ents[0], f" showed {relation.replace('_', ' ')} with ", ents[1], "."]
    else:
        parts = ["In sample ", tag, ", "]
        for i, e in enumerate(ents):
            if i:
                parts.append(" and " if i == len(ents) - 1 else ", ")
            parts.append(e)
        parts.append(" were measured.")
    text, spans = "", []
    for part in parts:
        if isinstance(part, _Entity):
            spans.append({"id": part.entity_id, "type": part.entity_type, "span": [len(text), len(text) + len(part.surface)], "text": part.surface})
            text += part.surface
        else:
            text += part
    return text, spans


def _line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False) + "\n"


def generate(params: SynthParams, out_dir: str | Path) -> dict:
    """Write the synthetic corpus file set into ``out_dir``; return generation stats."""
    p = params
    p.validate()
    rng = np.random.default_rng(p.seed)
    entities = _entities(p)
    question_entity = entities[0]
    others = entities[1:]

    centers = rng.standard_normal((p.n_clusters, p.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)

    weights = np.arange(1, p.n_clusters + 1, dtype=np.float64) ** -p.skew
    docs_per_cluster = _allocate(p.n_docs, weights)
    doc_cluster = rng.permutation(np.repeat(np.arange(p.n_clusters), docs_per_cluster))

    primary = rng.permutation(len(others))[: p.n_clusters]
    themes = []
    for c in range(p.n_clusters):
        extra = rng.choice(len(others), size=int(rng.integers(0, 3)), replace=False)
        theme = list(dict.fromkeys([int(primary[c]), *map(int, extra)]))
        themes.append([others[i] for i in theme])

    # gold topics: topic 0 plus gold_spread - 1 others able to host their share
    n_dom = min(int(np.floor(p.max_dominant_gold_fraction * p.n_gold)), p.n_gold - (p.gold_spread - 1))
    if p.gold_spread == 1:
        n_dom = p.n_gold
    n_rest = p.n_gold - n_dom
    need = -(-n_rest // max(p.gold_spread - 1, 1)) + p.distractors_per_gold_cluster
    eligible = [c for c in range(1, p.n_clusters) if docs_per_cluster[c] >= need]
    if len(eligible) < p.gold_spread - 1:
        raise ValueError("infeasible synthetic corpus parameters: too few topics large enough for gold documents")
    gold_topics = [0, *sorted(int(c) for c in rng.choice(eligible, size=p.gold_spread - 1, replace=False))]
    per_topic = [n_dom] + list(_allocate(n_rest, np.ones(p.gold_spread - 1), 1)) if p.gold_spread > 1 else [n_dom]

    docs_in = [np.flatnonzero(doc_cluster == c) for c in range(p.n_clusters)]
    gold_docs: set[int] = set()
    linked_docs: dict[int, bool] = {}  # doc -> is gold
    for c, n in zip(gold_topics, per_topic):
        picks = rng.choice(docs_in[c], size=int(n) + p.distractors_per_gold_cluster, replace=False)
        for d in sorted(int(x) for x in picks):
            linked_docs[d] = False
        chosen_gold = rng.choice(picks, size=int(n), replace=False)
        for d in chosen_gold:
            gold_docs.add(int(d))
            linked_docs[int(d)] = True

    question_vec = centers[0] + rng.normal(0.0, p.noise, p.dim)
    q_dir = question_vec / np.linalg.norm(question_vec)

    width = len(str(p.n_docs - 1))
    doc_lines, chunk_lines, ann_lines, ids, rows = [], [], [], [], []
    n_chunks_total = 0
    for d in range(p.n_docs):
        c = int(doc_cluster[d])
        doc_id = f"doc{d:0{width}d}"
        n_chunks = int(rng.integers(p.min_chunks, p.max_chunks + 1))
        link_pos = int(rng.integers(0, n_chunks)) if d in linked_docs else -1
        q_rate = p.question_rate_dominant if c == 0 else p.question_rate_background
        texts = []
        for pos in range(n_chunks):
            chunk_id = f"{doc_id}:{pos}"
            tag = f"{d}.{pos}"
            relations = []
            vec = centers[c] + rng.normal(0.0, p.noise, p.dim)
            if pos == link_pos:
                ents = [question_entity, themes[c][0]]
                rtype = RELATION_TYPES[int(rng.integers(0, len(RELATION_TYPES)))]
                relations.append((0, 1, rtype))
                text, spans = _sentence(ents, rtype, tag)
                if linked_docs[d]:
                    vec = vec + p.topic_pull * q_dir
            else:
                ents = [e for e in themes[c] if rng.random() < p.p_mention]
                if rng.random() < q_rate:
                    ents = [question_entity, *ents]
                for i in range(len(ents)):
                    for j in range(i + 1, len(ents)):
                        if rng.random() < p.p_relation:
                            relations.append((i, j, RELATION_TYPES[int(rng.integers(0, len(RELATION_TYPES)))]))
                single = relations[0][2] if len(relations) == 1 and len(ents) == 2 else None
                text, spans = _sentence(ents, single, tag)
            texts.append(text)
            chunk_lines.append(_line({"chunk_id": chunk_id, "doc_id": doc_id, "position": pos, "text": text}))
            if spans:
                ann_lines.append(_line({
                    "chunk_id": chunk_id,
                    "entities": spans,
                    "relations": [{"head": ents[i].entity_id, "tail": ents[j].entity_id, "type": t} for i, j, t in relations],
                }))
            ids.append(chunk_id)
            rows.append(vec)
        n_chunks_total += n_chunks
        year = int(rng.integers(2000, 2025))
        citations = int(np.floor(rng.lognormal(2.0, 1.2)))
        doc_lines.append(_line({
            "doc_id": doc_id,
            "title": f"Study {d} on topic {c}",
            "abstract": " ".join(texts),
            "year": year,
            "citations": citations,
        }))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "documents.jsonl").write_text("".join(doc_lines), encoding="utf-8")
    (out / "chunks.jsonl").write_text("".join(chunk_lines), encoding="utf-8")
    (out / "annotations.jsonl").write_text("".join(ann_lines), encoding="utf-8")
    write_embedding_file(out / "embeddings.bin", np.asarray(rows, dtype=np.float32))
    (out / "ids.txt").write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
    gold = {
        "question_id": "q0",
        "question": QUESTION_TEMPLATE.format(question_entity.surface),
        "query_entities": [question_entity.entity_id],
        "relevant_doc_ids": [f"doc{d:0{width}d}" for d in sorted(gold_docs)],
        "question_embedding": [float(v) for v in question_vec.astype(np.float32)],
    }
    (out / "gold.jsonl").write_text(_line(gold), encoding="utf-8")
    (out / "lexicon.tsv").write_text(
        "".join(f"{e.entity_id}\t{e.entity_type}\t{e.surface}\n" for e in entities), encoding="utf-8"
    )
    (out / "params.json").write_text(json.dumps(asdict(p), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {
        "documents": p.n_docs,
        "chunks": n_chunks_total,
        "gold_docs": len(gold_docs),
        "gold_topics": gold_topics,
        "docs_per_cluster": docs_per_cluster.tolist(),
        "question_entity": question_entity.entity_id,
        "centers": centers,
        "question_vector": question_vec,
    }
