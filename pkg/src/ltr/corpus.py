"""Corpus parsing, validation and the persisted canonical store.

Everything downstream keys on the identifiers established here: ``doc_id`` for
articles and ``chunk_id`` for sentences. Annotations arrive already
normalized, one canonical ``entity_id`` per real-world entity.
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .exceptions import CorpusValidationError

logger = logging.getLogger(__name__)

ENTITY_TYPES = ("gene", "disease", "chemical")
RELATION_TYPES = (
    "association",
    "positive_correlation",
    "negative_correlation",
    "cotreatment",
    "comparison",
    "bind",
)
INDEX_HEADER = b"LTRIDX1\n"
MIN_YEAR, MAX_YEAR = 1500, 2100

DOCUMENTS_FILE = "documents.bin"
CHUNKS_FILE = "chunks.bin"
ANNOTATIONS_FILE = "annotations.bin"
EMBEDDINGS_FILE = "embeddings.bin"
IDS_FILE = "ids.txt"
GRAPH_FILE = "graph.json"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str
    year: int
    citations: int


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    position: int
    text: str


@dataclass(frozen=True)
class EntityAnnotation:
    entity_id: str
    entity_type: str
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class RelationAnnotation:
    head_id: str
    tail_id: str
    relation_type: str


@dataclass(frozen=True)
class ChunkAnnotations:
    chunk_id: str
    entities: tuple[EntityAnnotation, ...] = ()
    relations: tuple[RelationAnnotation, ...] = ()

    @property
    def entity_ids(self) -> tuple[str, ...]:
        """Distinct entity ids in order of first mention."""
        return tuple(dict.fromkeys(e.entity_id for e in self.entities))


@dataclass(frozen=True)
class GoldStandard:
    question_id: str
    question: str
    query_entity_ids: tuple[str, ...]
    relevant_doc_ids: frozenset[str]
    question_embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class IngestSummary:
    documents: int
    chunks: int
    annotated_chunks: int
    entities: int
    relations: int
    entity_mentions: int = 0
    unmapped_chunks: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# sentence splitting


def split_sentences(text: str) -> list[str]:
    """Split ``text`` after '.', '?' or '!' when the next non-space char is uppercase.

    A rule-based fallback for corpora supplied without pre-split chunks.
    Abbreviations followed by a lowercase word or a digit do not split.
    """
    sentences: list[str] = []
    start = 0
    n = len(text)
    i = 0
    while i < n:
        if text[i] in ".?!":
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            if j == n or (j > i + 1 and text[j].isupper()):
                piece = text[start : i + 1].strip()
                if piece:
                    sentences.append(piece)
                start = j
                i = j
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# ---------------------------------------------------------------------------
# JSONL parsing


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, record)`` for each non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusValidationError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def _field(record: dict, key: str, kind, where: str):
    if key not in record:
        raise CorpusValidationError(f"{where}: missing field {key!r}")
    value = record[key]
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise CorpusValidationError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def parse_document(record: dict, where: str = "document") -> Document:
    doc = Document(
        doc_id=_field(record, "doc_id", str, where),
        title=_field(record, "title", str, where),
        abstract=_field(record, "abstract", str, where),
        year=_field(record, "year", int, where),
        citations=_field(record, "citations", int, where),
    )
    if not MIN_YEAR <= doc.year <= MAX_YEAR:
        raise CorpusValidationError(f"{where}: year {doc.year} outside [{MIN_YEAR}, {MAX_YEAR}]")
    if doc.citations < 0:
        raise CorpusValidationError(f"{where}: negative citations for {doc.doc_id!r}")
    return doc


def parse_chunk(record: dict, where: str = "chunk") -> Chunk:
    chunk = Chunk(
        chunk_id=_field(record, "chunk_id", str, where),
        doc_id=_field(record, "doc_id", str, where),
        position=_field(record, "position", int, where),
        text=_field(record, "text", str, where),
    )
    if chunk.position < 0:
        raise CorpusValidationError(f"{where}: negative position for {chunk.chunk_id!r}")
    return chunk


def parse_annotations(record: dict, where: str = "annotation") -> ChunkAnnotations:
    chunk_id = _field(record, "chunk_id", str, where)
    entities = []
    for raw in record.get("entities", []):
        span = raw.get("span")
        if (
            not isinstance(span, list)
            or len(span) != 2
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in span)
        ):
            raise CorpusValidationError(f"{where}: entity span must be [int, int]")
        etype = _field(raw, "type", str, where)
        if etype not in ENTITY_TYPES:
            raise CorpusValidationError(f"{where}: entity type {etype!r} not in {ENTITY_TYPES}")
        entities.append(
            EntityAnnotation(
                entity_id=_field(raw, "id", str, where),
                entity_type=etype,
                start=span[0],
                end=span[1],
                surface=_field(raw, "text", str, where),
            )
        )
    relations = []
    for raw in record.get("relations", []):
        rtype = _field(raw, "type", str, where)
        if rtype not in RELATION_TYPES:
            raise CorpusValidationError(f"{where}: relation type {rtype!r} not in {RELATION_TYPES}")
        rel = RelationAnnotation(_field(raw, "head", str, where), _field(raw, "tail", str, where), rtype)
        if rel not in relations:
            relations.append(rel)
    return ChunkAnnotations(chunk_id, tuple(entities), tuple(relations))


def parse_gold(record: dict, where: str = "gold") -> GoldStandard:
    emb = record.get("question_embedding")
    if emb is not None:
        if not isinstance(emb, list) or not all(isinstance(v, (int, float)) for v in emb):
            raise CorpusValidationError(f"{where}: question_embedding must be a list of numbers")
        emb = tuple(float(v) for v in emb)
    relevant = _field(record, "relevant_doc_ids", list, where)
    if not relevant:
        raise CorpusValidationError(f"{where}: relevant_doc_ids is empty")
    return GoldStandard(
        question_id=_field(record, "question_id", str, where),
        question=_field(record, "question", str, where),
        query_entity_ids=tuple(_field(record, "query_entities", list, where)),
        relevant_doc_ids=frozenset(relevant),
        question_embedding=emb,
    )


def load_gold(path: str | Path, store: CorpusStore | None = None) -> tuple[list[GoldStandard], int]:
    """Read a gold file. Returns the questions and the count of relevant ids outside ``store``."""
    questions = [parse_gold(rec, f"{path}:{lineno}") for lineno, rec in read_jsonl(path)]
    outside = 0
    if store is not None:
        for q in questions:
            outside += sum(1 for d in q.relevant_doc_ids if d not in store.documents)
        if outside:
            logger.warning("%d gold document ids are outside the corpus", outside)
    return questions, outside


# ---------------------------------------------------------------------------
# store


def _canonical_line(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def _annotation_record(ann: ChunkAnnotations) -> dict:
    return {
        "chunk_id": ann.chunk_id,
        "entities": [
            {"id": e.entity_id, "type": e.entity_type, "span": [e.start, e.end], "text": e.surface}
            for e in ann.entities
        ],
        "relations": [{"head": r.head_id, "tail": r.tail_id, "type": r.relation_type} for r in ann.relations],
    }


@dataclass
class CorpusStore:
    """In-memory documents, chunks and annotations keyed by identifier.

    ``chunks`` iterates in (doc_id, position) order and ``annotations`` only
    holds chunks that had an annotation record.
    """

    documents: dict[str, Document] = field(default_factory=dict)
    chunks: dict[str, Chunk] = field(default_factory=dict)
    annotations: dict[str, ChunkAnnotations] = field(default_factory=dict)

    @classmethod
    def from_records(
        cls,
        documents: Iterable[Document],
        chunks: Iterable[Chunk],
        annotations: Iterable[ChunkAnnotations] = (),
    ) -> CorpusStore:
        docs: dict[str, Document] = {}
        for d in documents:
            if d.doc_id in docs:
                raise CorpusValidationError(f"duplicate doc_id {d.doc_id!r}")
            docs[d.doc_id] = d
        chs: dict[str, Chunk] = {}
        seen_pos: set[tuple[str, int]] = set()
        for c in chunks:
            if c.chunk_id in chs:
                raise CorpusValidationError(f"duplicate chunk_id {c.chunk_id!r}")
            if c.doc_id not in docs:
                raise CorpusValidationError(f"chunk {c.chunk_id!r} references unknown doc_id {c.doc_id!r}")
            if (c.doc_id, c.position) in seen_pos:
                raise CorpusValidationError(f"duplicate position {c.position} in document {c.doc_id!r}")
            seen_pos.add((c.doc_id, c.position))
            chs[c.chunk_id] = c
        anns: dict[str, ChunkAnnotations] = {}
        for a in annotations:
            if a.chunk_id not in chs:
                raise CorpusValidationError(f"annotation references unknown chunk_id {a.chunk_id!r}")
            if a.chunk_id in anns:
                raise CorpusValidationError(f"duplicate annotation record for chunk_id {a.chunk_id!r}")
            anns[a.chunk_id] = a
        store = cls(
            documents={k: docs[k] for k in sorted(docs)},
            chunks={c.chunk_id: c for c in sorted(chs.values(), key=lambda c: (c.doc_id, c.position, c.chunk_id))},
            annotations={k: anns[k] for k in sorted(anns)},
        )
        store.validate_annotations()
        return store

    def validate_annotations(self) -> None:
        """Check spans, relation endpoints and per-entity type consistency."""
        bad_relations = []
        entity_types: dict[str, str] = {}
        for ann in self.annotations.values():
            text = self.chunks[ann.chunk_id].text
            ids = set()
            for e in ann.entities:
                if not 0 <= e.start < e.end <= len(text):
                    raise CorpusValidationError(
                        f"chunk {ann.chunk_id!r}: span [{e.start}, {e.end}) outside text of length {len(text)}"
                    )
                known = entity_types.setdefault(e.entity_id, e.entity_type)
                if known != e.entity_type:
                    raise CorpusValidationError(
                        f"entity {e.entity_id!r} annotated as both {known!r} and {e.entity_type!r}"
                    )
                ids.add(e.entity_id)
            for r in ann.relations:
                if r.head_id == r.tail_id or r.head_id not in ids or r.tail_id not in ids:
                    bad_relations.append(f"{ann.chunk_id}:({r.head_id},{r.tail_id},{r.relation_type})")
        if bad_relations:
            raise CorpusValidationError(
                "relations whose endpoints are not distinct entities of the same chunk: " + "; ".join(bad_relations)
            )

    def doc_of(self, chunk_id: str) -> Document:
        return self.documents[self.chunks[chunk_id].doc_id]

    def entity_types(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for ann in self.annotations.values():
            for e in ann.entities:
                out.setdefault(e.entity_id, e.entity_type)
        return out

    def summary(self) -> IngestSummary:
        annotated = [a for a in self.annotations.values() if a.entities]
        return IngestSummary(
            documents=len(self.documents),
            chunks=len(self.chunks),
            annotated_chunks=len(annotated),
            entities=len({e.entity_id for a in annotated for e in a.entities}),
            relations=sum(len(a.relations) for a in self.annotations.values()),
            entity_mentions=sum(len(a.entities) for a in annotated),
            unmapped_chunks=len(self.chunks) - len(annotated),
        )

    # -- persistence -------------------------------------------------------

    def serialize(self) -> dict[str, bytes]:
        """Canonical bytes for each store file; stable across runs and input orders."""
        return {
            DOCUMENTS_FILE: INDEX_HEADER + b"".join(_canonical_line(asdict(d)) for d in self.documents.values()),
            CHUNKS_FILE: INDEX_HEADER + b"".join(_canonical_line(asdict(c)) for c in self.chunks.values()),
            ANNOTATIONS_FILE: INDEX_HEADER
            + b"".join(_canonical_line(_annotation_record(a)) for a in self.annotations.values()),
        }

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, payload in self.serialize().items():
            (out / name).write_bytes(payload)

    @classmethod
    def load(cls, index_dir: str | Path) -> CorpusStore:
        index_dir = Path(index_dir)

        def records(name: str) -> Iterator[dict]:
            path = index_dir / name
            with open(path, "rb") as fh:
                if fh.readline() != INDEX_HEADER:
                    raise CorpusValidationError(f"{path}: missing or unsupported format header")
                for line in fh:
                    yield json.loads(line)

        docs = [Document(**r) for r in records(DOCUMENTS_FILE)]
        chunks = [Chunk(**r) for r in records(CHUNKS_FILE)]
        anns = [parse_annotations(r, str(index_dir / ANNOTATIONS_FILE)) for r in records(ANNOTATIONS_FILE)]
        return cls.from_records(docs, chunks, anns)


def chunks_from_documents(documents: Iterable[Document]) -> list[Chunk]:
    """Sentence-split title then abstract; chunk ids are ``<doc_id>:<position>``."""
    out = []
    for doc in documents:
        sentences = split_sentences(doc.title) + split_sentences(doc.abstract)
        out.extend(Chunk(f"{doc.doc_id}:{i}", doc.doc_id, i, s) for i, s in enumerate(sentences))
    return out


def ingest_corpus(
    docs_path: str | Path,
    chunks_path: str | Path | None,
    annotations_path: str | Path,
    embeddings_path: str | Path,
    ids_path: str | Path,
    out_dir: str | Path,
) -> IngestSummary:
    """Validate the corpus files and write an index directory.

    The directory receives the three canonical store files, verbatim copies
    of the embedding files, ``graph.json`` and ``summary.json``.
    """
    from .graph import build_graph
    from .vectors import load_embeddings

    documents = [parse_document(r, f"{docs_path}:{n}") for n, r in read_jsonl(docs_path)]
    if chunks_path is not None:
        chunks = [parse_chunk(r, f"{chunks_path}:{n}") for n, r in read_jsonl(chunks_path)]
    else:
        chunks = chunks_from_documents(documents)
    annotations = [parse_annotations(r, f"{annotations_path}:{n}") for n, r in read_jsonl(annotations_path)]
    store = CorpusStore.from_records(documents, chunks, annotations)

    matrix = load_embeddings(embeddings_path, ids_path)
    missing = [cid for cid in matrix.ids if cid not in store.chunks]
    if missing:
        raise CorpusValidationError(
            f"{len(missing)} embedding ids do not resolve to chunks (first: {missing[0]!r})"
        )

    out = Path(out_dir)
    store.save(out)
    shutil.copyfile(embeddings_path, out / EMBEDDINGS_FILE)
    shutil.copyfile(ids_path, out / IDS_FILE)
    build_graph(store).write_json(out / GRAPH_FILE)
    summary = store.summary()
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    logger.info("ingested %s", summary)
    return summary
