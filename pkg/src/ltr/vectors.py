"""Chunk embedding storage and exact cosine top-K search.

Binary layout of ``embeddings.bin`` (all integers little-endian)::

    offset 0   8 bytes  ASCII magic "EMBIDX01"
    offset 8   u32      format version (1)
    offset 12  u32      dim
    offset 16  u64      count
    offset 24  count*dim float32, row-major

Row ``i`` pairs with line ``i`` of the UTF-8 ``ids.txt``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import EmbeddingFormatError

MAGIC = b"EMBIDX01"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sIIQ")

# rows scored per block; bounds the float64 working copy
_BLOCK_ROWS = 65536


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    score: float


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    values: np.ndarray  # (count, dim) float32

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise EmbeddingFormatError("embedding values must be a 2-D matrix")
        if len(self.ids) != self.values.shape[0]:
            raise EmbeddingFormatError(
                f"count mismatch: {self.values.shape[0]} rows but {len(self.ids)} ids"
            )
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingFormatError("embedding ids are not unique")

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def count(self) -> int:
        return int(self.values.shape[0])


def read_embedding_file(path: str | Path) -> np.ndarray:
    """Parse an ``EMBIDX01`` file into a (count, dim) float32 array."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise EmbeddingFormatError(f"{path}: truncated header at byte offset {len(raw)} (need {HEADER.size})")
    magic, version, dim, count = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version} at byte offset 8")
    if dim == 0:
        raise EmbeddingFormatError(f"{path}: dim must be positive (byte offset 12)")
    expected = HEADER.size + count * dim * 4
    if len(raw) < expected:
        raise EmbeddingFormatError(
            f"{path}: truncated payload at byte offset {len(raw)}; expected {expected} bytes for {count}x{dim}"
        )
    if len(raw) > expected:
        raise EmbeddingFormatError(f"{path}: {len(raw) - expected} trailing bytes at byte offset {expected}")
    values = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=HEADER.size)
    return values.reshape(int(count), int(dim)).astype(np.float32)


def write_embedding_file(path: str | Path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise EmbeddingFormatError("embedding values must be a 2-D matrix")
    count, dim = values.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, FORMAT_VERSION, dim, count))
        fh.write(values.tobytes())


def read_ids(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return text.split("\n")[:-1] if text.endswith("\n") else (text.split("\n") if text else [])


def load_embeddings(embeddings_path: str | Path, ids_path: str | Path) -> EmbeddingMatrix:
    values = read_embedding_file(embeddings_path)
    ids = read_ids(ids_path)
    if len(ids) != values.shape[0]:
        raise EmbeddingFormatError(
            f"count mismatch: {embeddings_path} holds {values.shape[0]} rows, {ids_path} has {len(ids)} lines"
        )
    zero = np.flatnonzero(~np.any(values != 0, axis=1))
    if zero.size:
        raise EmbeddingFormatError(f"all-zero embedding row for chunk {ids[zero[0]]!r}")
    return EmbeddingMatrix(ids, values)


def save_embeddings(matrix: EmbeddingMatrix, embeddings_path: str | Path, ids_path: str | Path) -> None:
    write_embedding_file(embeddings_path, matrix.values)
    Path(ids_path).write_text("".join(f"{i}\n" for i in matrix.ids), encoding="utf-8")


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(a @ b) / (na * nb)


class VectorIndex:
    """Exact cosine search over an immutable :class:`EmbeddingMatrix`.

    Row norms are computed once. Scores are float64; ties are broken by
    ascending chunk id so results do not depend on row order.
    """

    def __init__(self, matrix: EmbeddingMatrix):
        self.matrix = matrix
        v = matrix.values.astype(np.float64)
        self._norms = np.sqrt(np.einsum("ij,ij->i", v, v))
        if np.any(self._norms == 0):
            raise EmbeddingFormatError("all-zero embedding row")
        order = sorted(range(matrix.count), key=matrix.ids.__getitem__)
        self._id_rank = np.empty(matrix.count, dtype=np.int64)
        self._id_rank[order] = np.arange(matrix.count)
        self._row = {cid: i for i, cid in enumerate(matrix.ids)}

    def __len__(self) -> int:
        return self.matrix.count

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._row

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def _check_query(self, query) -> tuple[np.ndarray, float]:
        q = np.asarray(query, dtype=np.float64).ravel()
        if q.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: query has {q.shape[0]}, index has {self.dim}")
        qn = math.sqrt(float(q @ q))
        if qn == 0.0:
            raise ValueError("query embedding is the zero vector")
        return q, qn

    def scores(self, query) -> np.ndarray:
        """Cosine similarity of ``query`` against every row, in row order."""
        q, qn = self._check_query(query)
        out = np.empty(self.matrix.count, dtype=np.float64)
        values = self.matrix.values
        for start in range(0, values.shape[0], _BLOCK_ROWS):
            block = values[start : start + _BLOCK_ROWS].astype(np.float64)
            out[start : start + block.shape[0]] = block @ q
        out /= self._norms * qn
        return out

    def score_ids(self, query, chunk_ids: Sequence[str]) -> dict[str, float]:
        missing = [c for c in chunk_ids if c not in self._row]
        if missing:
            raise KeyError(f"no embedding row for chunk {missing[0]!r}")
        rows = np.fromiter((self._row[c] for c in chunk_ids), dtype=np.int64, count=len(chunk_ids))
        # same arithmetic path as top_k, so fused and plain ES scores agree bitwise
        s = self.scores(query)[rows]
        return dict(zip(chunk_ids, s.tolist()))

    def top_k(self, query, k: int, mask: np.ndarray | None = None) -> list[ScoredChunk]:
        """The ``k`` best rows by cosine, restricted to ``mask`` rows if given."""
        if k < 0:
            raise ValueError("k must be non-negative")
        s = self.scores(query)
        candidates = np.arange(s.shape[0]) if mask is None else np.flatnonzero(mask)
        if k == 0 or candidates.size == 0:
            return []
        cs = s[candidates]
        if k < candidates.size:
            # keep every row tied with the k-th best so the id tie-break stays exact
            kth = np.partition(cs, cs.size - k)[cs.size - k]
            keep = cs >= kth
            candidates, cs = candidates[keep], cs[keep]
        order = np.lexsort((self._id_rank[candidates], -cs))[:k]
        ids = self.matrix.ids
        return [ScoredChunk(ids[candidates[i]], float(cs[i])) for i in order]
