"""Entity graph built from chunk annotations, and retrieval scopes over it.

Mapping rules for a chunk with annotated entities:

* no entity: the chunk is not mapped;
* one entity: the chunk goes to that entity's node;
* for every unordered pair of entities in the chunk, a relation-labelled
  pair puts the chunk on the pair's edge, an unlabelled pair puts it on both
  entity nodes.

Edges are undirected and carry the union of relation types seen for the pair.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .corpus import ChunkAnnotations, CorpusStore
from .exceptions import UnknownEntityError

EdgeKey = tuple[str, str]


def edge_key(a: str, b: str) -> EdgeKey:
    return (a, b) if a <= b else (b, a)


@dataclass
class KgNode:
    entity_id: str
    entity_type: str
    chunk_ids: set[str] = field(default_factory=set)


@dataclass
class KgEdge:
    a: str
    b: str
    relation_types: set[str] = field(default_factory=set)
    chunk_ids: set[str] = field(default_factory=set)

    @property
    def key(self) -> EdgeKey:
        return (self.a, self.b)


@dataclass(frozen=True, order=True)
class ScopeElement:
    """A node (``key`` is an entity id) or an edge (``key`` is a sorted id pair)."""

    kind: str
    key: Union[str, EdgeKey]

    def __str__(self) -> str:
        if self.kind == "node":
            return str(self.key)
        return "{%s,%s}" % self.key


@dataclass(frozen=True)
class RetrievalScope:
    elements: tuple[ScopeElement, ...]
    path: tuple[str, ...]
    disconnected: bool = False

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


class KnowledgeGraph:
    def __init__(self, nodes: dict[str, KgNode], edges: dict[EdgeKey, KgEdge]):
        self.nodes = nodes
        self.edges = edges
        adj: dict[str, set[str]] = {n: set() for n in nodes}
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        self._adj = {n: sorted(nb) for n, nb in adj.items()}

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.nodes

    def neighbors(self, entity_id: str) -> list[str]:
        return self._adj[entity_id]

    def degree(self, entity_id: str) -> int:
        return len(self._adj[entity_id])

    def chunks_of(self, element: ScopeElement) -> set[str]:
        if element.kind == "node":
            return self.nodes[element.key].chunk_ids
        return self.edges[element.key].chunk_ids

    def mapped_chunks(self) -> set[str]:
        out: set[str] = set()
        for n in self.nodes.values():
            out |= n.chunk_ids
        for e in self.edges.values():
            out |= e.chunk_ids
        return out

    # -- paths and scopes --------------------------------------------------

    def _require(self, entity_ids: Iterable[str]) -> None:
        unknown = [e for e in dict.fromkeys(entity_ids) if e not in self.nodes]
        if unknown:
            raise UnknownEntityError(unknown)

    def _bfs_dist(self, source: str) -> dict[str, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def shortest_path(self, a: str, b: str) -> list[str] | None:
        """Fewest-hop path from ``a`` to ``b``; lexicographically smallest among ties."""
        self._require([a, b])
        if a == b:
            return [a]
        dist = self._bfs_dist(b)
        if a not in dist:
            return None
        path = [a]
        node = a
        while node != b:
            # neighbours are sorted, so the first one a hop closer is the smallest
            node = next(v for v in self._adj[node] if dist.get(v) == dist[node] - 1)
            path.append(node)
        return path

    def _incident_edges(self, entity_id: str) -> list[ScopeElement]:
        return [ScopeElement("edge", edge_key(entity_id, nb)) for nb in self._adj[entity_id]]

    def scope_from_path(self, path: Iterable[str], disconnected: bool = False) -> RetrievalScope:
        """Each path node followed by its incident edges not yet emitted."""
        path = tuple(dict.fromkeys(path))
        elements: list[ScopeElement] = []
        seen: set[ScopeElement] = set()
        for node in path:
            for el in [ScopeElement("node", node), *self._incident_edges(node)]:
                if el not in seen:
                    seen.add(el)
                    elements.append(el)
        return RetrievalScope(tuple(elements), path, disconnected)

    def scope_for_entities(self, entity_ids: Iterable[str]) -> RetrievalScope:
        """Retrieval scope along the shortest paths linking ``entity_ids``.

        One entity gives its 1-hop neighbourhood. Several entities give the
        union of pairwise shortest paths, in order of first appearance. A pair
        with no connecting path contributes only its two endpoints and marks
        the scope as disconnected.
        """
        ids = list(dict.fromkeys(entity_ids))
        if not ids:
            raise ValueError("scope_for_entities needs at least one entity")
        self._require(ids)
        if len(ids) == 1:
            return self.scope_from_path(ids)
        nodes: list[str] = []
        disconnected = False
        for a, b in itertools.combinations(ids, 2):
            path = self.shortest_path(a, b)
            if path is None:
                disconnected = True
                path = [a, b]
            nodes.extend(path)
        return self.scope_from_path(nodes, disconnected)

    # -- export ------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": n.entity_id, "type": n.entity_type, "chunks": sorted(n.chunk_ids)}
                for n in sorted(self.nodes.values(), key=lambda n: n.entity_id)
            ],
            "edges": [
                {"a": e.a, "b": e.b, "types": sorted(e.relation_types), "chunks": sorted(e.chunk_ids)}
                for e in sorted(self.edges.values(), key=lambda e: e.key)
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def map_chunk(ann: ChunkAnnotations) -> tuple[set[str], dict[EdgeKey, set[str]]]:
    """Node ids and edges (with relation types) a single chunk maps onto."""
    ids = ann.entity_ids
    labelled: dict[EdgeKey, set[str]] = {}
    for r in ann.relations:
        labelled.setdefault(edge_key(r.head_id, r.tail_id), set()).add(r.relation_type)
    nodes: set[str] = set()
    edges: dict[EdgeKey, set[str]] = {}
    if len(ids) == 1:
        nodes.add(ids[0])
    for a, b in itertools.combinations(ids, 2):
        key = edge_key(a, b)
        if key in labelled:
            edges[key] = labelled[key]
        else:
            nodes.update(key)
    return nodes, edges


def build_graph(store: CorpusStore) -> KnowledgeGraph:
    types = store.entity_types()
    nodes: dict[str, KgNode] = {eid: KgNode(eid, types[eid]) for eid in sorted(types)}
    edges: dict[EdgeKey, KgEdge] = {}
    for ann in store.annotations.values():
        chunk_nodes, chunk_edges = map_chunk(ann)
        for n in chunk_nodes:
            nodes[n].chunk_ids.add(ann.chunk_id)
        for key, rtypes in chunk_edges.items():
            edge = edges.setdefault(key, KgEdge(*key))
            edge.relation_types |= rtypes
            edge.chunk_ids.add(ann.chunk_id)
    return KnowledgeGraph(nodes, {k: edges[k] for k in sorted(edges)})
