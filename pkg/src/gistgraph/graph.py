"""In-memory memory graph: typed nodes, typed weighted relations, name
identity, and a monotone version counter.

All mutation flows through `apply_record`, the same code path used for live
commits and for log replay, so a replayed graph is structurally identical to
the one that emitted the log. Everything else on this class is read-only.

Identity: Element, Time, Source, Interaction, and extension nodes are unique
per (type, canonical name); Concept nodes are instance-specific and may share
labels. Canonical names are trimmed, case-folded, and whitespace-collapsed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterator

from .errors import GistGraphError, InvalidNameError, VersionRangeError
from .journal import Record
from .schema import CONCEPT, ELEMENT, INTERACTION, SOURCE, TIME, Schema
from .timevalues import TimeValue

NodeId = int


def canonical_name(text: str) -> str:
    """Trim, collapse internal whitespace, and case-fold a node label."""
    name = " ".join(text.split()).casefold()
    if not name:
        raise InvalidNameError("name is empty after canonicalization")
    return name


@dataclass(frozen=True, slots=True)
class Node:
    id: NodeId
    type: str
    name: str
    time_value: TimeValue | None = None


class MemoryGraph:
    """The evolving memory state at its current version."""

    def __init__(self, schema: Schema):
        self.schema = schema
        self._nodes: dict[NodeId, Node] = {}
        self._weights: dict[tuple[NodeId, str, NodeId], float] = {}
        self._out: dict[NodeId, set[tuple[str, NodeId]]] = {}
        self._in: dict[NodeId, set[tuple[str, NodeId]]] = {}
        self._name_index: dict[tuple[str, str], NodeId] = {}
        self._by_type: dict[str, dict[NodeId, None]] = {}
        self._tombstones: dict[NodeId, NodeId] = {}
        self._version = 0
        self._next_id = 1

    # -- read API ----------------------------------------------------------

    @property
    def version(self) -> int:
        return self._version

    @property
    def next_node_id(self) -> NodeId:
        return self._next_id

    def node_count(self) -> int:
        return len(self._nodes)

    def relation_count(self) -> int:
        return len(self._weights)

    def has_node(self, node_id: NodeId) -> bool:
        return node_id in self._nodes

    def node(self, node_id: NodeId) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise GistGraphError(f"no such node: {node_id}") from None

    def nodes(self) -> Iterator[Node]:
        return iter(self._nodes.values())

    def node_ids(self) -> Iterator[NodeId]:
        return iter(self._nodes.keys())

    def relations(self) -> Iterator[tuple[NodeId, str, NodeId, float]]:
        for (src, rel, dst), weight in self._weights.items():
            yield src, rel, dst, weight

    def has_relation(self, src: NodeId, rel: str, dst: NodeId) -> bool:
        return (src, rel, dst) in self._weights

    def weight(self, src: NodeId, rel: str, dst: NodeId) -> float:
        return self._weights[(src, rel, dst)]

    def out_edges(self, node_id: NodeId) -> set[tuple[str, NodeId]]:
        return self._out.get(node_id, set())

    def in_edges(self, node_id: NodeId) -> set[tuple[str, NodeId]]:
        return self._in.get(node_id, set())

    def find_by_name(self, node_type: str, name: str) -> NodeId | None:
        return self._name_index.get((node_type, canonical_name(name)))

    def ids_of_type(self, node_type: str) -> Iterator[NodeId]:
        """Ids of live nodes of one type, in allocation (= id) order."""
        return iter(self._by_type.get(node_type, {}).keys())

    def concept_ids(self) -> Iterator[NodeId]:
        return self.ids_of_type(CONCEPT)

    def tombstones(self) -> dict[NodeId, NodeId]:
        return dict(self._tombstones)

    def survivor_of(self, node_id: NodeId) -> NodeId:
        """Follow tombstones to the surviving node id (identity if live)."""
        while node_id in self._tombstones:
            node_id = self._tombstones[node_id]
        return node_id

    # -- canonical serialization -------------------------------------------

    def canonical_lines(self) -> list[str]:
        """A sorted, quoted line rendering of the full logical content."""
        lines = [f"VERSION {self._version}"]
        for node_id in sorted(self._nodes):
            node = self._nodes[node_id]
            lines.append(f"NODE {node.id} {node.type} {json.dumps(node.name)}")
        for src, rel, dst in sorted(self._weights):
            lines.append(f"REL {src} {rel} {dst} {self._weights[(src, rel, dst)]!r}")
        for absorbed in sorted(self._tombstones):
            lines.append(f"TOMB {absorbed} {self._tombstones[absorbed]}")
        return lines

    def content_digest(self) -> str:
        payload = "\n".join(self.canonical_lines()) + "\n"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def content_equals(self, other: "MemoryGraph") -> bool:
        return self.canonical_lines() == other.canonical_lines()

    @classmethod
    def from_canonical_lines(cls, schema: Schema, lines: list[str]) -> "MemoryGraph":
        graph = cls(schema)
        max_id = 0
        for line in lines:
            kind, _, rest = line.partition(" ")
            if kind == "VERSION":
                graph._version = int(rest)
            elif kind == "NODE":
                node_id_s, node_type, name_json = rest.split(" ", 2)
                graph._insert_node(int(node_id_s), node_type, json.loads(name_json))
                max_id = max(max_id, int(node_id_s))
            elif kind == "REL":
                src_s, rel, dst_s, weight_s = rest.split(" ")
                graph._upsert_relation(int(src_s), rel, int(dst_s), float(weight_s))
            elif kind == "TOMB":
                absorbed_s, kept_s = rest.split(" ")
                graph._tombstones[int(absorbed_s)] = int(kept_s)
                max_id = max(max_id, int(absorbed_s))
            else:
                raise GistGraphError(f"bad canonical line: {line!r}")
        graph._next_id = max_id + 1
        return graph

    # -- mutation (record application only) ----------------------------------

    def apply_record(self, record: Record) -> None:
        """Apply one committed batch. Versions must arrive densely in order."""
        if record.version != self._version + 1:
            raise VersionRangeError(
                f"record version {record.version} does not follow {self._version}"
            )
        if record.kind == "ING":
            self._apply_ingestion(record.body)
        elif record.kind == "CSL":
            self._apply_consolidation(record.body)
        else:
            raise GistGraphError(f"unknown record kind: {record.kind!r}")
        self._version = record.version

    def _apply_ingestion(self, body: dict) -> None:
        for node_id, node_type, name in body["nodes"]:
            self._insert_node(node_id, node_type, name)
        for src, rel, dst in body["rels"]:
            if (src, rel, dst) not in self._weights:
                self._upsert_relation(src, rel, dst, 1.0)

    def _apply_consolidation(self, body: dict) -> None:
        for node_id, node_type, name in body.get("nodes", []):
            self._insert_node(node_id, node_type, name)
        for src, rel, dst in body["removed"]:
            self._remove_relation(src, rel, dst)
        absorbed = body["absorbed"]
        node = self._nodes.pop(absorbed)
        self._by_type[node.type].pop(absorbed, None)
        for src, rel, dst, weight in body["upserts"]:
            self._upsert_relation(src, rel, dst, weight)
        self._tombstones[absorbed] = body["kept"]

    def _insert_node(self, node_id: NodeId, node_type: str, name: str) -> None:
        if node_id in self._nodes or node_id in self._tombstones:
            raise GistGraphError(f"node id reused: {node_id}")
        time_value = TimeValue.parse(name) if node_type == TIME else None
        node = Node(node_id, node_type, name, time_value)
        self._nodes[node_id] = node
        self._by_type.setdefault(node_type, {})[node_id] = None
        if node_type != CONCEPT:
            key = (node_type, name)
            if key in self._name_index:
                raise GistGraphError(f"duplicate {node_type} name: {name!r}")
            self._name_index[key] = node_id
        if node_id >= self._next_id:
            self._next_id = node_id + 1

    def _upsert_relation(self, src: NodeId, rel: str, dst: NodeId, weight: float) -> None:
        key = (src, rel, dst)
        if key not in self._weights:
            self._out.setdefault(src, set()).add((rel, dst))
            self._in.setdefault(dst, set()).add((rel, src))
        self._weights[key] = weight

    def _remove_relation(self, src: NodeId, rel: str, dst: NodeId) -> None:
        del self._weights[(src, rel, dst)]
        self._out[src].discard((rel, dst))
        self._in[dst].discard((rel, src))


class NodeResolver:
    """Resolve-or-create within one pending batch.

    Lookups hit the graph's name indexes first, then nodes pending in this
    batch; ids are allocated past the graph's high-water mark, so the drafted
    record applies cleanly. Uniqueness per (type, canonical name) holds across
    both layers.
    """

    def __init__(self, graph: MemoryGraph):
        self._graph = graph
        self._next_id = graph.next_node_id
        self._pending: dict[tuple[str, str], NodeId] = {}
        self.new_nodes: list[tuple[NodeId, str, str]] = []

    def _allocate(self, node_type: str, name: str) -> NodeId:
        node_id = self._next_id
        self._next_id += 1
        self.new_nodes.append((node_id, node_type, name))
        return node_id

    def create_concept(self, label: str) -> NodeId:
        return self._allocate(CONCEPT, canonical_name(label))

    def resolve_or_create(self, node_type: str, name: str) -> NodeId:
        key = (node_type, canonical_name(name))
        existing = self._graph.find_by_name(node_type, key[1])
        if existing is not None:
            return existing
        if key not in self._pending:
            self._pending[key] = self._allocate(node_type, key[1])
        return self._pending[key]

    def resolve_or_create_element(self, name: str) -> NodeId:
        return self.resolve_or_create(ELEMENT, name)

    def resolve_or_create_time(self, value: TimeValue) -> NodeId:
        return self.resolve_or_create(TIME, value.render())

    def resolve_or_create_source(self, name: str) -> NodeId:
        return self.resolve_or_create(SOURCE, name)

    def resolve_or_create_interaction(self, name: str) -> NodeId:
        return self.resolve_or_create(INTERACTION, name)
