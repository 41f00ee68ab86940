"""Cue-conditioned recall: builds a transient working-memory subgraph.

Construction is two-stage. Stage one selects candidate Concepts satisfying
every present cue condition conjunctively: element overlap at or above the
threshold, event time (acquisition time if no event time exists) inside the
window, recounted by the named source, part of the named interaction. Stage
two closes one hop outward, pulling in every Element, Time, Source,
Interaction, or extension node adjacent to a selected Concept together with
the connecting relations.

The result is a read-only copy: recall never writes to the store, and the
working memory stays valid however the store evolves afterwards. An optional
cap keeps the top concepts by element overlap, then recency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import IncomparableError, InvalidCueError
from .graph import MemoryGraph, Node, NodeId, canonical_name
from .schema import ACQUIRED_AT, CONCEPT, ELEMENT, OCCURRED_AT, PART_OF, RECOUNTS, SOURCE, INTERACTION
from .store import MemoryStore
from .timevalues import TimeValue


@dataclass(frozen=True)
class Cue:
    """Conjunctive recall condition; at least one condition must be present."""

    elements: tuple[str, ...] = ()
    min_element_overlap: int = 1
    time_window: TimeValue | None = None
    source_name: str | None = None
    interaction_id: str | None = None
    max_concepts: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "elements",
                           tuple(canonical_name(e) for e in self.elements))
        if self.source_name is not None:
            object.__setattr__(self, "source_name", canonical_name(self.source_name))
        if self.interaction_id is not None:
            object.__setattr__(self, "interaction_id", canonical_name(self.interaction_id))
        if not (self.elements or self.time_window or self.source_name or self.interaction_id):
            raise InvalidCueError("cue requires at least one condition")
        if self.min_element_overlap < 1:
            raise InvalidCueError("min_element_overlap must be at least 1")
        if self.max_concepts is not None and self.max_concepts < 1:
            raise InvalidCueError("max_concepts must be at least 1")

    def describe(self) -> str:
        parts = []
        if self.elements:
            parts.append("elements=" + ",".join(self.elements))
            if self.min_element_overlap != 1:
                parts.append(f"min-overlap={self.min_element_overlap}")
        if self.time_window is not None:
            parts.append(f"window={self.time_window.render()}")
        if self.source_name is not None:
            parts.append(f"source={self.source_name}")
        if self.interaction_id is not None:
            parts.append(f"interaction={self.interaction_id}")
        if self.max_concepts is not None:
            parts.append(f"max-concepts={self.max_concepts}")
        return " ".join(parts)


@dataclass(frozen=True)
class WorkingMemory:
    """A recalled subgraph, tagged with the cue and version that produced it."""

    nodes: Mapping[NodeId, Node]
    relations: Mapping[tuple[NodeId, str, NodeId], float]
    cue: Cue
    version: int

    @property
    def is_empty(self) -> bool:
        return not self.nodes

    def concept_ids(self) -> list[NodeId]:
        return sorted(n.id for n in self.nodes.values() if n.type == CONCEPT)

    def ids_of_type(self, node_type: str) -> list[NodeId]:
        return sorted(n.id for n in self.nodes.values() if n.type == node_type)

    def names_of_type(self, node_type: str) -> set[str]:
        return {n.name for n in self.nodes.values() if n.type == node_type}

    def document(self) -> str:
        """Canonical subgraph document: sorted nodes, sorted relations."""
        import json

        lines = [f"SUBGRAPH version={self.version}", f"CUE {self.cue.describe()}"]
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            lines.append(f"NODE {node.id} {node.type} {json.dumps(node.name)}")
        for src, rel, dst in sorted(self.relations):
            lines.append(f"REL {src} {rel} {dst} {self.relations[(src, rel, dst)]!r}")
        return "\n".join(lines)


@dataclass(frozen=True)
class TraceEntry:
    concept_id: NodeId
    label: str
    overlap: int
    satisfied: tuple[str, ...]
    included: bool
    exclusion_reason: str | None = None


@dataclass(frozen=True)
class TraceReport:
    cue: Cue
    version: int
    entries: tuple[TraceEntry, ...] = ()

    def render(self) -> str:
        lines = [f"TRACE version={self.version} cue: {self.cue.describe()}"]
        for e in self.entries:
            status = "included" if e.included else f"excluded ({e.exclusion_reason})"
            lines.append(
                f"concept {e.concept_id} {e.label!r}: overlap={e.overlap} "
                f"satisfied=[{','.join(e.satisfied)}] {status}"
            )
        if not self.entries:
            lines.append("no concepts satisfied the cue")
        return "\n".join(lines)


def _concept_time_values(graph: MemoryGraph, concept: NodeId) -> list[TimeValue]:
    occurred = [graph.node(dst).time_value for rel, dst in graph.out_edges(concept)
                if rel == OCCURRED_AT]
    if occurred:
        return occurred
    return [graph.node(dst).time_value for rel, dst in graph.out_edges(concept)
            if rel == ACQUIRED_AT]


def _scan(graph: MemoryGraph, cue: Cue) -> tuple[list[tuple[NodeId, int, tuple[str, ...]]],
                                                 list[tuple[NodeId, int, tuple[str, ...]]]]:
    """Returns (selected, capped) candidate lists of (concept, overlap, satisfied)."""
    cue_element_ids = []
    if cue.elements:
        for name in cue.elements:
            found = graph.find_by_name(ELEMENT, name)
            if found is not None:
                cue_element_ids.append(found)
        pool: Iterable[NodeId] = sorted({
            src for eid in cue_element_ids for _rel, src in graph.in_edges(eid)
            if graph.node(src).type == CONCEPT
        })
    else:
        pool = graph.concept_ids()

    candidates: list[tuple[NodeId, int, tuple[str, ...]]] = []
    element_id_set = set(cue_element_ids)
    for concept in pool:
        satisfied: list[str] = []
        overlap = 0
        if cue.elements:
            linked = {dst for _rel, dst in graph.out_edges(concept)}
            overlap = len(element_id_set & linked)
            if overlap < cue.min_element_overlap:
                continue
            satisfied.append("elements")
        if cue.time_window is not None:
            values = _concept_time_values(graph, concept)
            if not any(cue.time_window.intersects(v) for v in values):
                continue
            satisfied.append("time-window")
        if cue.source_name is not None:
            source_id = graph.find_by_name(SOURCE, cue.source_name)
            if source_id is None or not graph.has_relation(source_id, RECOUNTS, concept):
                continue
            satisfied.append("source")
        if cue.interaction_id is not None:
            interaction_id = graph.find_by_name(INTERACTION, cue.interaction_id)
            if interaction_id is None or not graph.has_relation(concept, PART_OF, interaction_id):
                continue
            satisfied.append("interaction")
        candidates.append((concept, overlap, tuple(satisfied)))

    if cue.max_concepts is not None and len(candidates) > cue.max_concepts:
        ranked = sorted(candidates, key=lambda c: (-c[1], -c[0]))
        kept = set(c[0] for c in ranked[:cue.max_concepts])
        selected = [c for c in candidates if c[0] in kept]
        capped = [c for c in candidates if c[0] not in kept]
        return selected, capped
    return candidates, []


def _close_over(graph: MemoryGraph, selected: Iterable[NodeId], cue: Cue,
                version: int) -> WorkingMemory:
    nodes: dict[NodeId, Node] = {}
    relations: dict[tuple[NodeId, str, NodeId], float] = {}
    for concept in selected:
        nodes[concept] = graph.node(concept)
        for rel, dst in graph.out_edges(concept):
            nodes[dst] = graph.node(dst)
            relations[(concept, rel, dst)] = graph.weight(concept, rel, dst)
        for rel, src in graph.in_edges(concept):
            nodes[src] = graph.node(src)
            relations[(src, rel, concept)] = graph.weight(src, rel, concept)
    return WorkingMemory(
        nodes=MappingProxyType(nodes),
        relations=MappingProxyType(relations),
        cue=cue,
        version=version,
    )


def _recall(store: MemoryStore, cue: Cue,
            at_version: int | None) -> tuple[WorkingMemory, TraceReport]:
    with store.mutex:
        current = store.version
        if at_version is None or at_version == current:
            graph, version = store.graph, current
            selected, capped = _scan(graph, cue)
            wm = _close_over(graph, (c[0] for c in selected), cue, version)
        else:
            graph, version = None, at_version
    if graph is None:
        graph = store.snapshot(at_version)  # range-checked; private copy
        selected, capped = _scan(graph, cue)
        wm = _close_over(graph, (c[0] for c in selected), cue, version)
    entries = tuple(
        [TraceEntry(concept_id=c, label=graph.node(c).name, overlap=o,
                    satisfied=s, included=True)
         for c, o, s in selected]
        + [TraceEntry(concept_id=c, label=graph.node(c).name, overlap=o,
                      satisfied=s, included=False, exclusion_reason="capped")
           for c, o, s in capped]
    )
    return wm, TraceReport(cue=cue, version=version, entries=entries)


def recall(store: MemoryStore, cue: Cue, at_version: int | None = None) -> WorkingMemory:
    """Construct working memory for a cue against a pinned committed version."""
    wm, _trace = _recall(store, cue, at_version)
    return wm


def recall_trace(store: MemoryStore, cue: Cue,
                 at_version: int | None = None) -> tuple[WorkingMemory, TraceReport]:
    """As `recall`, plus a per-concept explanation of cue satisfaction."""
    return _recall(store, cue, at_version)


def contains(w1: WorkingMemory, w2: WorkingMemory) -> bool:
    """True iff w1 is a sub-working-memory of w2 (same recalled version)."""
    if w1.version != w2.version:
        raise IncomparableError(
            f"working memories recalled at different versions: {w1.version} vs {w2.version}"
        )
    return (set(w1.nodes) <= set(w2.nodes)
            and set(w1.relations) <= set(w2.relations))


_CUE_FILE_FIELDS = {
    "element", "from", "to", "source", "interaction",
    "min-overlap", "max-concepts", "at-version",
}


def cue_from_json(obj: dict) -> tuple[Cue, int | None]:
    """Build a cue from a structured cue file object.

    Field names mirror the CLI flags: `element` (array), `from`, `to`,
    `source`, `interaction`, `min-overlap`, `max-concepts`, `at-version`.
    Returns the cue and the optional pinned version.
    """
    unknown = set(obj) - _CUE_FILE_FIELDS
    if unknown:
        raise InvalidCueError(f"unknown cue file fields: {sorted(unknown)}")
    window = None
    if obj.get("from") or obj.get("to"):
        window = TimeValue.interval(obj.get("from") or "0001-01-01",
                                    obj.get("to") or "9999-12-31T23:59:59Z")
    cue = Cue(
        elements=tuple(obj.get("element", ())),
        min_element_overlap=int(obj.get("min-overlap", 1)),
        time_window=window,
        source_name=obj.get("source"),
        interaction_id=obj.get("interaction"),
        max_concepts=obj.get("max-concepts"),
    )
    at_version = obj.get("at-version")
    return cue, int(at_version) if at_version is not None else None
