"""Gist ingestion: projects conceptual structures into the graph as strictly
additive, schema-conforming batches.

Every gist commits as one batch creating exactly one fresh Concept node.
Element, Time, Source, and Interaction nodes are resolved against the name
indexes and created only when absent, so canonical anchors are shared across
episodes while Concepts stay instance-specific. Nothing pre-existing is ever
touched.

Gist file format (one JSON object per line, `#` comments and blanks ignored):

    {"concept": "fetch-water",
     "elements": [{"rel": "HAS_SUBJECT", "name": "jack"}, ...],
     "event_time": "2000-01-01",            # optional instant or start/end
     "acquisition_time": "2025-11-15",      # optional; defaults to ingest time
     "source": "jack-and-jill-book",
     "interaction": "int-001"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

from .errors import GistGraphError, InvalidGistError
from .graph import MemoryGraph, NodeId, NodeResolver, canonical_name
from .schema import ACQUIRED_AT, OCCURRED_AT, PART_OF, RECOUNTS
from .store import MemoryStore
from .timevalues import TimeValue


@dataclass(frozen=True)
class Gist:
    """One conceptual structure with role-typed elements and full context."""

    concept_label: str
    elements: tuple[tuple[str, str], ...]
    source_name: str
    interaction_id: str
    event_time: TimeValue | None = None
    acquisition_time: TimeValue | None = None  # None: ingestion wall clock

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple((rel, name) for rel, name in self.elements))


@dataclass(frozen=True)
class InteractionReceipt:
    concept_id: NodeId
    created_node_ids: tuple[NodeId, ...]
    created_relation_count: int
    version: int


@dataclass
class IngestStreamResult:
    receipts: list[InteractionReceipt] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def _plan(graph: MemoryGraph, gist: Gist,
          now: datetime) -> tuple[dict, NodeId, list[tuple[NodeId, str, str]]]:
    schema = graph.schema
    if not gist.elements:
        raise InvalidGistError("gist has no elements")
    if not gist.source_name or not gist.source_name.strip():
        raise InvalidGistError("gist has no source")
    if not gist.interaction_id or not gist.interaction_id.strip():
        raise InvalidGistError("gist has no interaction id")

    # Validate every element relation before allocating anything: the batch
    # must commit whole or not at all.
    typed_elements: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str]] = set()
    for rel, name in gist.elements:
        target_type = schema.gist_target_type(rel)
        key = (rel, canonical_name(name))
        if key in seen:
            continue  # identical re-assertion within one gist is a no-op
        seen.add(key)
        typed_elements.append((rel, name, target_type))

    resolver = NodeResolver(graph)
    concept = resolver.create_concept(gist.concept_label)
    rels: list[tuple[NodeId, str, NodeId]] = []
    for rel, name, target_type in typed_elements:
        rels.append((concept, rel, resolver.resolve_or_create(target_type, name)))
    if gist.event_time is not None:
        rels.append((concept, OCCURRED_AT, resolver.resolve_or_create_time(gist.event_time)))
    acquisition = gist.acquisition_time or TimeValue.instant(now)
    rels.append((concept, ACQUIRED_AT, resolver.resolve_or_create_time(acquisition)))
    rels.append((concept, PART_OF, resolver.resolve_or_create_interaction(gist.interaction_id)))
    rels.append((resolver.resolve_or_create_source(gist.source_name), RECOUNTS, concept))

    body = {
        "nodes": [[node_id, node_type, name] for node_id, node_type, name in resolver.new_nodes],
        "rels": [[src, rel, dst] for src, rel, dst in rels],
    }
    return body, concept, resolver.new_nodes


def ingest(store: MemoryStore, gist: Gist, *, now: datetime | None = None) -> InteractionReceipt:
    """Commit one gist atomically; on any validation error the store is unchanged."""
    if now is None:
        now = datetime.now(timezone.utc)
    with store.mutex:
        body, concept, new_nodes = _plan(store.graph, gist, now)
        record = store.commit("ING", body)
    return InteractionReceipt(
        concept_id=concept,
        created_node_ids=tuple(node_id for node_id, _, _ in new_nodes),
        created_relation_count=len(body["rels"]),
        version=record.version,
    )


def ingest_stream(store: MemoryStore, gists: Iterable[Gist], *,
                  now: datetime | None = None) -> IngestStreamResult:
    """Ingest in order; a failing gist is skipped with a diagnostic."""
    result = IngestStreamResult()
    for i, gist in enumerate(gists, start=1):
        try:
            result.receipts.append(ingest(store, gist, now=now))
        except GistGraphError as exc:
            result.diagnostics.append(f"gist {i} ({gist.concept_label!r}) skipped: {exc}")
    return result


def gist_from_json(obj: dict) -> Gist:
    try:
        elements = tuple((e["rel"], e["name"]) for e in obj["elements"])
        return Gist(
            concept_label=obj["concept"],
            elements=elements,
            source_name=obj["source"],
            interaction_id=obj["interaction"],
            event_time=TimeValue.parse(obj["event_time"]) if obj.get("event_time") else None,
            acquisition_time=(TimeValue.parse(obj["acquisition_time"])
                              if obj.get("acquisition_time") else None),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidGistError(f"bad gist object: {exc}") from exc


def gist_to_json(gist: Gist) -> dict:
    obj: dict = {
        "concept": gist.concept_label,
        "elements": [{"rel": rel, "name": name} for rel, name in gist.elements],
        "source": gist.source_name,
        "interaction": gist.interaction_id,
    }
    if gist.event_time is not None:
        obj["event_time"] = gist.event_time.render()
    if gist.acquisition_time is not None:
        obj["acquisition_time"] = gist.acquisition_time.render()
    return obj


def parse_gist_lines(lines: Iterable[str]) -> tuple[list[Gist], list[str]]:
    """Parse gist file text; returns (gists, per-line parse diagnostics)."""
    gists: list[Gist] = []
    diagnostics: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            gists.append(gist_from_json(json.loads(stripped)))
        except (json.JSONDecodeError, GistGraphError) as exc:
            diagnostics.append(f"line {lineno}: {exc}")
    return gists, diagnostics
