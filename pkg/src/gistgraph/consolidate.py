"""Structural-equivalence consolidation: merge Concept nodes whose element
signatures match, summing element weights and reattaching all provenance.

The default signature is role-typed, a set of (relation, element) pairs, so
"jack fetches water" never merges with "water fetches jack"; a role-blind
mode (element set only) is available for experimentation. The survivor is
always the lower NodeId; the absorbed Concept leaves a tombstone pointing at
it. Time attachments are reattached verbatim unless generalization is
requested, in which case event times collapse to the minimal covering
interval. Acquisition times never generalize.

Each merge commits as its own `CSL` batch; a pass repeats merge sweeps until
no equivalent pair remains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .errors import ConsolidationError, GistGraphError
from .graph import MemoryGraph, NodeId, NodeResolver
from .schema import ACQUIRED_AT, CONCEPT, ELEMENT, OCCURRED_AT
from .store import MemoryStore
from .timevalues import TimeValue

ElementSignature = frozenset


def element_signature(graph: MemoryGraph, concept: NodeId, *,
                      role_blind: bool = False) -> ElementSignature:
    """The typed element-link set of a Concept (element ids only if role_blind)."""
    node = graph.node(concept)
    if node.type != CONCEPT:
        raise GistGraphError(f"node {concept} is {node.type}, not Concept")
    links = [
        (rel, dst) for rel, dst in graph.out_edges(concept)
        if graph.node(dst).type == ELEMENT
    ]
    if role_blind:
        return frozenset(dst for _rel, dst in links)
    return frozenset(links)


def find_equivalent_pairs(graph: MemoryGraph, *,
                          role_blind: bool = False) -> list[tuple[NodeId, NodeId]]:
    """All disjoint equivalent Concept pairs, ordered by NodeId.

    Each Concept appears in at most one pair; equivalence classes larger than
    two reduce across repeated passes.
    """
    groups: dict[ElementSignature, list[NodeId]] = {}
    for concept in graph.concept_ids():
        groups.setdefault(element_signature(graph, concept, role_blind=role_blind), []).append(concept)
    pairs: list[tuple[NodeId, NodeId]] = []
    for members in groups.values():
        members.sort()
        for i in range(0, len(members) - 1, 2):
            pairs.append((members[i], members[i + 1]))
    pairs.sort()
    return pairs


@dataclass
class ConsolidationReport:
    merged_pairs: list[tuple[NodeId, NodeId]] = field(default_factory=list)
    reattached_provenance_count: int = 0
    time_generalizations: list[tuple[tuple[NodeId, ...], NodeId]] = field(default_factory=list)
    version_range: tuple[int, int] = (0, 0)

    @property
    def is_empty(self) -> bool:
        return not self.merged_pairs

    def render(self) -> str:
        lines = [f"versions {self.version_range[0]} -> {self.version_range[1]}"]
        if self.is_empty:
            lines.append("no equivalent concepts; store unchanged")
            return "\n".join(lines)
        for kept, absorbed in self.merged_pairs:
            lines.append(f"merged concept {absorbed} into {kept}")
        lines.append(f"reattached provenance edges: {self.reattached_provenance_count}")
        for old_ids, new_id in self.time_generalizations:
            lines.append(f"generalized times {list(old_ids)} -> {new_id}")
        return "\n".join(lines)


@dataclass
class _MergePlan:
    body: dict
    reattached: int
    generalizations: list[tuple[tuple[NodeId, ...], NodeId]]


def _plan_merge(graph: MemoryGraph, kept: NodeId, absorbed: NodeId, *,
                generalize_times: bool, role_blind: bool) -> _MergePlan:
    sig_kept = element_signature(graph, kept, role_blind=role_blind)
    sig_absorbed = element_signature(graph, absorbed, role_blind=role_blind)
    if kept == absorbed:
        raise ConsolidationError("cannot merge a concept with itself")
    if sig_kept != sig_absorbed:
        raise ConsolidationError(
            f"concepts {kept} and {absorbed} are not structurally equivalent"
        )

    removed = sorted(
        [(absorbed, rel, dst) for rel, dst in graph.out_edges(absorbed)]
        + [(src, rel, absorbed) for rel, src in graph.in_edges(absorbed)]
    )
    # Element evidence: summed weights. In role-blind mode the absorbed
    # side's role may differ; its mass lands on the keeper's lowest relation
    # tag for that element.
    kept_rels_by_element: dict[NodeId, list[str]] = {}
    for rel, dst in graph.out_edges(kept):
        if graph.node(dst).type == ELEMENT:
            kept_rels_by_element.setdefault(dst, []).append(rel)
    upserts: dict[tuple[NodeId, str, NodeId], float] = {}
    for rel, dst in sorted(graph.out_edges(absorbed)):
        if graph.node(dst).type != ELEMENT:
            continue
        target_rel = rel if (rel, dst) in graph.out_edges(kept) else min(kept_rels_by_element[dst])
        key = (kept, target_rel, dst)
        upserts[key] = upserts.get(key, graph.weight(*key)) + graph.weight(absorbed, rel, dst)

    # Provenance and extension attachments: reattach, deduplicated.
    occurred_times: set[NodeId] = {
        dst for rel, dst in graph.out_edges(kept) if rel == OCCURRED_AT
    }
    prov_upserts: dict[tuple[NodeId, str, NodeId], float] = {}
    for rel, dst in sorted(graph.out_edges(absorbed)):
        if graph.node(dst).type == ELEMENT:
            continue
        if rel == OCCURRED_AT:
            occurred_times.add(dst)
        if not graph.has_relation(kept, rel, dst):
            prov_upserts[(kept, rel, dst)] = graph.weight(absorbed, rel, dst)
    for rel, src in sorted(graph.in_edges(absorbed)):
        if not graph.has_relation(src, rel, kept):
            prov_upserts[(src, rel, kept)] = graph.weight(src, rel, absorbed)

    new_nodes: list[tuple[NodeId, str, str]] = []
    generalizations: list[tuple[tuple[NodeId, ...], NodeId]] = []
    if generalize_times and len(occurred_times) > 1:
        values = [graph.node(t).time_value for t in sorted(occurred_times)]
        covering = TimeValue(min(v.start for v in values), max(v.end for v in values))
        resolver = NodeResolver(graph)
        covering_id = resolver.resolve_or_create_time(covering)
        new_nodes = resolver.new_nodes
        replaced = tuple(t for t in sorted(occurred_times) if t != covering_id)
        if replaced:
            generalizations.append((replaced, covering_id))
            # Drop every replaced event-time edge (kept-side removals plus
            # suppression of the reattachments planned above).
            for t in replaced:
                prov_upserts.pop((kept, OCCURRED_AT, t), None)
                if graph.has_relation(kept, OCCURRED_AT, t):
                    removed.append((kept, OCCURRED_AT, t))
            if not graph.has_relation(kept, OCCURRED_AT, covering_id):
                prov_upserts[(kept, OCCURRED_AT, covering_id)] = 1.0
            removed.sort()
    reattached = len(prov_upserts)
    upserts.update(prov_upserts)

    body = {
        "kept": kept,
        "absorbed": absorbed,
        "nodes": [[node_id, node_type, name] for node_id, node_type, name in new_nodes],
        "removed": [[s, r, d] for s, r, d in removed],
        "upserts": [[s, r, d, w] for (s, r, d), w in sorted(upserts.items())],
        "generalized": [[list(old_ids), new_id] for old_ids, new_id in generalizations],
    }
    return _MergePlan(body=body, reattached=reattached, generalizations=generalizations)


def consolidate_pair(store: MemoryStore, v_i: NodeId, v_j: NodeId, *,
                     generalize_times: bool = False,
                     role_blind: bool = False) -> ConsolidationReport:
    """Merge two structurally equivalent Concepts as one atomic batch."""
    with store.mutex:
        before = store.version
        kept, absorbed = min(v_i, v_j), max(v_i, v_j)
        plan = _plan_merge(store.graph, kept, absorbed,
                           generalize_times=generalize_times, role_blind=role_blind)
        store.commit("CSL", plan.body)
        return ConsolidationReport(
            merged_pairs=[(kept, absorbed)],
            reattached_provenance_count=plan.reattached,
            time_generalizations=plan.generalizations,
            version_range=(before, store.version),
        )


def consolidation_pass(store: MemoryStore, *, generalize_times: bool = False,
                       role_blind: bool = False) -> ConsolidationReport:
    """Merge until fixpoint: no two Concepts share an element signature."""
    with store.mutex:
        report = ConsolidationReport(version_range=(store.version, store.version))
        while True:
            pairs = find_equivalent_pairs(store.graph, role_blind=role_blind)
            if not pairs:
                break
            for kept, absorbed in pairs:
                step = consolidate_pair(store, kept, absorbed,
                                        generalize_times=generalize_times,
                                        role_blind=role_blind)
                report.merged_pairs.extend(step.merged_pairs)
                report.reattached_provenance_count += step.reattached_provenance_count
                report.time_generalizations.extend(step.time_generalizations)
        report.version_range = (report.version_range[0], store.version)
        return report


def provenance_within(graph: MemoryGraph, concept: NodeId, node_types: Iterable[str],
                      hops: int = 2) -> frozenset[NodeId]:
    """Node ids of the given types within `hops` of a Concept (audit helper)."""
    wanted = set(node_types)
    seen = {concept}
    frontier = {concept}
    for _ in range(hops):
        nxt: set[NodeId] = set()
        for node_id in frontier:
            nxt.update(dst for _rel, dst in graph.out_edges(node_id))
            nxt.update(src for _rel, src in graph.in_edges(node_id))
        frontier = nxt - seen
        seen |= frontier
    return frozenset(n for n in seen if graph.has_node(n) and graph.node(n).type in wanted)
