"""The fixed relational grammar: typed nodes, a closed relation vocabulary,
and type-pair admissibility.

Core node types are Concept, Element, Time, Interaction, and Source.
Concepts anchor one remembered episode each; Elements carry its role-typed
content; Time, Interaction, and Source nodes ground it temporally,
episodically, and in provenance. The default relation vocabulary:

    Concept -> Element      HAS_SUBJECT, HAS_ACTION, HAS_OBJECT,
                            MODIFY_SUBJECT, MODIFY_ACTION, MODIFY_OBJECT
    Concept -> Time         OCCURRED_AT (event time), ACQUIRED_AT (ingest time)
    Concept -> Interaction  PART_OF
    Source  -> Concept      RECOUNTS

Extension dimensions (say Emotion with HAS_EMOTION) may be registered when
a store is created; after that the grammar is frozen for the store's whole
life. Admissibility is total: any type pair not declared admits nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, TYPE_CHECKING

from .errors import SchemaViolationError

if TYPE_CHECKING:
    from .graph import MemoryGraph

CONCEPT = "Concept"
ELEMENT = "Element"
TIME = "Time"
INTERACTION = "Interaction"
SOURCE = "Source"

CORE_NODE_TYPES = (CONCEPT, ELEMENT, TIME, INTERACTION, SOURCE)

HAS_SUBJECT = "HAS_SUBJECT"
HAS_ACTION = "HAS_ACTION"
HAS_OBJECT = "HAS_OBJECT"
MODIFY_SUBJECT = "MODIFY_SUBJECT"
MODIFY_ACTION = "MODIFY_ACTION"
MODIFY_OBJECT = "MODIFY_OBJECT"
OCCURRED_AT = "OCCURRED_AT"
ACQUIRED_AT = "ACQUIRED_AT"
PART_OF = "PART_OF"
RECOUNTS = "RECOUNTS"

CONCEPT_ELEMENT_RELATIONS = (
    HAS_SUBJECT, HAS_ACTION, HAS_OBJECT,
    MODIFY_SUBJECT, MODIFY_ACTION, MODIFY_OBJECT,
)

# Context types ground a Concept rather than carry its content; gist element
# entries may never target them.
CONTEXT_NODE_TYPES = frozenset({CONCEPT, TIME, INTERACTION, SOURCE})

_DEFAULT_ADMISSIBILITY = {
    (CONCEPT, ELEMENT): frozenset(CONCEPT_ELEMENT_RELATIONS),
    (CONCEPT, TIME): frozenset({OCCURRED_AT, ACQUIRED_AT}),
    (CONCEPT, INTERACTION): frozenset({PART_OF}),
    (SOURCE, CONCEPT): frozenset({RECOUNTS}),
}


@dataclass(frozen=True)
class Schema:
    """Immutable grammar: vocabularies plus the admissibility map.

    Safe to share across threads; construct through `SchemaBuilder` or
    `build_default_schema`.
    """

    node_types: frozenset[str]
    relation_types: frozenset[str]
    admissibility: Mapping[tuple[str, str], frozenset[str]]

    def check_node_type(self, tag: str) -> None:
        if tag not in self.node_types:
            raise SchemaViolationError(f"unknown node type: {tag!r}")

    def check_relation_type(self, tag: str) -> None:
        if tag not in self.relation_types:
            raise SchemaViolationError(f"unknown relation type: {tag!r}")

    def permitted(self, src_type: str, dst_type: str) -> frozenset[str]:
        """Relation types admitted from src_type to dst_type (empty if undeclared)."""
        self.check_node_type(src_type)
        self.check_node_type(dst_type)
        return self.admissibility.get((src_type, dst_type), frozenset())

    def admissible(self, src_type: str, dst_type: str, rel: str) -> bool:
        """True iff rel may connect a src_type node to a dst_type node."""
        self.check_relation_type(rel)
        return rel in self.permitted(src_type, dst_type)

    def is_unique_type(self, node_type: str) -> bool:
        """Name-based uniqueness holds for every type except Concept."""
        self.check_node_type(node_type)
        return node_type != CONCEPT

    def gist_target_type(self, rel: str) -> str:
        """The node type a gist element entry with this relation creates.

        Exactly the non-context types reachable from Concept qualify; a
        relation whose only destinations are context types (e.g. ACQUIRED_AT)
        is not a gist element relation.
        """
        self.check_relation_type(rel)
        targets = [
            dst for (src, dst), rels in self.admissibility.items()
            if src == CONCEPT and rel in rels and dst not in CONTEXT_NODE_TYPES
        ]
        if len(targets) != 1:
            raise SchemaViolationError(
                f"{rel} is not a gist element relation (Concept-to-content)"
            )
        return targets[0]

    def to_document(self) -> str:
        """Serialize as the versioned text block embedded in store headers."""
        lines = ["SCHEMA 1"]
        for tag in sorted(self.node_types):
            lines.append(f"NODETYPE {tag}")
        for tag in sorted(self.relation_types):
            lines.append(f"RELTYPE {tag}")
        for (src, dst) in sorted(self.admissibility):
            for rel in sorted(self.admissibility[(src, dst)]):
                lines.append(f"ADMIT {src} {rel} {dst}")
        return "\n".join(lines)

    @classmethod
    def from_document(cls, text: str) -> "Schema":
        node_types: set[str] = set()
        relation_types: set[str] = set()
        admissibility: dict[tuple[str, str], set[str]] = {}
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "SCHEMA 1":
            raise SchemaViolationError("bad schema document header")
        for line in lines[1:]:
            kind, _, rest = line.partition(" ")
            if kind == "NODETYPE":
                node_types.add(rest)
            elif kind == "RELTYPE":
                relation_types.add(rest)
            elif kind == "ADMIT":
                try:
                    src, rel, dst = rest.split(" ")
                except ValueError as exc:
                    raise SchemaViolationError(f"bad ADMIT line: {line!r}") from exc
                admissibility.setdefault((src, dst), set()).add(rel)
            else:
                raise SchemaViolationError(f"bad schema document line: {line!r}")
        return cls(
            node_types=frozenset(node_types),
            relation_types=frozenset(relation_types),
            admissibility=MappingProxyType(
                {pair: frozenset(rels) for pair, rels in admissibility.items()}
            ),
        )


class SchemaBuilder:
    """Assembles a schema before the store freezes it.

    The five core types and the default vocabulary are always present.
    `build()` closes the builder; registering a dimension afterwards is an
    error, mirroring the rule that the grammar is fixed at store creation.
    """

    def __init__(self):
        self._node_types = set(CORE_NODE_TYPES)
        self._relation_types = {rel for rels in _DEFAULT_ADMISSIBILITY.values() for rel in rels}
        self._admissibility = {pair: set(rels) for pair, rels in _DEFAULT_ADMISSIBILITY.items()}
        self._frozen = False

    def add_dimension(self, node_type: str, relation: str) -> "SchemaBuilder":
        """Register an extension dimension, e.g. ("Emotion", "HAS_EMOTION")."""
        if self._frozen:
            raise SchemaViolationError("schema is frozen; dimensions register only at store creation")
        node_type = node_type.strip()
        relation = relation.strip()
        if not node_type or not relation:
            raise SchemaViolationError("dimension tags must be non-empty")
        if node_type in self._node_types:
            raise SchemaViolationError(f"node type already registered: {node_type!r}")
        if relation in self._relation_types:
            raise SchemaViolationError(f"relation type already registered: {relation!r}")
        self._node_types.add(node_type)
        self._relation_types.add(relation)
        self._admissibility[(CONCEPT, node_type)] = {relation}
        return self

    def build(self) -> Schema:
        if self._frozen:
            raise SchemaViolationError("schema builder already frozen")
        self._frozen = True
        used = {rel for rels in self._admissibility.values() for rel in rels}
        dangling = self._relation_types - used
        if dangling:
            raise SchemaViolationError(f"relation types in no admissibility cell: {sorted(dangling)}")
        return Schema(
            node_types=frozenset(self._node_types),
            relation_types=frozenset(self._relation_types),
            admissibility=MappingProxyType(
                {pair: frozenset(rels) for pair, rels in self._admissibility.items()}
            ),
        )


def build_default_schema(dimensions: Iterable[tuple[str, str]] = ()) -> Schema:
    builder = SchemaBuilder()
    for node_type, relation in dimensions:
        builder.add_dimension(node_type, relation)
    return builder.build()


@dataclass
class ValidationReport:
    """Violations found by sweeping a graph against its schema."""

    relation_violations: list[tuple[int, int, str, str]] = field(default_factory=list)
    node_violations: list[tuple[int, str]] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.relation_violations and not self.node_violations

    def render(self) -> str:
        if self.is_empty:
            return "ok: graph conforms to schema"
        lines = []
        for node_id, reason in self.node_violations:
            lines.append(f"node {node_id}: {reason}")
        for src, dst, rel, reason in self.relation_violations:
            lines.append(f"relation {src} {rel} {dst}: {reason}")
        return "\n".join(lines)


def validate_graph(schema: Schema, graph: "MemoryGraph") -> ValidationReport:
    """Sweep every node and relation; violations are report entries, never raises."""
    report = ValidationReport()
    for node in graph.nodes():
        if node.type not in schema.node_types:
            report.node_violations.append((node.id, f"unknown node type {node.type!r}"))
    for src, rel, dst, _weight in graph.relations():
        src_node = graph.node(src)
        dst_node = graph.node(dst)
        if src_node.type not in schema.node_types or dst_node.type not in schema.node_types:
            report.relation_violations.append((src, dst, rel, "endpoint has unknown type"))
            continue
        if rel not in schema.relation_types:
            report.relation_violations.append((src, dst, rel, f"unknown relation type {rel!r}"))
            continue
        if rel not in schema.admissibility.get((src_node.type, dst_node.type), frozenset()):
            report.relation_violations.append(
                (src, dst, rel, f"{rel} not admissible from {src_node.type} to {dst_node.type}")
            )
    return report
