"""gistgraph: an embeddable episodic memory graph engine.

Memory is a schema-constrained typed graph that only ever grows through gist
ingestion, reorganizes only through provenance-preserving consolidation, and
is read through cue-conditioned recall of transient working-memory subgraphs.
Post-recall analysis (structural surprise, source attribution, governance
auditing, proposition generation) operates on recalled structure alone.
"""

from .errors import (
    ConsolidationError,
    CorruptLogError,
    DomainRestrictionError,
    GistGraphError,
    IncomparableError,
    InvalidCueError,
    InvalidGistError,
    InvalidNameError,
    InvalidParametersError,
    InvalidTimeError,
    NotRecalledError,
    SchemaViolationError,
    StoreBusyError,
    VersionRangeError,
)
from .graph import MemoryGraph, Node, NodeId, NodeResolver, canonical_name
from .ingest import (
    Gist,
    IngestStreamResult,
    InteractionReceipt,
    gist_from_json,
    gist_to_json,
    ingest,
    ingest_stream,
    parse_gist_lines,
)
from .journal import Record
from .schema import (
    ACQUIRED_AT,
    CONCEPT,
    CONCEPT_ELEMENT_RELATIONS,
    CORE_NODE_TYPES,
    ELEMENT,
    HAS_ACTION,
    HAS_OBJECT,
    HAS_SUBJECT,
    INTERACTION,
    MODIFY_ACTION,
    MODIFY_OBJECT,
    MODIFY_SUBJECT,
    OCCURRED_AT,
    PART_OF,
    RECOUNTS,
    SOURCE,
    TIME,
    Schema,
    SchemaBuilder,
    ValidationReport,
    build_default_schema,
    validate_graph,
)
from .analyze import (
    EmbedParams,
    EmbeddingSpace,
    SurpriseReport,
    embed,
    embedding_divergence,
    local_divergence,
    surprise,
)
from .consolidate import (
    ConsolidationReport,
    consolidate_pair,
    consolidation_pass,
    element_signature,
    find_equivalent_pairs,
)
from .provenance import (
    GovernancePredicate,
    GovernanceReport,
    PredicateError,
    Proposition,
    SourceDistribution,
    evaluate_governance,
    generate_propositions,
    governance_signature,
    parse_predicate,
    parse_predicate_file,
    source_attribution,
    source_distribution,
)
from .recall import (
    Cue,
    TraceEntry,
    TraceReport,
    WorkingMemory,
    contains,
    cue_from_json,
    recall,
    recall_trace,
)
from .store import MemoryStore, replay
from .timevalues import TimeValue

__version__ = "0.1.0"
