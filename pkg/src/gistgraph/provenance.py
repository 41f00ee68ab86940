"""Provenance observables, governance auditing, and proposition generation
over recalled structure.

Source mass: each recalled Concept contributes its weight to every source
that recounts it inside the working memory. The default weight is uniform
(1 per Concept); `element-weight-sum` weighs a Concept by its total
Concept-to-Element edge weight, which is where consolidation evidence shows
up. A multi-source Concept contributes its full weight to each of its
sources, so the raw masses can exceed total weight; normalization absorbs
that.

Governance predicates are total boolean functions of a working memory,
written `kind(arg,...)` one per line in predicate files.

Propositions are deterministic template realizations of recalled Concepts,
never persisted: "<subjects> <action> <object> (modifiers) at <time> per
<sources>", ranked by Concept degree inside the recall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import timedelta
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .analyze import EmbeddingSpace
from .errors import GistGraphError, InvalidParametersError, NotRecalledError
from .graph import NodeId, canonical_name
from .recall import Cue, WorkingMemory
from .schema import (
    ACQUIRED_AT,
    CONCEPT,
    ELEMENT,
    HAS_ACTION,
    HAS_OBJECT,
    HAS_SUBJECT,
    MODIFY_ACTION,
    MODIFY_OBJECT,
    MODIFY_SUBJECT,
    OCCURRED_AT,
    RECOUNTS,
    SOURCE,
)
from .timevalues import TimeValue

PROBABILITY_TOLERANCE = 1e-9

UNIFORM = "uniform"
ELEMENT_WEIGHT_SUM = "element-weight-sum"


class PredicateError(GistGraphError):
    """A governance predicate has malformed parameters."""


def source_attribution(wm: WorkingMemory, v: NodeId) -> frozenset[NodeId]:
    """Source nodes recounting Concept v inside the recalled subgraph."""
    if v not in wm.nodes:
        raise NotRecalledError(f"node {v} is not in the recalled subgraph")
    if wm.nodes[v].type != CONCEPT:
        raise GistGraphError(f"node {v} is {wm.nodes[v].type}, not Concept")
    return frozenset(
        src for (src, rel, dst) in wm.relations
        if dst == v and rel == RECOUNTS and wm.nodes[src].type == SOURCE
    )


@dataclass(frozen=True)
class SourceDistribution:
    cue: "Cue"
    version: int
    weighting: str
    masses: Mapping[NodeId, float]
    probabilities: Mapping[NodeId, float]
    source_names: Mapping[NodeId, str]

    def probability_by_name(self, name: str) -> float:
        wanted = canonical_name(name)
        for source_id, source_name in self.source_names.items():
            if source_name == wanted:
                return self.probabilities.get(source_id, 0.0)
        return 0.0

    def render(self) -> str:
        if not self.masses:
            return f"no sources recalled (weighting={self.weighting})"
        lines = [f"weighting: {self.weighting}"]
        by_name = sorted((self.source_names[o], o) for o in self.masses)
        for name, o in by_name:
            lines.append(f"source {name} mass={self.masses[o]!r} p={self.probabilities[o]!r}")
        return "\n".join(lines)


def _concept_weight(wm: WorkingMemory, concept: NodeId, weighting: str) -> float:
    if weighting == UNIFORM:
        return 1.0
    if weighting == ELEMENT_WEIGHT_SUM:
        return math.fsum(
            weight for (src, _rel, dst), weight in wm.relations.items()
            if src == concept and wm.nodes[dst].type == ELEMENT
        )
    raise InvalidParametersError(f"unknown weighting: {weighting!r}")


def source_distribution(wm: WorkingMemory, weighting: str = UNIFORM) -> SourceDistribution:
    """Cue-conditioned source mass and its normalized distribution."""
    masses: dict[NodeId, float] = {}
    for concept in wm.concept_ids():
        weight = _concept_weight(wm, concept, weighting)
        for source in source_attribution(wm, concept):
            masses[source] = masses.get(source, 0.0) + weight
    total = math.fsum(masses.values())
    probabilities = {o: m / total for o, m in masses.items()} if total > 0 else {}
    names = {o: wm.nodes[o].name for o in masses}
    return SourceDistribution(
        cue=wm.cue,
        version=wm.version,
        weighting=weighting,
        masses=MappingProxyType(masses),
        probabilities=MappingProxyType(probabilities),
        source_names=MappingProxyType(names),
    )


# -- governance ---------------------------------------------------------------

@dataclass(frozen=True)
class GovernancePredicate:
    kind: str
    args: tuple[str, ...] = ()

    def render(self) -> str:
        return f"{self.kind}({','.join(self.args)})"


def parse_predicate(text: str) -> GovernancePredicate:
    text = text.strip()
    if not text.endswith(")") or "(" not in text:
        raise PredicateError(f"bad predicate syntax: {text!r}")
    kind, _, arg_text = text[:-1].partition("(")
    kind = kind.strip()
    if kind not in _EVALUATORS:
        raise PredicateError(f"unknown predicate kind: {kind!r}")
    args = tuple(a.strip() for a in arg_text.split(",")) if arg_text.strip() else ()
    return GovernancePredicate(kind=kind, args=args)


def parse_predicate_file(lines: Iterable[str]) -> list[GovernancePredicate]:
    predicates = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        predicates.append(parse_predicate(stripped))
    return predicates


def _want_args(pred: GovernancePredicate, n: int) -> tuple[str, ...]:
    if len(pred.args) != n:
        raise PredicateError(f"{pred.kind} takes {n} argument(s), got {len(pred.args)}")
    return pred.args


def _int_arg(pred: GovernancePredicate, text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise PredicateError(f"{pred.kind}: not an integer: {text!r}") from None
    if value < 0:
        raise PredicateError(f"{pred.kind}: argument must be non-negative")
    return value


def _duration_arg(pred: GovernancePredicate, text: str) -> timedelta:
    if not text.endswith("d"):
        raise PredicateError(f"{pred.kind}: duration must look like '365d', got {text!r}")
    return timedelta(days=_int_arg(pred, text[:-1]))


def _eval_requires_source(pred: GovernancePredicate, wm: WorkingMemory) -> bool:
    (name,) = _want_args(pred, 1)
    return canonical_name(name) in wm.names_of_type(SOURCE)


def _eval_excludes_source(pred: GovernancePredicate, wm: WorkingMemory) -> bool:
    (name,) = _want_args(pred, 1)
    return canonical_name(name) not in wm.names_of_type(SOURCE)


def _eval_max_event_age(pred: GovernancePredicate, wm: WorkingMemory) -> bool:
    duration_text, reference_text = _want_args(pred, 2)
    duration = _duration_arg(pred, duration_text)
    try:
        reference = TimeValue.parse(reference_text)
    except GistGraphError as exc:
        raise PredicateError(f"{pred.kind}: bad reference time: {exc}") from exc
    for concept in wm.concept_ids():
        values = _concept_times(wm, concept) or _acquired_times(wm, concept)
        # A concept without temporal grounding cannot certify freshness.
        if not values:
            return False
        latest = max(v.end for v in values)
        if reference.start - latest > duration:
            return False
    return True


def _eval_min_provenance_count(pred: GovernancePredicate, wm: WorkingMemory) -> bool:
    (n,) = _want_args(pred, 1)
    return len(wm.names_of_type(SOURCE)) >= _int_arg(pred, n)


def _eval_min_concepts(pred: GovernancePredicate, wm: WorkingMemory) -> bool:
    (n,) = _want_args(pred, 1)
    return len(wm.concept_ids()) >= _int_arg(pred, n)


_EVALUATORS = {
    "requires-source": _eval_requires_source,
    "excludes-source": _eval_excludes_source,
    "max-event-age": _eval_max_event_age,
    "min-provenance-count": _eval_min_provenance_count,
    "min-concepts": _eval_min_concepts,
}


@dataclass(frozen=True)
class GovernanceReport:
    satisfied: tuple[GovernancePredicate, ...]
    unsatisfied: tuple[GovernancePredicate, ...]
    errors: tuple[tuple[GovernancePredicate, str], ...]

    def render(self) -> str:
        lines = []
        for pred in self.satisfied:
            lines.append(f"SATISFIED   {pred.render()}")
        for pred in self.unsatisfied:
            lines.append(f"UNSATISFIED {pred.render()}")
        for pred, message in self.errors:
            lines.append(f"ERROR       {pred.render()}: {message}")
        return "\n".join(lines) if lines else "no predicates"


def evaluate_governance(wm: WorkingMemory,
                        predicates: Iterable[GovernancePredicate]) -> GovernanceReport:
    satisfied, unsatisfied, errors = [], [], []
    for pred in predicates:
        try:
            (satisfied if _EVALUATORS[pred.kind](pred, wm) else unsatisfied).append(pred)
        except PredicateError as exc:
            errors.append((pred, str(exc)))
    return GovernanceReport(tuple(satisfied), tuple(unsatisfied), tuple(errors))


def governance_signature(wm: WorkingMemory,
                         predicates: Iterable[GovernancePredicate]) -> frozenset[GovernancePredicate]:
    """The subset of predicates the recalled subgraph satisfies."""
    return frozenset(evaluate_governance(wm, predicates).satisfied)


# -- propositions ------------------------------------------------------------

@dataclass(frozen=True)
class Proposition:
    text: str
    supporting_concepts: tuple[NodeId, ...]
    source_names: tuple[str, ...]
    time_summary: str | None
    salience: float

    def audit_line(self) -> str:
        ids = ",".join(str(c) for c in self.supporting_concepts)
        return f"supports: {ids}; sources: {', '.join(self.source_names)}"


def _concept_times(wm: WorkingMemory, concept: NodeId) -> list[TimeValue]:
    return sorted(
        wm.nodes[dst].time_value
        for (src, rel, dst) in wm.relations
        if src == concept and rel == OCCURRED_AT
    )


def _acquired_times(wm: WorkingMemory, concept: NodeId) -> list[TimeValue]:
    return sorted(
        wm.nodes[dst].time_value
        for (src, rel, dst) in wm.relations
        if src == concept and rel == ACQUIRED_AT
    )


def _role_names(wm: WorkingMemory, concept: NodeId, role: str) -> list[str]:
    return sorted(
        wm.nodes[dst].name for (src, rel, dst) in wm.relations
        if src == concept and rel == role
    )


def _realize(wm: WorkingMemory, concept: NodeId) -> tuple[str, str | None, tuple[str, ...]]:
    subjects = _role_names(wm, concept, HAS_SUBJECT)
    actions = _role_names(wm, concept, HAS_ACTION)
    objects = _role_names(wm, concept, HAS_OBJECT)
    mod_subject = _role_names(wm, concept, MODIFY_SUBJECT)
    mod_action = _role_names(wm, concept, MODIFY_ACTION)
    mod_object = _role_names(wm, concept, MODIFY_OBJECT)

    def with_mods(names: list[str], mods: list[str]) -> str:
        text = " and ".join(names)
        if text and mods:
            text += f" ({', '.join(mods)})"
        return text

    subject_text = with_mods(subjects, mod_subject)
    action_text = with_mods(actions, mod_action)
    object_text = with_mods(objects, mod_object)

    if actions:
        main = " ".join(part for part in (subject_text, action_text, object_text) if part)
    else:
        # no action: fall back to the subjects/objects dash form
        if object_text:
            tail_text = object_text
        else:
            used = set(subjects) | set(mod_subject)
            leftovers = sorted(
                wm.nodes[dst].name for (src, _rel, dst) in wm.relations
                if src == concept and wm.nodes[dst].type == ELEMENT
                and wm.nodes[dst].name not in used
            )
            tail_text = ", ".join(leftovers) if leftovers else wm.nodes[concept].name
        main = f"{subject_text} — {tail_text}" if subject_text else tail_text

    times = _concept_times(wm, concept)
    time_summary = ", ".join(v.render() for v in times) if times else None
    if time_summary:
        main += f" at {time_summary}"
    sources = tuple(sorted(wm.nodes[s].name for s in source_attribution(wm, concept)))
    if sources:
        main += f" per {' and '.join(sources)}"
    return main, time_summary, sources


def generate_propositions(wm: WorkingMemory, z: EmbeddingSpace | None = None,
                          limit: int = 10) -> list[Proposition]:
    """Realize one proposition per recalled Concept; top `limit` by salience.

    Salience is the Concept's degree inside the recall; with an embedding
    space supplied, equal-degree Concepts order by distance to the centroid
    of the cue's element vectors, then by recency.
    """
    if limit < 1:
        raise InvalidParametersError("limit must be at least 1")

    degree: dict[NodeId, int] = {}
    for src, _rel, dst in wm.relations:
        for endpoint in (src, dst):
            if endpoint in wm.nodes and wm.nodes[endpoint].type == CONCEPT:
                degree[endpoint] = degree.get(endpoint, 0) + 1

    centroid = None
    if z is not None and wm.cue.elements:
        cue_vectors = [
            z.vectors[node.id] for node in wm.nodes.values()
            if node.type == ELEMENT and node.name in wm.cue.elements and node.id in z.vectors
        ]
        if cue_vectors:
            centroid = np.mean(cue_vectors, axis=0)

    def sort_key(concept: NodeId):
        distance = 0.0
        if centroid is not None and concept in z.vectors:
            distance = float(np.linalg.norm(z.vectors[concept] - centroid))
        return (-degree.get(concept, 0), distance, -concept)

    ranked = sorted(wm.concept_ids(), key=sort_key)
    propositions = []
    for concept in ranked[:limit]:
        text, time_summary, sources = _realize(wm, concept)
        propositions.append(Proposition(
            text=text,
            supporting_concepts=(concept,),
            source_names=sources,
            time_summary=time_summary,
            salience=float(degree.get(concept, 0)),
        ))
    return propositions
