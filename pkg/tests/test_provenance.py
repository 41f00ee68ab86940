import math
import random
from types import MappingProxyType

import pytest

from gistgraph import (
    Cue,
    Gist,
    GistGraphError,
    MemoryStore,
    NotRecalledError,
    PredicateError,
    TimeValue,
    consolidation_pass,
    embed,
    evaluate_governance,
    generate_propositions,
    governance_signature,
    ingest,
    parse_predicate,
    parse_predicate_file,
    recall,
    source_attribution,
    source_distribution,
)
from gistgraph.recall import WorkingMemory
from gistgraph.schema import CONCEPT, RECOUNTS, SOURCE

from conftest import pools, random_gist


def test_attribution_single_source(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    success = min(wm.concept_ids())
    sources = source_attribution(wm, success)
    assert {wm.nodes[s].name for s in sources} == {"source-a"}


def test_attribution_after_consolidation():
    store = MemoryStore.create()
    gist = Gist("same", [("HAS_SUBJECT", "thing"), ("HAS_ACTION", "move")],
                source_name="src-a", interaction_id="i1")
    twin = Gist("same", [("HAS_SUBJECT", "thing"), ("HAS_ACTION", "move")],
                source_name="src-b", interaction_id="i2")
    ingest(store, gist)
    ingest(store, twin)
    consolidation_pass(store)
    wm = recall(store, Cue(elements=("thing",)))
    (survivor,) = wm.concept_ids()
    names = {wm.nodes[s].name for s in source_attribution(wm, survivor)}
    assert names == {"src-a", "src-b"}


def test_attribution_intersects_recall(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    concept = wm.concept_ids()[0]
    stripped = WorkingMemory(
        nodes=wm.nodes,
        relations=MappingProxyType({
            key: w for key, w in wm.relations.items() if key[1] != RECOUNTS
        }),
        cue=wm.cue,
        version=wm.version,
    )
    assert source_attribution(wm, concept)
    assert source_attribution(stripped, concept) == frozenset()


def test_attribution_errors(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    with pytest.raises(NotRecalledError):
        source_attribution(wm, 10_000)
    element = next(i for i, n in wm.nodes.items() if n.type != CONCEPT)
    with pytest.raises(GistGraphError):
        source_attribution(wm, element)


def test_distribution_single_source_normalizes(jack_jill_gist):
    store = MemoryStore.create()
    ingest(store, jack_jill_gist)
    wm = recall(store, Cue(elements=("water",)))
    dist = source_distribution(wm)
    assert dist.probability_by_name("jack-and-jill-book") == 1.0


def test_distribution_broad_even_split(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    dist = source_distribution(wm)
    assert abs(dist.probability_by_name("source-a") - 0.5) < 1e-9
    assert abs(dist.probability_by_name("source-b") - 0.5) < 1e-9
    assert all(m == 1.0 for m in dist.masses.values())


def test_distribution_narrow_single_source(px_store):
    wm = recall(px_store, Cue(elements=("project-x", "delay"), min_element_overlap=2))
    dist = source_distribution(wm)
    assert abs(dist.probability_by_name("source-b") - 1.0) < 1e-9
    assert dist.probability_by_name("source-a") == 0.0


def test_distribution_empty_recall(px_store):
    wm = recall(px_store, Cue(source_name="nope"))
    dist = source_distribution(wm)
    assert not dist.masses and not dist.probabilities


def test_distribution_normalization_randomized():
    rng = random.Random(47)
    kw = pools("p", elements=10, sources=5, interactions=6)
    for _ in range(8):
        store = MemoryStore.create()
        for _ in range(rng.randint(2, 12)):
            ingest(store, random_gist(rng, **kw))
        wm = recall(store, Cue(elements=tuple(rng.sample(kw["element_pool"], 3))))
        for weighting in ("uniform", "element-weight-sum"):
            dist = source_distribution(wm, weighting)
            if dist.probabilities:
                assert abs(math.fsum(dist.probabilities.values()) - 1.0) < 1e-9


def test_weighting_rank_stable_pre_consolidation(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    uniform = source_distribution(wm, "uniform")
    weighted = source_distribution(wm, "element-weight-sum")

    def ranking(dist):
        return sorted(dist.source_names[o] for o in dist.probabilities
                      if abs(dist.probabilities[o] - max(dist.probabilities.values())) < 1e-12)

    assert ranking(uniform) == ranking(weighted)


def test_element_weight_sum_reflects_consolidation():
    store = MemoryStore.create()
    merged = Gist("dup", [("HAS_SUBJECT", "alpha")], source_name="src-heavy",
                  interaction_id="i1")
    ingest(store, merged)
    ingest(store, Gist("dup", [("HAS_SUBJECT", "alpha")], source_name="src-heavy",
                       interaction_id="i2"))
    # different role, so the typed signature keeps it out of the merge
    ingest(store, Gist("solo", [("HAS_OBJECT", "alpha")], source_name="src-light",
                       interaction_id="i3"))
    consolidation_pass(store)
    wm = recall(store, Cue(elements=("alpha",)))
    dist = source_distribution(wm, "element-weight-sum")
    assert dist.probability_by_name("src-heavy") == pytest.approx(2 / 3, abs=1e-9)
    assert dist.probability_by_name("src-light") == pytest.approx(1 / 3, abs=1e-9)


def test_drift_needs_incidence_change(px_store):
    # versions 2 and 3 recall identical structure under the delay cue
    ingest(px_store, Gist("noise", [("HAS_OBJECT", "unrelated")],
                          source_name="noise-src", interaction_id="noise-int"))
    cue = Cue(elements=("delay",))
    d2 = source_distribution(recall(px_store, cue, at_version=2))
    d3 = source_distribution(recall(px_store, cue, at_version=3))
    assert dict(d2.probabilities) == dict(d3.probabilities)


def test_governance_fixture_predicates(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    requires = parse_predicate("requires-source(source-a)")
    too_many = parse_predicate("min-concepts(3)")
    signature = governance_signature(wm, [requires, too_many])
    assert requires in signature and too_many not in signature
    assert governance_signature(wm, []) == frozenset()


def test_governance_all_kinds(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    report = evaluate_governance(wm, parse_predicate_file([
        "requires-source(source-a)",
        "excludes-source(source-zzz)",
        "min-provenance-count(2)",
        "min-concepts(2)",
        "max-event-age(365d,2026-06-01)",
        "# comment line",
    ]))
    assert len(report.satisfied) == 5 and not report.unsatisfied and not report.errors


def test_governance_malformed_parameters_recorded(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    report = evaluate_governance(wm, [
        parse_predicate("min-concepts(nope)"),
        parse_predicate("max-event-age(1y,2026-01-01)"),
        parse_predicate("requires-source(source-a)"),
    ])
    assert len(report.errors) == 2 and len(report.satisfied) == 1


def test_governance_unknown_kind_rejected_at_parse():
    with pytest.raises(PredicateError):
        parse_predicate("frobnicate(1)")
    with pytest.raises(PredicateError):
        parse_predicate("requires-source source-a")


def test_max_event_age_fails_closed_without_grounding(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    stale = parse_predicate("max-event-age(10d,2026-06-01)")
    assert stale not in governance_signature(wm, [stale])


def test_proposition_fixture_text(jack_jill_gist):
    store = MemoryStore.create()
    ingest(store, jack_jill_gist)
    wm = recall(store, Cue(elements=("water",)))
    (prop,) = generate_propositions(wm, limit=1)
    assert prop.text == "jack and jill fetch water (fresh) at 2000-01-01 per jack-and-jill-book"
    assert prop.source_names == ("jack-and-jill-book",)
    assert prop.time_summary == "2000-01-01"


def test_propositions_cover_both_episodes(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    props = generate_propositions(wm, limit=5)
    joined = " | ".join(p.text for p in props)
    assert "succeed" in joined and "delay" in joined
    assert {p.source_names for p in props} == {("source-a",), ("source-b",)}


def test_propositions_empty_recall(px_store):
    assert generate_propositions(recall(px_store, Cue(source_name="nope")), limit=3) == []


def test_propositions_limit_and_salience(px_store, jack_jill_gist):
    ingest(px_store, jack_jill_gist)
    wm = recall(px_store, Cue(elements=("project-x", "water"),))
    props = generate_propositions(wm, limit=1)
    assert len(props) == 1
    # jack & jill has the highest degree (9 incident edges)
    assert "fetch" in props[0].text


def test_propositions_audit_invariants(px_store):
    wm = recall(px_store, Cue(elements=("project-x",)))
    concepts = set(wm.concept_ids())
    for prop in generate_propositions(wm, limit=10):
        assert set(prop.supporting_concepts) <= concepts
        for concept in prop.supporting_concepts:
            attributed = {wm.nodes[s].name for s in source_attribution(wm, concept)}
            assert set(prop.source_names) <= attributed


def test_propositions_fallback_without_action():
    store = MemoryStore.create()
    ingest(store, Gist("status", [("HAS_SUBJECT", "project-x"), ("HAS_OBJECT", "success")],
                       source_name="s", interaction_id="i"))
    wm = recall(store, Cue(elements=("project-x",)))
    (prop,) = generate_propositions(wm, limit=1)
    assert prop.text.startswith("project-x — success")


def test_propositions_embedding_tiebreak(px_store):
    wm = recall(px_store, Cue(elements=("delay",)))
    z = embed(wm)
    assert generate_propositions(wm, z, limit=2) == generate_propositions(wm, z, limit=2)


def test_operations_are_pure(px_store):
    digest = px_store.content_digest()
    wm = recall(px_store, Cue(elements=("project-x",)))
    source_distribution(wm, "element-weight-sum")
    governance_signature(wm, [parse_predicate("min-concepts(1)")])
    generate_propositions(wm, limit=5)
    assert px_store.content_digest() == digest
