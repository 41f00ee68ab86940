"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Every tolerance is pinned
here; randomized checks use fixed seeds so failures reproduce exactly.
"""

from __future__ import annotations

import io
import json
import math
import random
import time
from contextlib import redirect_stdout

import pytest

from gistgraph import (
    Cue,
    DomainRestrictionError,
    EmbedParams,
    Gist,
    MemoryStore,
    TimeValue,
    consolidation_pass,
    contains,
    element_signature,
    embed,
    generate_propositions,
    ingest,
    local_divergence,
    recall,
    replay,
    source_attribution,
    source_distribution,
    surprise,
    validate_graph,
)
from gistgraph.cli import main as cli_main
from gistgraph.consolidate import provenance_within
from gistgraph.graph import Node
from gistgraph.journal import LOG_FILENAME
from gistgraph.recall import WorkingMemory
from gistgraph.schema import CONCEPT, ELEMENT, INTERACTION, SOURCE, TIME

from conftest import pools, random_gist

PROBABILITY_TOLERANCE = 1e-9


def _report(criterion: str, started: float, budget: float) -> None:
    elapsed = time.perf_counter() - started
    print(f"PASS {criterion} ({elapsed:.1f}s, budget {budget:.0f}s)")
    assert elapsed < budget


def _relation_keys(graph):
    return {(s, r, d) for s, r, d, _ in graph.relations()}


def test_criterion_1_additive_persistence():
    """Prop 1: node and relation sets only grow; episodes stay intact."""
    started = time.perf_counter()
    rng = random.Random(101)
    histories, gists_per_history = 200, 1000
    for h in range(histories):
        store = MemoryStore.create()
        kw = pools(f"h{h}", elements=40, sources=6, interactions=25)
        checkpoints = set(rng.sample(range(1, gists_per_history + 1), 4))
        sampled_version = rng.randint(1, gists_per_history)
        captured: list[tuple[set, set]] = []
        for i in range(1, gists_per_history + 1):
            ingest(store, random_gist(rng, **kw))
            if i in checkpoints:
                captured.append((set(store.graph.node_ids()), _relation_keys(store.graph)))
        final_nodes = set(store.graph.node_ids())
        final_rels = _relation_keys(store.graph)
        captured.append((final_nodes, final_rels))
        for a in range(len(captured)):
            for b in range(a + 1, len(captured)):
                assert captured[a][0] <= captured[b][0]
                assert captured[a][1] <= captured[b][1]
        # the sampled interaction's batch, exactly as committed, still exists
        record = store.records()[sampled_version - 1]
        for node_id, node_type, name in record.body["nodes"]:
            node = store.graph.node(node_id)
            assert node.type == node_type and node.name == name
        for src, rel, dst in record.body["rels"]:
            assert store.graph.has_relation(src, rel, dst)
    _report("criterion 1 (additive persistence, 200x1000)", started, 60.0)


def test_criterion_2_provenance_preservation():
    """Prop 2: consolidation keeps sources, interactions, mass, and schema."""
    started = time.perf_counter()
    rng = random.Random(202)
    for trial in range(30):
        store = MemoryStore.create()
        kw = pools(f"p{trial}", elements=12, sources=5, interactions=10)
        for _ in range(15):
            gist = random_gist(rng, **kw)
            ingest(store, gist)
            for _ in range(rng.choice((0, 1, 1, 2, 3))):  # plant equivalent twins
                twin = Gist(gist.concept_label, gist.elements,
                            event_time=TimeValue.parse(f"2026-01-{rng.randint(1, 28):02d}"),
                            acquisition_time=TimeValue.parse(f"2026-02-{rng.randint(1, 28):02d}"),
                            source_name=rng.choice(kw["source_pool"]),
                            interaction_id=rng.choice(kw["interaction_pool"]))
                ingest(store, twin)
        graph = store.graph
        pre_reach = {c: provenance_within(graph, c, (SOURCE, INTERACTION))
                     for c in graph.concept_ids()}

        def mass_by_class(g):
            masses = {}
            for concept in g.concept_ids():
                bucket = masses.setdefault(element_signature(g, concept), {})
                for rel, dst in g.out_edges(concept):
                    if g.node(dst).type == ELEMENT:
                        key = (rel, dst)
                        bucket[key] = bucket.get(key, 0.0) + g.weight(concept, rel, dst)
            return masses

        pre_mass = mass_by_class(graph)
        report = consolidation_pass(store, generalize_times=bool(trial % 2))
        # (i) Source/Interaction reachability is a superset, exactly
        for concept, reachable in pre_reach.items():
            survivor = graph.survivor_of(concept)
            assert reachable <= provenance_within(graph, survivor, (SOURCE, INTERACTION))
        # (ii) every generalization covers all replaced instants
        for old_ids, new_id in report.time_generalizations:
            for old in old_ids:
                assert graph.node(new_id).time_value.covers(graph.node(old).time_value)
        # (iii) per-element weight mass conservation, exactly
        assert mass_by_class(graph) == pre_mass
        # (iv) schema conformance
        assert validate_graph(store.schema, graph).is_empty
    _report("criterion 2 (provenance preservation under consolidation)", started, 30.0)


def test_criterion_3_surprise_locality():
    """Prop 3: cue-disjoint growth leaves surprise bit-identical."""
    started = time.perf_counter()
    rng = random.Random(303)
    triples = 0
    for config in range(10):
        base_kw = pools(f"b{config}", elements=10, sources=3, interactions=6)
        noise_kw = pools(f"n{config}", elements=10, sources=3, interactions=6)
        base = [random_gist(rng, **base_kw) for _ in range(12)]
        t1 = rng.randint(2, 6)

        plain = MemoryStore.create()
        for gist in base:
            ingest(plain, gist)
        padded = MemoryStore.create()
        noise_budget = 100
        for i, gist in enumerate(base, start=1):
            ingest(padded, gist)
            if i > t1 and noise_budget > 0:
                chunk = min(noise_budget, 100 // (len(base) - t1) + 1)
                for _ in range(chunk):
                    ingest(padded, random_gist(rng, **noise_kw))
                noise_budget -= chunk
        assert padded.version == plain.version + 100

        for _ in range(10):
            cue = Cue(elements=tuple(rng.sample(base_kw["element_pool"], rng.randint(1, 2))))
            operator = rng.choice(("nbr", "emb"))
            report_plain = surprise(plain, cue, t1, plain.version, operator)
            report_padded = surprise(padded, cue, t1, padded.version, operator)
            assert report_plain.render_body() == report_padded.render_body()
            assert report_plain.aggregate == report_padded.aggregate
            triples += 1
    assert triples == 100
    _report("criterion 3 (surprise locality, 100 triples)", started, 60.0)


def test_criterion_4_recall_axioms(px_store):
    started = time.perf_counter()
    rng = random.Random(404)

    # R1 + R5 over 1,000 randomized recalls
    recalls_done = 0
    for trial in range(20):
        store = MemoryStore.create()
        kw = pools(f"r{trial}", elements=15, sources=4, interactions=8)
        for _ in range(rng.randint(10, 40)):
            ingest(store, random_gist(rng, **kw))
        node_ids = set(store.graph.node_ids())
        rel_keys = _relation_keys(store.graph)
        digest = store.content_digest()
        for _ in range(50):
            cue = Cue(
                elements=tuple(rng.sample(kw["element_pool"], rng.randint(1, 3))),
                source_name=rng.choice(kw["source_pool"]) if rng.random() < 0.25 else None,
                max_concepts=rng.choice([None, 1, 3]),
            )
            wm = recall(store, cue)
            assert set(wm.nodes) <= node_ids and set(wm.relations) <= rel_keys  # R1
            if cue.max_concepts is not None:
                assert len(wm.concept_ids()) <= cue.max_concepts  # R4 cap
            if len(wm.concept_ids()) < len(list(store.graph.concept_ids())):
                assert len(wm.nodes) < store.graph.node_count()  # R4 boundedness
            assert store.content_digest() == digest  # R5
            recalls_done += 1

            narrowed = Cue(
                elements=cue.elements,
                min_element_overlap=cue.min_element_overlap,
                source_name=cue.source_name or rng.choice(kw["source_pool"]),
                max_concepts=None,
            )
            broad_uncapped = Cue(elements=cue.elements, source_name=cue.source_name)
            assert contains(recall(store, narrowed), recall(store, broad_uncapped))
    assert recalls_done == 1000

    # R2: a cue assembled from a live concept's own context must hit it
    for trial in range(20):
        store = MemoryStore.create()
        kw = pools(f"s{trial}", elements=12, sources=3, interactions=6)
        gists = [random_gist(rng, **kw) for _ in range(10)]
        for gist in gists:
            ingest(store, gist)
        target = rng.choice(gists)
        cue = Cue(elements=(target.elements[0][1],), source_name=target.source_name)
        assert not recall(store, cue).is_empty

    # R3 witnessed on the two-episode fixture
    broad = recall(px_store, Cue(elements=("project-x",)))
    narrow = recall(px_store, Cue(elements=("project-x", "delay"), min_element_overlap=2))
    assert set(broad.nodes) != set(narrow.nodes)
    _report("criterion 4 (recall axioms R1-R5 + shrinkage)", started, 60.0)


def test_criterion_5_divergence_axioms(px_store):
    started = time.perf_counter()
    rng = random.Random(505)

    for trial in range(25):
        store = MemoryStore.create()
        kw = pools(f"d{trial}", elements=10, sources=3, interactions=5)
        n = rng.randint(4, 12)
        for _ in range(n):
            ingest(store, random_gist(rng, **kw))
        cue = Cue(elements=tuple(rng.sample(kw["element_pool"], 2)))
        t1 = rng.randint(1, n - 1)
        t2 = rng.randint(t1 + 1, n)
        for operator in ("nbr", "emb"):
            report = surprise(store, cue, t1, t2, operator)
            assert report.aggregate >= 0.0  # D1
            assert all(v >= 0.0 for v in report.per_node.values())
        # D2: identical recalled subgraphs diverge by exactly zero
        r = recall(store, cue, at_version=t2)
        for v in r.nodes:
            assert local_divergence(v, r, r, k=2) == 0.0
        z = embed(r)
        assert all(float((z.vectors[v] - z.vectors[v]).sum()) == 0.0 for v in z.vectors)

    # planted {a,b} vs {a,b,c} neighborhood: divergence exactly 1 - 2/3
    from types import MappingProxyType

    cue = Cue(elements=("spot",))
    v, a, b, c = (Node(i, t, n) for i, t, n in
                  ((1, CONCEPT, "v"), (2, ELEMENT, "a"), (3, ELEMENT, "b"), (4, ELEMENT, "c")))
    r1 = WorkingMemory(MappingProxyType({1: v, 2: a, 3: b}),
                       MappingProxyType({(1, "HAS_SUBJECT", 2): 1.0, (1, "HAS_SUBJECT", 3): 1.0}),
                       cue, 1)
    r2 = WorkingMemory(MappingProxyType({1: v, 2: a, 3: b, 4: c}),
                       MappingProxyType({(1, "HAS_SUBJECT", 2): 1.0, (1, "HAS_SUBJECT", 3): 1.0,
                                         (1, "HAS_SUBJECT", 4): 1.0}),
                       cue, 2)
    assert abs(local_divergence(1, r1, r2, k=1) - 1 / 3) < 1e-12

    # D3: differing cues are rejected
    r_broad = recall(px_store, Cue(elements=("project-x",)))
    r_other = recall(px_store, Cue(elements=("delay",)))
    with pytest.raises(DomainRestrictionError):
        local_divergence(next(iter(r_broad.nodes)), r_broad, r_other, k=2)
    _report("criterion 5 (divergence axioms D1-D4)", started, 30.0)


def test_criterion_6_embedding_axioms(tmp_path, project_x_gists):
    started = time.perf_counter()
    directory = tmp_path / "store"
    store = MemoryStore.create(directory)
    for gist in project_x_gists:
        ingest(store, gist)
    wm = recall(store, Cue(elements=("project-x",)))

    digest = store.content_digest()
    log_size = (directory / LOG_FILENAME).stat().st_size
    record_count = len(store.records())

    import numpy as np

    first = embed(wm, EmbedParams(dimension=64, rounds=3, seed=7))
    second = embed(wm, EmbedParams(dimension=64, rounds=3, seed=7))
    assert set(first.vectors) == set(wm.nodes)  # E1: domain is the recall
    for v in first.vectors:
        assert np.array_equal(first.vectors[v], second.vectors[v])  # determinism

    assert store.content_digest() == digest  # E2: nothing mutated
    assert (directory / LOG_FILENAME).stat().st_size == log_size  # E3: nothing persisted
    assert len(store.records()) == record_count
    store.close()
    _report("criterion 6 (embedding axioms E1-E3)", started, 10.0)


def test_criterion_7_project_x_end_to_end(project_x_gists):
    started = time.perf_counter()
    store = MemoryStore.create()
    receipts = [ingest(store, gist) for gist in project_x_gists]
    assert [r.version for r in receipts] == [1, 2]

    broad_cue = Cue(elements=("project-x",))
    broad = recall(store, broad_cue)
    assert len(broad.concept_ids()) == 2
    assert broad.names_of_type(SOURCE) == {"source-a", "source-b"}
    assert broad.names_of_type(TIME) == {"2026-01-05", "2026-03-12"}

    narrow = recall(store, Cue(elements=("project-x", "delay"), min_element_overlap=2))
    assert narrow.concept_ids() == [receipts[1].concept_id]
    assert narrow.names_of_type(SOURCE) == {"source-b"}

    broad_dist = source_distribution(broad, "uniform")
    assert abs(broad_dist.probability_by_name("source-a") - 0.5) < PROBABILITY_TOLERANCE
    assert abs(broad_dist.probability_by_name("source-b") - 0.5) < PROBABILITY_TOLERANCE
    narrow_dist = source_distribution(narrow, "uniform")
    assert abs(narrow_dist.probability_by_name("source-b") - 1.0) < PROBABILITY_TOLERANCE

    assert surprise(store, broad_cue, 1, 2, "nbr").aggregate > 0.0

    props = generate_propositions(broad, limit=5)
    assert len(props) == 2
    joined = " | ".join(p.text for p in props)
    assert "succeed" in joined and "delay" in joined
    for prop in props:
        (concept,) = prop.supporting_concepts
        attributed = {broad.nodes[s].name for s in source_attribution(broad, concept)}
        assert set(prop.source_names) == attributed
        assert prop.audit_line().startswith(f"supports: {concept}; sources: ")
    _report("criterion 7 (two-episode end-to-end fixture)", started, 5.0)


def test_criterion_8_single_episode_fixture(jack_jill_gist):
    started = time.perf_counter()
    store = MemoryStore.create()
    receipt = ingest(store, jack_jill_gist)
    by_type = {}
    for node in store.graph.nodes():
        by_type[node.type] = by_type.get(node.type, 0) + 1
    assert by_type == {CONCEPT: 1, ELEMENT: 5, TIME: 2, SOURCE: 1, INTERACTION: 1}
    assert store.graph.relation_count() == 9
    assert receipt.created_relation_count == 9
    assert validate_graph(store.schema, store.graph).is_empty
    before = store.graph.node_count()
    again = ingest(store, jack_jill_gist)
    assert len(again.created_node_ids) == 1
    assert store.graph.node_count() == before + 1
    _report("criterion 8 (single-episode fixture counts)", started, 5.0)


def _cli_lines(*argv) -> str:
    out = io.StringIO()
    with redirect_stdout(out):
        code = cli_main(list(argv))
    assert code == 0, f"cli {argv} failed"
    return out.getvalue()


def test_criterion_9_replay_determinism(tmp_path):
    started = time.perf_counter()
    rng = random.Random(909)
    for trial in range(50):
        directory = tmp_path / f"orig{trial}"
        store = MemoryStore.create(directory)
        kw = pools(f"m{trial}", elements=8, sources=3, interactions=5)
        for i in range(rng.randint(10, 25)):
            gist = random_gist(rng, **kw)
            ingest(store, gist)
            if rng.random() < 0.4:
                ingest(store, gist)  # equivalent twin for the next pass
            if i in (6, 14):
                consolidation_pass(store, generalize_times=bool(trial % 2))
        live_lines = store.graph.canonical_lines()
        records = store.records()
        schema = store.schema
        store.close()

        replayed = replay(directory / LOG_FILENAME)
        assert replayed.canonical_lines() == live_lines

        clone_dir = tmp_path / f"clone{trial}"
        with MemoryStore.create(clone_dir, schema=schema) as clone:
            for record in records:
                clone.commit(record.kind, record.body)

        probe = kw["element_pool"][0]
        for argv in (
            ("recall", "--element", probe, "--format", "subgraph"),
            ("sources", "--element", probe),
            ("log",),
            ("validate",),
        ):
            original_out = _cli_lines(argv[0], str(directory), *argv[1:])
            clone_out = _cli_lines(argv[0], str(clone_dir), *argv[1:])
            assert original_out == clone_out
    _report("criterion 9 (replay determinism, 50 mixed histories)", started, 60.0)
