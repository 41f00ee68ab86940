"""Shared fixtures: the two canonical stores plus random history generators."""

from __future__ import annotations

import random

import pytest

from gistgraph import Gist, MemoryStore, TimeValue, ingest
from gistgraph.schema import CONCEPT_ELEMENT_RELATIONS

RELS = list(CONCEPT_ELEMENT_RELATIONS)


@pytest.fixture
def jack_jill_gist() -> Gist:
    return Gist(
        concept_label="fetch-water",
        elements=[
            ("HAS_SUBJECT", "jack"),
            ("HAS_SUBJECT", "jill"),
            ("HAS_ACTION", "fetch"),
            ("HAS_OBJECT", "water"),
            ("MODIFY_OBJECT", "fresh"),
        ],
        event_time=TimeValue.parse("2000-01-01"),
        acquisition_time=TimeValue.parse("2025-11-15"),
        source_name="jack-and-jill-book",
        interaction_id="int-001",
    )


@pytest.fixture
def project_x_gists() -> list[Gist]:
    return [
        Gist(
            concept_label="project-x update",
            elements=[("HAS_SUBJECT", "project-x"), ("HAS_ACTION", "succeed")],
            event_time=TimeValue.parse("2026-01-05"),
            acquisition_time=TimeValue.parse("2026-01-05"),
            source_name="source-a",
            interaction_id="int-a",
        ),
        Gist(
            concept_label="project-x update",
            elements=[("HAS_SUBJECT", "project-x"), ("HAS_ACTION", "delay")],
            event_time=TimeValue.parse("2026-03-12"),
            acquisition_time=TimeValue.parse("2026-03-12"),
            source_name="source-b",
            interaction_id="int-b",
        ),
    ]


@pytest.fixture
def px_store(project_x_gists) -> MemoryStore:
    store = MemoryStore.create()
    for gist in project_x_gists:
        ingest(store, gist)
    return store


def random_gist(rng: random.Random, *, element_pool: list[str],
                source_pool: list[str], interaction_pool: list[str],
                min_elements: int = 1, max_elements: int = 4) -> Gist:
    n = rng.randint(min_elements, max_elements)
    elements = [(rng.choice(RELS), rng.choice(element_pool)) for _ in range(n)]
    event_day = rng.randint(1, 28)
    acq_day = rng.randint(1, 28)
    return Gist(
        concept_label=f"episode-{rng.randrange(10_000)}",
        elements=elements,
        event_time=TimeValue.parse(f"2026-01-{event_day:02d}"),
        acquisition_time=TimeValue.parse(f"2026-02-{acq_day:02d}"),
        source_name=rng.choice(source_pool),
        interaction_id=rng.choice(interaction_pool),
    )


def pools(prefix: str, *, elements: int = 50, sources: int = 8,
          interactions: int = 40) -> dict:
    return {
        "element_pool": [f"{prefix}-el-{i:02d}" for i in range(elements)],
        "source_pool": [f"{prefix}-src-{i}" for i in range(sources)],
        "interaction_pool": [f"{prefix}-int-{i}" for i in range(interactions)],
    }


def random_history(rng: random.Random, n: int, prefix: str = "a", **pool_kwargs) -> list[Gist]:
    kw = pools(prefix, **pool_kwargs)
    return [random_gist(rng, **kw) for _ in range(n)]
