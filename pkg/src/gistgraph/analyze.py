"""Post-recall analysis: deterministic structural embeddings, divergence
operators, and cue-conditioned structural surprise.

Everything here consumes recalled working memory only; nothing reads the
store behind it, nothing writes anywhere, and every output is transient.

The embedding is iterated neighborhood label hashing: each node starts from
a label hashed out of its (type, name), then for a fixed number of rounds
rehashes its own label together with the sorted multiset of
(direction-tagged relation, neighbor label) pairs inside the working memory.
The per-round labels are folded into a fixed-dimension vector by feature
hashing with signed buckets. Deterministic by construction: same subgraph,
same parameters, bit-identical vectors.

Two divergence operators compare same-cue recalls at two versions:
neighborhood divergence (Jaccard distance between a node's k-hop
neighborhoods in each recall) and embedding divergence (Euclidean distance
between its vectors). A node present in only one recall counts as maximal
local change: 1 for the neighborhood operator when its one-sided
neighborhood is non-empty, the present vector's norm for the embedding
operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from hashlib import blake2b
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import (
    DomainRestrictionError,
    IncomparableError,
    InvalidParametersError,
    NotRecalledError,
    VersionRangeError,
)
from .graph import NodeId
from .recall import Cue, WorkingMemory, recall
from .schema import CONCEPT, ELEMENT
from .store import MemoryStore

MIN_DIMENSION = 8


@dataclass(frozen=True)
class EmbedParams:
    dimension: int = 128
    rounds: int = 2
    seed: int = 0

    def describe(self) -> str:
        return f"dim={self.dimension} rounds={self.rounds} seed={self.seed}"


@dataclass(frozen=True)
class EmbeddingSpace:
    """Transient per-node vectors projected from one working memory."""

    vectors: Mapping[NodeId, np.ndarray]
    params: EmbedParams
    cue: Cue
    source_version: int


def _label_hash(text: str) -> str:
    return blake2b(text.encode("utf-8"), digest_size=16).hexdigest()


def _feature_hash(text: str) -> int:
    return int.from_bytes(blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def _adjacency(wm: WorkingMemory) -> dict[NodeId, list[tuple[str, NodeId]]]:
    nbrs: dict[NodeId, list[tuple[str, NodeId]]] = {v: [] for v in wm.nodes}
    for src, rel, dst in wm.relations:
        nbrs[src].append((">" + rel, dst))
        nbrs[dst].append(("<" + rel, src))
    return nbrs


def embed(wm: WorkingMemory, params: EmbedParams | None = None) -> EmbeddingSpace:
    """Project a working memory into per-node vectors (pure, deterministic)."""
    if params is None:
        params = EmbedParams()
    if params.dimension < MIN_DIMENSION:
        raise InvalidParametersError(f"dimension must be at least {MIN_DIMENSION}")
    if params.rounds < 0:
        raise InvalidParametersError("rounds must be non-negative")

    nbrs = _adjacency(wm)
    labels = {
        v: _label_hash(f"L|{params.seed}|{node.type}|{node.name}")
        for v, node in wm.nodes.items()
    }
    history: dict[NodeId, list[str]] = {v: [label] for v, label in labels.items()}
    for _ in range(params.rounds):
        labels = {
            v: _label_hash(
                labels[v] + "|" + ";".join(sorted(f"{tag},{labels[u]}" for tag, u in nbrs[v]))
            )
            for v in labels
        }
        for v, label in labels.items():
            history[v].append(label)

    vectors: dict[NodeId, np.ndarray] = {}
    for v, node_labels in history.items():
        vec = np.zeros(params.dimension, dtype=np.float64)
        for label in node_labels:
            h = _feature_hash(f"F|{label}")
            sign = 1.0 if (h >> 40) & 1 else -1.0
            vec[h % params.dimension] += sign
        vec.flags.writeable = False
        vectors[v] = vec
    return EmbeddingSpace(
        vectors=MappingProxyType(vectors),
        params=params,
        cue=wm.cue,
        source_version=wm.version,
    )


def _khop(wm: WorkingMemory, origin: NodeId, k: int,
          nbrs: dict[NodeId, list[tuple[str, NodeId]]] | None = None) -> frozenset[NodeId]:
    """Nodes within k undirected hops of origin inside wm, excluding origin."""
    if nbrs is None:
        nbrs = _adjacency(wm)
    seen = {origin}
    frontier = {origin}
    for _ in range(k):
        nxt = {u for v in frontier for _tag, u in nbrs.get(v, ())} - seen
        if not nxt:
            break
        seen |= nxt
        frontier = nxt
    return frozenset(seen - {origin})


def local_divergence(v: NodeId, r1: WorkingMemory, r2: WorkingMemory, k: int = 2) -> float:
    """Jaccard distance between v's k-hop neighborhoods in two same-cue recalls."""
    if r1.cue != r2.cue:
        raise DomainRestrictionError("recalls were constructed under different cues")
    if k < 0:
        raise InvalidParametersError("k must be non-negative")
    in1, in2 = v in r1.nodes, v in r2.nodes
    if not in1 and not in2:
        raise NotRecalledError(f"node {v} is in neither recalled subgraph")
    n1 = _khop(r1, v, k) if in1 else frozenset()
    n2 = _khop(r2, v, k) if in2 else frozenset()
    union = n1 | n2
    if not union:
        return 0.0
    return 1.0 - len(n1 & n2) / len(union)


def embedding_divergence(v: NodeId, z1: EmbeddingSpace, z2: EmbeddingSpace) -> float:
    """Euclidean distance between a node's vectors in two comparable spaces."""
    if z1.params != z2.params:
        raise IncomparableError(f"embedding parameters differ: {z1.params} vs {z2.params}")
    if z1.cue != z2.cue:
        raise DomainRestrictionError("embedding spaces built under different cues")
    if v not in z1.vectors or v not in z2.vectors:
        raise NotRecalledError(f"node {v} is not embedded in both spaces")
    return float(np.linalg.norm(z2.vectors[v] - z1.vectors[v]))


@dataclass(frozen=True)
class SurpriseReport:
    cue: Cue
    versions: tuple[int, int]
    operator: str
    operator_detail: str
    theta: float
    per_node: Mapping[NodeId, float]
    node_labels: Mapping[NodeId, tuple[str, str]]  # id -> (type, name)
    aggregate: float
    significant: bool

    def render_body(self) -> str:
        """Per-node table plus aggregate, stable under NodeId relabeling."""
        rows = sorted(
            (node_type, name, value)
            for v, value in self.per_node.items()
            for node_type, name in [self.node_labels[v]]
        )
        lines = [f"{node_type} {json.dumps(name)} {value!r}" for node_type, name, value in rows]
        lines.append(f"aggregate: {self.aggregate!r}")
        lines.append(f"significant: {'true' if self.significant else 'false'}")
        return "\n".join(lines)

    def render(self) -> str:
        header = [
            f"SURPRISE cue: {self.cue.describe()}",
            f"versions: {self.versions[0]} -> {self.versions[1]}",
            f"operator: {self.operator_detail}",
            f"theta: {self.theta!r}",
        ]
        return "\n".join(header) + "\n" + self.render_body()


def surprise(store: MemoryStore, cue: Cue, t1: int, t2: int,
             operator: str = "nbr", *, k: int = 2,
             embed_params: EmbedParams | None = None,
             theta: float = 0.0) -> SurpriseReport:
    """Divergence between same-cue recalls at two pinned versions.

    Per-node divergence is computed over the union of recalled Concept and
    Element nodes; the aggregate is their mean (exactly rounded, so it is
    invariant to node enumeration order). Context nodes participate through
    neighborhoods and labels, not as rows.
    """
    if t1 >= t2:
        raise VersionRangeError(f"versions out of order: t1={t1} must precede t2={t2}")
    if theta < 0:
        raise InvalidParametersError("theta must be non-negative")
    if operator not in ("nbr", "emb"):
        raise InvalidParametersError(f"unknown divergence operator: {operator!r}")

    r1 = recall(store, cue, at_version=t1)
    r2 = recall(store, cue, at_version=t2)
    union = sorted(
        v for v in set(r1.nodes) | set(r2.nodes)
        if (r1.nodes.get(v) or r2.nodes[v]).type in (CONCEPT, ELEMENT)
    )

    per_node: dict[NodeId, float] = {}
    if operator == "nbr":
        detail = f"nbr k={k}"
        for v in union:
            per_node[v] = local_divergence(v, r1, r2, k)
    else:
        params = embed_params or EmbedParams()
        detail = f"emb {params.describe()}"
        z1, z2 = embed(r1, params), embed(r2, params)
        for v in union:
            if v in z1.vectors and v in z2.vectors:
                per_node[v] = embedding_divergence(v, z1, z2)
            elif v in z2.vectors:
                per_node[v] = float(np.linalg.norm(z2.vectors[v]))
            else:
                per_node[v] = float(np.linalg.norm(z1.vectors[v]))

    aggregate = math.fsum(per_node.values()) / len(per_node) if per_node else 0.0
    labels = {
        v: ((r1.nodes.get(v) or r2.nodes[v]).type, (r1.nodes.get(v) or r2.nodes[v]).name)
        for v in union
    }
    return SurpriseReport(
        cue=cue,
        versions=(t1, t2),
        operator=operator,
        operator_detail=detail,
        theta=theta,
        per_node=MappingProxyType(per_node),
        node_labels=MappingProxyType(labels),
        aggregate=aggregate,
        significant=aggregate > theta,
    )
