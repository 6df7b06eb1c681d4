"""Vector-based node search: score the latest agent response against the
current node and its first-layer children by raw dot product, select the
best candidate when it clears the threshold, otherwise fall back to the
judge.

Vectors are never normalized: magnitude is part of the signal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import NavigationMap, UnknownNode, children_of
from .providers import DimensionMismatch, Embedder, ProviderError

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class VectorStore:
    """One precomputed instruction embedding per map node; read-only after build."""

    entries: dict[str, np.ndarray]
    dimension: int
    provider_tag: str


@dataclass(frozen=True)
class RouteDecision:
    """Outcome of one vector search over {current} ∪ children(current).

    selected is None on fallback; scores lists every candidate exactly once.
    """

    selected: Optional[str]
    score: Optional[float]
    scores: tuple[tuple[str, float], ...]
    threshold: float
    error: Optional[str] = None

    @property
    def is_selected(self) -> bool:
        return self.selected is not None


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two equal-dimension vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape[0], b.shape[0])
    return float(np.dot(a, b))


def _node_text(nav: NavigationMap, node_id: str) -> str:
    # End/transfer nodes may carry no instruction; embed the id as a stand-in.
    return nav.nodes[node_id].instruction or node_id


def build_store(nav: NavigationMap, embedder: Embedder) -> VectorStore:
    """Embed every node's instruction once; provider errors propagate whole
    (a partial store is never returned)."""
    ids = sorted(nav.nodes)
    vectors = embedder.embed([_node_text(nav, i) for i in ids])
    entries = {node_id: vec for node_id, vec in zip(ids, vectors)}
    return VectorStore(
        entries=entries,
        dimension=embedder.dimension,
        provider_tag=embedder.tag,
    )


def vector_node_search(
    nav: NavigationMap,
    store: VectorStore,
    current: str,
    latest_agent_response: str,
    threshold: float,
    embedder: Embedder,
) -> RouteDecision:
    """Score {current} ∪ children(current) against the agent response.

    Exactly one embed call is issued (for the response; node vectors come
    from the store). Returns selected(best, score) when the best score
    clears the threshold, ties broken by ascending node id; otherwise a
    fallback decision. Provider failures degrade to fallback with the error
    recorded rather than failing the turn.
    """
    if current not in nav.nodes:
        raise UnknownNode(current)
    candidates = sorted({current} | {cid for cid, _, _ in children_of(nav, current)})
    try:
        response_vec = embedder.embed([latest_agent_response])[0]
    except ProviderError as exc:
        return RouteDecision(
            selected=None,
            score=None,
            scores=(),
            threshold=threshold,
            error=str(exc),
        )
    scores = tuple((cid, dot(store.entries[cid], response_vec)) for cid in candidates)
    # Candidates are in ascending id order; strict > keeps the smallest id on ties.
    best_id, best_score = scores[0]
    for cid, s in scores[1:]:
        if s > best_score:
            best_id, best_score = cid, s
    if best_score >= threshold:
        return RouteDecision(
            selected=best_id, score=best_score, scores=scores, threshold=threshold
        )
    return RouteDecision(selected=None, score=None, scores=scores, threshold=threshold)
