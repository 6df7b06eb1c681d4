"""Navigation map: directed graph of instruction-bearing nodes and condition-labeled edges.

A validated :class:`NavigationMap` is immutable and safe to share across
sessions. Map "updates" always produce a new map value.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

NODE_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")

NODE_KINDS = ("start", "generic", "end", "transfer")


class MapError(Exception):
    """Base class for navigation-map structural errors."""


class DuplicateNodeId(MapError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"duplicate node id: {node_id!r}")


class DanglingEdge(MapError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"edge references unknown node: {node_id!r}")


class NoStartNode(MapError):
    def __init__(self):
        super().__init__("map has no start node")


class MultipleStartNodes(MapError):
    def __init__(self, node_ids: list[str]):
        self.node_ids = list(node_ids)
        super().__init__(f"map has multiple start nodes: {self.node_ids}")


class UnreachableNode(MapError):
    def __init__(self, node_ids: list[str]):
        self.node_ids = list(node_ids)
        super().__init__(f"nodes unreachable from start: {self.node_ids}")


class EdgeOutOfEndNode(MapError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"end node {node_id!r} has an outgoing edge")


class DuplicateEdge(MapError):
    def __init__(self, from_id: str, to_id: str):
        self.from_id = from_id
        self.to_id = to_id
        super().__init__(f"more than one edge from {from_id!r} to {to_id!r}")


class BadNode(MapError):
    def __init__(self, node_id: str, reason: str):
        self.node_id = node_id
        super().__init__(f"node {node_id!r}: {reason}")


class UnknownNode(MapError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"unknown node: {node_id!r}")


class UnreachableTarget(MapError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"node {node_id!r} not reachable from start")


@dataclass(frozen=True)
class ActionSpec:
    """Opaque action record attached to a node; dispatched by the engine."""

    name: str
    payload: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ValueError("action name must be non-empty")


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    instruction: str = ""
    actions: tuple[ActionSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class Edge:
    from_id: str
    to_id: str
    condition: str


@dataclass(frozen=True)
class PathAnchor:
    """Path from the start node to a target, plus the target's first-layer children."""

    path: tuple[str, ...]
    children: tuple[tuple[str, str, str], ...]  # (node id, instruction, condition)


@dataclass(frozen=True)
class NavigationMap:
    name: str
    nodes: Mapping[str, Node]
    edges: tuple[Edge, ...]
    start: str

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes


def _iter_issues(name: str, nodes: Iterable[Node], edges: Iterable[Edge]):
    """Yield every structural problem, in a fixed check order."""
    nodes = list(nodes)
    edges = list(edges)

    seen: dict[str, Node] = {}
    for n in nodes:
        if n.id in seen:
            yield DuplicateNodeId(n.id)
        seen[n.id] = n
        if not NODE_ID_RE.match(n.id or ""):
            yield BadNode(n.id, "id must be letters, digits, underscore or hyphen")
        if n.kind not in NODE_KINDS:
            yield BadNode(n.id, f"unknown kind {n.kind!r}")
        if n.kind in ("start", "generic") and not n.instruction:
            yield BadNode(n.id, "instruction must be non-empty for start/generic nodes")

    for e in edges:
        if e.from_id not in seen:
            yield DanglingEdge(e.from_id)
        if e.to_id not in seen:
            yield DanglingEdge(e.to_id)
        if not e.condition:
            yield BadNode(e.from_id, f"edge to {e.to_id!r} has an empty condition")

    pair_counts: dict[tuple[str, str], int] = {}
    for e in edges:
        key = (e.from_id, e.to_id)
        pair_counts[key] = pair_counts.get(key, 0) + 1
    for (f, t), c in sorted(pair_counts.items()):
        if c > 1:
            yield DuplicateEdge(f, t)

    starts = [n.id for n in nodes if n.kind == "start"]
    if not starts:
        yield NoStartNode()
        return
    if len(starts) > 1:
        yield MultipleStartNodes(starts)
        return
    start = starts[0]

    for e in edges:
        src = seen.get(e.from_id)
        if src is not None and src.kind == "end":
            yield EdgeOutOfEndNode(src.id)

    # Reachability over edges whose endpoints resolve.
    adj: dict[str, set[str]] = {n.id: set() for n in nodes}
    for e in edges:
        if e.from_id in seen and e.to_id in seen:
            adj[e.from_id].add(e.to_id)
    visited = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in sorted(adj[cur]):
            if nxt not in visited:
                visited.add(nxt)
                queue.append(nxt)
    missing = sorted(set(seen) - visited)
    if missing:
        yield UnreachableNode(missing)


def map_issues(name: str, nodes: Iterable[Node], edges: Iterable[Edge]) -> list[MapError]:
    """All structural problems with the raw map, without raising."""
    return list(_iter_issues(name, list(nodes), list(edges)))


def validate_map(name: str, nodes: Iterable[Node], edges: Iterable[Edge]) -> NavigationMap:
    """Validate a raw node/edge collection into an immutable NavigationMap.

    Raises the first detected structural error (DuplicateNodeId, DanglingEdge,
    NoStartNode, MultipleStartNodes, UnreachableNode, EdgeOutOfEndNode, ...).
    Use :func:`map_issues` to collect all of them for reporting.
    """
    nodes = list(nodes)
    edges = list(edges)
    for issue in _iter_issues(name, nodes, edges):
        raise issue
    start = next(n.id for n in nodes if n.kind == "start")
    return NavigationMap(
        name=name,
        nodes={n.id: n for n in nodes},
        edges=tuple(edges),
        start=start,
    )


def children_of(nav: NavigationMap, node_id: str) -> list[tuple[str, str, str]]:
    """Out-neighbors of ``node_id`` as (id, instruction, condition), ascending by id.

    End nodes yield an empty list. Raises UnknownNode for ids absent from the map.
    """
    if node_id not in nav.nodes:
        raise UnknownNode(node_id)
    out = [(e.to_id, nav.nodes[e.to_id].instruction, e.condition)
           for e in nav.edges if e.from_id == node_id]
    out.sort(key=lambda item: item[0])
    return out


def path_anchor(nav: NavigationMap, target: str) -> PathAnchor:
    """Shortest directed path from start to ``target`` plus the target's children.

    Ties between equal-length paths are broken by expanding neighbors in
    ascending node-id order, so the result is deterministic.
    """
    if target not in nav.nodes:
        raise UnknownNode(target)
    parents: dict[str, Optional[str]] = {nav.start: None}
    queue = deque([nav.start])
    while queue:
        cur = queue.popleft()
        if cur == target:
            break
        for nxt, _, _ in children_of(nav, cur):
            if nxt not in parents:
                parents[nxt] = cur
                queue.append(nxt)
    if target not in parents:
        raise UnreachableTarget(target)
    path: list[str] = []
    at: Optional[str] = target
    while at is not None:
        path.append(at)
        at = parents[at]
    path.reverse()
    return PathAnchor(path=tuple(path), children=tuple(children_of(nav, target)))
