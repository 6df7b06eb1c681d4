"""Workflow file format: JSON parsing with diagnostics, canonical serialization.

File schema (version "1"):

    { "version": "1", "name": <text>,
      "nodes": [ { "id": <text>, "kind": "start"|"generic"|"end"|"transfer",
                   "instruction": <text>,
                   "actions": [ { "name": <text>, "payload": {<text>: <text>} } ] } ],
      "edges": [ { "from": <text>, "to": <text>, "condition": <text> } ] }

Serialization is canonical (sorted keys, nodes sorted by id, edges sorted by
(from, to, condition)) so structurally equal documents are byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .graph import ActionSpec, Edge, NavigationMap, Node, NODE_KINDS, validate_map

SUPPORTED_VERSIONS = ("1",)

_NODE_FIELDS = {"id", "kind", "instruction", "actions"}
_EDGE_FIELDS = {"from", "to", "condition"}
_DOC_FIELDS = {"version", "name", "nodes", "edges"}


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    location: str  # line:col or a field path such as nodes[2].kind
    message: str

    def __str__(self):
        return f"{self.severity}: {self.location}: {self.message}"


@dataclass(frozen=True)
class WorkflowDocument:
    """Unvalidated in-memory form of a workflow file, canonically ordered."""

    format_version: str
    name: str
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id))
        )
        object.__setattr__(
            self,
            "edges",
            tuple(sorted(self.edges, key=lambda e: (e.from_id, e.to_id, e.condition))),
        )


@dataclass
class ParseResult:
    document: Optional[WorkflowDocument]
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.document is not None

    def errors(self) -> list[ParseDiagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]


def _err(diags, location, message):
    diags.append(ParseDiagnostic("error", location, message))


def _warn(diags, location, message):
    diags.append(ParseDiagnostic("warning", location, message))


def _get_str(obj, key, path, diags) -> Optional[str]:
    if key not in obj:
        _err(diags, f"{path}.{key}", "missing field")
        return None
    value = obj[key]
    if not isinstance(value, str):
        _err(diags, f"{path}.{key}", f"expected text, got {type(value).__name__}")
        return None
    return value


def _parse_node(raw, idx, diags) -> Optional[Node]:
    path = f"nodes[{idx}]"
    if not isinstance(raw, dict):
        _err(diags, path, "node record must be an object")
        return None
    for key in raw:
        if key not in _NODE_FIELDS:
            _warn(diags, f"{path}.{key}", "unknown field ignored")
    node_id = _get_str(raw, "id", path, diags)
    kind = _get_str(raw, "kind", path, diags)
    if kind is not None and kind not in NODE_KINDS:
        _err(diags, f"{path}.kind", f"bad node kind {kind!r}")
        kind = None
    instruction = raw.get("instruction", "")
    if not isinstance(instruction, str):
        _err(diags, f"{path}.instruction", "expected text")
        return None
    actions: list[ActionSpec] = []
    raw_actions = raw.get("actions", [])
    if not isinstance(raw_actions, list):
        _err(diags, f"{path}.actions", "expected a list")
        return None
    for aidx, entry in enumerate(raw_actions):
        apath = f"{path}.actions[{aidx}]"
        if not isinstance(entry, dict):
            _err(diags, apath, "action record must be an object")
            return None
        name = _get_str(entry, "name", apath, diags)
        payload = entry.get("payload", {})
        if not isinstance(payload, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in payload.items()
        ):
            _err(diags, f"{apath}.payload", "expected a text-to-text map")
            return None
        if name is None or not name:
            _err(diags, f"{apath}.name", "action name must be non-empty")
            return None
        actions.append(ActionSpec(name=name, payload=dict(payload)))
    if node_id is None or kind is None:
        return None
    return Node(id=node_id, kind=kind, instruction=instruction, actions=tuple(actions))


def _parse_edge(raw, idx, diags) -> Optional[Edge]:
    path = f"edges[{idx}]"
    if not isinstance(raw, dict):
        _err(diags, path, "edge record must be an object")
        return None
    for key in raw:
        if key not in _EDGE_FIELDS:
            _warn(diags, f"{path}.{key}", "unknown field ignored")
    from_id = _get_str(raw, "from", path, diags)
    to_id = _get_str(raw, "to", path, diags)
    condition = _get_str(raw, "condition", path, diags)
    if from_id is None or to_id is None or condition is None:
        return None
    return Edge(from_id=from_id, to_id=to_id, condition=condition)


def parse_workflow(source: str | bytes) -> ParseResult:
    """Parse workflow file text into a document, or into error diagnostics.

    Never raises on malformed input: every failure becomes a diagnostic and
    the document is None whenever an error-severity diagnostic exists.
    """
    diags: list[ParseDiagnostic] = []
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            _err(diags, f"byte {exc.start}", "input is not valid UTF-8")
            return ParseResult(None, diags)
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        _err(diags, f"{exc.lineno}:{exc.colno}", f"invalid JSON: {exc.msg}")
        return ParseResult(None, diags)
    if not isinstance(data, dict):
        _err(diags, "1:1", "top level must be a JSON object")
        return ParseResult(None, diags)

    for key in data:
        if key not in _DOC_FIELDS:
            _warn(diags, key, "unknown field ignored")

    version = _get_str(data, "version", "$", diags)
    if version is not None and version not in SUPPORTED_VERSIONS:
        _err(diags, "$.version", f"unsupported format version {version!r}")
    name = _get_str(data, "name", "$", diags)

    raw_nodes = data.get("nodes")
    if not isinstance(raw_nodes, list):
        _err(diags, "$.nodes", "missing or not a list")
        raw_nodes = []
    raw_edges = data.get("edges", [])
    if not isinstance(raw_edges, list):
        _err(diags, "$.edges", "not a list")
        raw_edges = []

    nodes = [_parse_node(n, i, diags) for i, n in enumerate(raw_nodes)]
    edges = [_parse_edge(e, i, diags) for i, e in enumerate(raw_edges)]

    if any(d.severity == "error" for d in diags):
        return ParseResult(None, diags)
    return ParseResult(
        WorkflowDocument(
            format_version=version or "1",
            name=name or "",
            nodes=tuple(n for n in nodes if n is not None),
            edges=tuple(e for e in edges if e is not None),
        ),
        diags,
    )


def _node_to_json(n: Node) -> dict:
    return {
        "id": n.id,
        "kind": n.kind,
        "instruction": n.instruction,
        "actions": [{"name": a.name, "payload": dict(a.payload)} for a in n.actions],
    }


def serialize_workflow(doc: WorkflowDocument) -> str:
    """Canonical text form: parse_workflow(serialize_workflow(doc)) == doc."""
    payload = {
        "version": doc.format_version,
        "name": doc.name,
        "nodes": [_node_to_json(n) for n in doc.nodes],
        "edges": [
            {"from": e.from_id, "to": e.to_id, "condition": e.condition}
            for e in doc.edges
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def map_from_document(doc: WorkflowDocument) -> NavigationMap:
    """Validate a parsed document into a NavigationMap (raises MapError)."""
    return validate_map(doc.name, doc.nodes, doc.edges)


def document_from_map(nav: NavigationMap) -> WorkflowDocument:
    return WorkflowDocument(
        format_version="1",
        name=nav.name,
        nodes=tuple(nav.nodes.values()),
        edges=nav.edges,
    )


def load_workflow(path: str | Path) -> ParseResult:
    return parse_workflow(Path(path).read_bytes())


def load_map(path: str | Path) -> NavigationMap:
    """Parse and validate a workflow file; raises on any diagnostic error."""
    result = load_workflow(path)
    if not result.ok:
        details = "; ".join(str(d) for d in result.errors())
        raise ValueError(f"{path}: {details}")
    return map_from_document(result.document)
