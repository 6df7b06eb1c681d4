import json
from pathlib import Path

from hypothesis import given, settings, strategies as st

from paf.formats import (
    WorkflowDocument,
    document_from_map,
    map_from_document,
    parse_workflow,
    serialize_workflow,
)
from paf.graph import ActionSpec, Edge, Node

WORKFLOWS = Path(__file__).resolve().parent.parent / "workflows"

MINIMAL = json.dumps(
    {
        "version": "1",
        "name": "tiny",
        "nodes": [{"id": "start", "kind": "start", "instruction": "hi"}],
        "edges": [],
    }
)


def test_parse_minimal_document():
    result = parse_workflow(MINIMAL)
    assert result.ok
    assert len(result.document.nodes) == 1
    assert result.document.nodes[0].id == "start"


def test_bad_node_kind_is_error():
    source = json.dumps(
        {
            "version": "1",
            "name": "x",
            "nodes": [{"id": "start", "kind": "midway", "instruction": "hi"}],
            "edges": [],
        }
    )
    result = parse_workflow(source)
    assert not result.ok
    assert any("midway" in d.message for d in result.errors())


def test_missing_field_is_error():
    result = parse_workflow('{"version": "1", "nodes": [], "edges": []}')
    assert not result.ok
    assert any("missing field" in d.message and "name" in d.location for d in result.errors())


def test_unsupported_version_is_error():
    result = parse_workflow('{"version": "9", "name": "x", "nodes": [], "edges": []}')
    assert not result.ok
    assert any("unsupported format version" in d.message for d in result.errors())


def test_syntax_error_has_location():
    result = parse_workflow("{not json")
    assert not result.ok
    assert result.errors()[0].location.startswith("1:")


def test_unknown_fields_warn_not_error():
    source = json.dumps(
        {
            "version": "1",
            "name": "x",
            "color": "blue",
            "nodes": [{"id": "start", "kind": "start", "instruction": "hi", "mood": "sunny"}],
            "edges": [],
        }
    )
    result = parse_workflow(source)
    assert result.ok
    warnings = [d for d in result.diagnostics if d.severity == "warning"]
    assert len(warnings) == 2


def test_example_file_counts():
    result = parse_workflow((WORKFLOWS / "healthcare_eligibility.json").read_bytes())
    assert result.ok
    assert len(result.document.nodes) == 7
    assert len(result.document.edges) == 6


def test_roundtrip_minimal():
    doc = parse_workflow(MINIMAL).document
    assert parse_workflow(serialize_workflow(doc)).document == doc


def test_roundtrip_example_file():
    doc = parse_workflow((WORKFLOWS / "isp_troubleshooting.json").read_bytes()).document
    assert parse_workflow(serialize_workflow(doc)).document == doc


def test_canonical_serialization_is_order_insensitive():
    nodes = (
        Node("start", "start", "hi"),
        Node("b", "generic", "bee", (ActionSpec("ping", {"k": "v"}),)),
        Node("a", "end", ""),
    )
    edges = (Edge("start", "a", "to a"), Edge("start", "b", "to b"))
    doc1 = WorkflowDocument("1", "x", nodes, edges)
    doc2 = WorkflowDocument("1", "x", tuple(reversed(nodes)), tuple(reversed(edges)))
    assert serialize_workflow(doc1) == serialize_workflow(doc2)
    assert serialize_workflow(doc1).encode() == serialize_workflow(doc2).encode()


def test_document_map_roundtrip(healthcare_map):
    doc = document_from_map(healthcare_map)
    assert map_from_document(doc) == healthcare_map


_ids = st.text(alphabet="abcdefgh0123_-", min_size=1, max_size=6)
_texts = st.text(min_size=1, max_size=30)


@st.composite
def documents(draw):
    ids = draw(st.lists(_ids, min_size=1, max_size=6, unique=True))
    nodes = []
    for i, node_id in enumerate(ids):
        kind = "start" if i == 0 else draw(st.sampled_from(["generic", "end", "transfer"]))
        actions = tuple(
            ActionSpec(draw(_ids), {draw(_ids): draw(_texts)})
            for _ in range(draw(st.integers(0, 2)))
        )
        nodes.append(Node(node_id, kind, draw(_texts), actions))
    n_edges = draw(st.integers(0, 6))
    edges = []
    seen = set()
    for _ in range(n_edges):
        a = draw(st.sampled_from(ids))
        b = draw(st.sampled_from(ids))
        if (a, b) in seen:
            continue
        seen.add((a, b))
        edges.append(Edge(a, b, draw(_texts)))
    return WorkflowDocument("1", draw(_texts), tuple(nodes), tuple(edges))


@given(documents())
@settings(max_examples=100)
def test_roundtrip_property(doc):
    result = parse_workflow(serialize_workflow(doc))
    assert result.ok
    assert result.document == doc


@given(st.binary(max_size=400))
@settings(max_examples=300)
def test_parser_never_crashes(data):
    result = parse_workflow(data)
    assert result.ok or result.errors()


@given(st.text(max_size=400))
@settings(max_examples=300)
def test_parser_never_crashes_on_text(text):
    result = parse_workflow(text)
    assert result.ok or result.errors()
