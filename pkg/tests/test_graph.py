from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steermon.discrete import make_ghz, make_w, random_pure_state
from steermon.gaussian import dual_steering_network, random_gaussian_state
from steermon.graph import (
    DirectedEdge,
    SteeringGraph,
    UndirectedEdge,
    build_steering_graph,
    export_graph,
    parse_graph,
)

PAIRS = [(b, a) for a in "ABC" for b in "ABC" if a != b]


def test_w_state_two_way():
    g = build_steering_graph(make_w(), [(b, a, "S3") for b, a in PAIRS])
    assert len(g.directed_edges) == 6
    for b, a in PAIRS:
        assert g.has_edge(a, b, "S3")
    assert len(g.undirected_edges) == 3


def test_ghz_only_collective():
    plan = [(b, a, "S3") for b, a in PAIRS] + [("B", "AC", "S3")]
    g = build_steering_graph(make_ghz(3), plan)
    assert g.directed_edges == (DirectedEdge(("A", "C"), ("B",), "S3", g.directed_edges[0].value),)
    assert g.undirected_edges == ()
    assert len(g.witnesses) == 7


def test_dual_network_edges():
    s = dual_steering_network(1)
    labels = s.labels
    g = build_steering_graph(s, [(b, a, "E") for a in labels for b in labels if a != b])
    assert {(e.source, e.target) for e in g.directed_edges} == {(("A",), ("B",)), (("A",), ("C",))}


def test_plan_mapping_form():
    g = build_steering_graph(make_w(), [{"steered": "B", "group": "A", "kind": "S3", "options": {"mode": "specified"}}])
    assert g.has_edge("A", "B")


def test_unknown_party_in_plan():
    with pytest.raises(ValueError):
        build_steering_graph(make_w(), [("B", "Q", "S3")])


def test_witness_kind_state_mismatch():
    with pytest.raises(ValueError):
        build_steering_graph(make_w(), [("B", "A", "E")])


def test_undetected_edge_rejected():
    with pytest.raises(ValueError):
        SteeringGraph(("A", "B"), (DirectedEdge(("A",), ("B",), "E", 1.2, False),))


def test_edge_to_unknown_node_rejected():
    with pytest.raises(ValueError):
        SteeringGraph(("A",), (), (UndirectedEdge(("A", "B"), 0.5),))


def test_empty_plan_nodes_only():
    g = build_steering_graph(make_ghz(3), [])
    text = export_graph(g, "dot")
    assert "->" not in text and "--" not in text
    assert [line.strip() for line in text.splitlines()[1:4]] == ["A;", "B;", "C;"]


def test_dot_format():
    g = build_steering_graph(make_w(), [(b, a, "S3") for b, a in PAIRS])
    text = export_graph(g, "dot")
    assert text.count(" -> ") == 6
    assert 'A -> B [label="S3:0.888888888888888' in text
    assert text.count(" -- ") == 3
    lines = [ln for ln in text.splitlines() if "->" in ln]
    assert lines == sorted(lines)


def test_structured_schema():
    g = build_steering_graph(make_w(), [("B", "A", "S3")])
    doc = json.loads(export_graph(g, "structured"))
    assert doc["format"] == "steermon-graph" and doc["version"] == 1
    assert doc["nodes"] == ["A", "B", "C"]
    assert doc["directed_edges"][0]["source"] == ["A"] and doc["directed_edges"][0]["detected"] is True
    assert {"pair", "concurrence"} == set(doc["undirected_edges"][0])


def test_unknown_format():
    with pytest.raises(ValueError):
        export_graph(SteeringGraph(("A",)), "svg")


def test_parse_rejects_foreign_documents():
    with pytest.raises(ValueError):
        parse_graph(json.dumps({"format": "other"}))


def test_export_is_deterministic():
    plan = [(b, a, "S3") for b, a in reversed(PAIRS)]
    a = export_graph(build_steering_graph(make_w(), plan), "dot")
    b = export_graph(build_steering_graph(make_w(), list(reversed(plan))), "dot")
    assert a == b


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_round_trip_discrete(seed):
    s = random_pure_state(3, seed=seed)
    g = build_steering_graph(s, [(b, a, "S3") for b, a in PAIRS] + [("B", "AC", "S2")])
    assert parse_graph(export_graph(g, "structured")) == g


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_edges_match_witness_flags(seed):
    s = random_gaussian_state(3, seed, max_squeeze=1.5)
    g = build_steering_graph(s, [(b, a, "E") for b, a in PAIRS])
    flagged = {(w.steering_group, w.steered) for w in g.witnesses if w.detects_steering}
    assert {(e.source, e.target) for e in g.directed_edges} == flagged
    assert parse_graph(export_graph(g, "structured")) == g
