"""Steering graphs: who can be shown to steer whom, plus pairwise entanglement.

A graph holds directed edges from a steering group to a steered party for
every witness in a plan that detects steering, and undirected edges
weighted by concurrence between qubit pairs.

Two text formats are supported. The dot-like format is meant for eyes and
Graphviz::

    digraph steering {
      A;
      B;
      A -> B [label="S3:0.8888888888888888"];
      A -- B [label="0.6666666666666666"];
    }

The structured format is JSON with ``nodes``, ``directed_edges`` and
``undirected_edges`` arrays and round-trips exactly through
:func:`parse_graph`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .discrete import MultipartyDensityState, concurrence, partial_trace, resolve_parties
from .gaussian import GaussianState
from .witnesses import (
    WitnessValue,
    bell_chsh,
    chsh_pair_steering,
    epr_E,
    s2,
    s3,
    s_tilde_m,
)

GRAPH_FORMAT = "steermon-graph"
GRAPH_VERSION = 1
CONCURRENCE_TOL = 1e-9


@dataclass(frozen=True, order=True)
class DirectedEdge:
    source: tuple[str, ...]
    target: tuple[str, ...]
    kind: str
    value: float
    detected: bool = True


@dataclass(frozen=True, order=True)
class UndirectedEdge:
    pair: tuple[str, str]
    concurrence: float


@dataclass(frozen=True)
class SteeringGraph:
    """Nodes are party labels; edges are kept sorted lexically."""

    nodes: tuple[str, ...]
    directed_edges: tuple[DirectedEdge, ...] = ()
    undirected_edges: tuple[UndirectedEdge, ...] = ()
    witnesses: tuple[WitnessValue, ...] = field(default=(), compare=False)

    def __post_init__(self):
        known = set(self.nodes)
        for e in self.directed_edges:
            if not e.detected:
                raise ValueError("directed edges are only allowed for detected witnesses")
            if not (set(e.source) | set(e.target)) <= known:
                raise ValueError(f"edge {e} references unknown parties")
        for e in self.undirected_edges:
            if not set(e.pair) <= known:
                raise ValueError(f"edge {e} references unknown parties")
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes)))
        object.__setattr__(self, "directed_edges", tuple(sorted(self.directed_edges)))
        object.__setattr__(self, "undirected_edges", tuple(sorted(self.undirected_edges)))

    def has_edge(self, source, target, kind: str | None = None) -> bool:
        s, t = tuple(sorted(source)), tuple(sorted(target))
        return any(e.source == s and e.target == t and (kind is None or e.kind == kind) for e in self.directed_edges)


def _evaluate(state, steered, group, kind: str, options: Mapping[str, Any]) -> WitnessValue:
    if kind == "E":
        if not isinstance(state, GaussianState):
            raise ValueError("witness E needs a Gaussian state")
        return epr_E(state, steered, group)
    if not isinstance(state, MultipartyDensityState):
        raise ValueError(f"witness {kind} needs a discrete state")
    opts = dict(options)
    if kind in ("S2", "S3"):
        opts.setdefault("mode", "optimized")
        return (s2 if kind == "S2" else s3)(state, steered, group, **opts)
    if kind == "S_tilde_m":
        return s_tilde_m(state, steered, group, **opts)
    if kind == "CHSH_pair":
        opts.setdefault("optimize", True)
        which = opts.pop("which", 1)
        return chsh_pair_steering(state, steered, group, **opts)[which - 1]
    if kind == "Bell_CHSH":
        opts.setdefault("optimize", True)
        return bell_chsh(state, steered, group, **opts)
    raise ValueError(f"unknown witness kind {kind!r}")


def _plan_item(item) -> tuple[Any, Any, str, Mapping[str, Any]]:
    if isinstance(item, Mapping):
        rest = {k: v for k, v in item.items() if k not in ("steered", "group", "kind")}
        return item["steered"], item["group"], item["kind"], rest.get("options", {})
    steered, group, kind, *opts = item
    return steered, group, kind, (opts[0] if opts else {})


def _labels_of(state, parties) -> tuple[str, ...]:
    if isinstance(state, GaussianState):
        return tuple(state.labels[k] for k in state.modes(parties))
    return tuple(state.labels[k] for k in resolve_parties(state, parties))


def build_steering_graph(state, witness_plan: Sequence = (), concurrence_tol: float = CONCURRENCE_TOL) -> SteeringGraph:
    """Evaluate a witness plan and collect detected steering as directed edges.

    Parameters
    ----------
    state : MultipartyDensityState or GaussianState
    witness_plan : sequence
        Items ``(steered, group, kind)`` or ``(steered, group, kind, options)``,
        or mappings with those keys. Spin witnesses default to optimised
        inference and correlation witnesses to optimised angles.
    concurrence_tol : float
        Qubit pairs with concurrence above this get an undirected edge.
    """
    nodes = tuple(state.labels)
    directed, records = [], []
    for item in witness_plan:
        steered, group, kind, options = _plan_item(item)
        s_lab, g_lab = _labels_of(state, steered), _labels_of(state, group)
        w = _evaluate(state, s_lab, g_lab, kind, options)
        records.append(w)
        if w.detects_steering:
            directed.append(DirectedEdge(tuple(sorted(g_lab)), tuple(sorted(s_lab)), kind, float(w.value)))
    undirected = []
    if isinstance(state, MultipartyDensityState) and all(d == 2 for d in state.party_dims) and state.n_parties >= 2:
        for i, j in itertools.combinations(range(state.n_parties), 2):
            c = concurrence(partial_trace(state, (i, j)))
            if c > concurrence_tol:
                undirected.append(UndirectedEdge((state.labels[i], state.labels[j]), float(c)))
    return SteeringGraph(nodes, tuple(directed), tuple(undirected), tuple(records))


# --------------------------------------------------------------------------- #
# export
# --------------------------------------------------------------------------- #


def _group_name(labels: Sequence[str]) -> str:
    return labels[0] if len(labels) == 1 else "{" + ",".join(labels) + "}"


def _to_dot(graph: SteeringGraph) -> str:
    lines = ["digraph steering {"]
    lines += [f"  {n};" for n in graph.nodes]
    for e in graph.directed_edges:
        lines.append(f'  {_group_name(e.source)} -> {_group_name(e.target)} [label="{e.kind}:{e.value!r}"];')
    for e in graph.undirected_edges:
        lines.append(f'  {e.pair[0]} -- {e.pair[1]} [label="{e.concurrence!r}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: SteeringGraph) -> dict:
    return {
        "format": GRAPH_FORMAT,
        "version": GRAPH_VERSION,
        "nodes": list(graph.nodes),
        "directed_edges": [
            {"source": list(e.source), "target": list(e.target), "kind": e.kind, "value": e.value, "detected": e.detected}
            for e in graph.directed_edges
        ],
        "undirected_edges": [{"pair": list(e.pair), "concurrence": e.concurrence} for e in graph.undirected_edges],
    }


def export_graph(graph: SteeringGraph, fmt: str = "dot") -> str:
    """Render a graph as ``"dot"`` or ``"structured"`` (JSON) text."""
    if fmt == "dot":
        return _to_dot(graph)
    if fmt == "structured":
        return json.dumps(graph_to_dict(graph), indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown graph format {fmt!r}; expected 'dot' or 'structured'")


def graph_from_dict(doc: Mapping[str, Any]) -> SteeringGraph:
    if doc.get("format") != GRAPH_FORMAT:
        raise ValueError(f"not a {GRAPH_FORMAT} document")
    if doc.get("version") != GRAPH_VERSION:
        raise ValueError(f"unsupported graph version {doc.get('version')!r}")
    directed = tuple(
        DirectedEdge(tuple(e["source"]), tuple(e["target"]), e["kind"], float(e["value"]), bool(e["detected"]))
        for e in doc["directed_edges"]
    )
    undirected = tuple(UndirectedEdge(tuple(e["pair"]), float(e["concurrence"])) for e in doc["undirected_edges"])
    return SteeringGraph(tuple(doc["nodes"]), directed, undirected)


def parse_graph(text: str) -> SteeringGraph:
    """Inverse of ``export_graph(graph, "structured")``."""
    return graph_from_dict(json.loads(text))
