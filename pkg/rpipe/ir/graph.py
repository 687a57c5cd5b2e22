"""Graph views over node maps (shared by programs and architectures)."""

from __future__ import annotations

from typing import Callable, Mapping, Protocol, Sequence

import networkx as nx

from rpipe.ir.nodes import Port


class _Node(Protocol):
    id: str
    inputs: tuple[Port, ...]


def dependency_graph(nodes: Mapping[str, _Node]) -> nx.DiGraph:
    """Producer -> consumer edges; dangling inputs are left out."""
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)
    for node in nodes.values():
        for src in node.inputs:
            if src.node in nodes:
                graph.add_edge(src.node, node.id)
    return graph


def topo_order(nodes: Mapping[str, _Node]) -> list[str]:
    """Deterministic topological order (ties broken by id).

    Raises ``networkx.NetworkXUnfeasible`` on a cycle.
    """
    return list(nx.lexicographical_topological_sort(dependency_graph(nodes)))


def find_cycle(nodes: Mapping[str, _Node]) -> Sequence[str] | None:
    try:
        edges = nx.find_cycle(dependency_graph(nodes))
    except nx.NetworkXNoCycle:
        return None
    return [u for u, _ in edges]


def consumers(nodes: Mapping[str, _Node]) -> dict[str, list[tuple[str, int]]]:
    """For each node id, the (consumer id, input ordinal) pairs reading it."""
    out: dict[str, list[tuple[str, int]]] = {nid: [] for nid in nodes}
    for node in nodes.values():
        for ordinal, src in enumerate(node.inputs):
            out.setdefault(src.node, []).append((node.id, ordinal))
    return out


def weighted_depth(nodes: Mapping[str, _Node], weight: Callable[[str], int]) -> dict[str, int]:
    """Largest total ``weight`` along any path ending at each node (inclusive)."""
    graph = dependency_graph(nodes)
    depth: dict[str, int] = {}
    for nid in nx.topological_sort(graph):
        preds = [depth[p] for p in graph.predecessors(nid)]
        depth[nid] = max(preds, default=0) + weight(nid)
    return depth
