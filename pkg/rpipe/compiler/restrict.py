"""Degree-limited views of an architecture.

Only Router inputs are sampled; operand edges of every other node are
positional and always kept.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from rpipe.ir.nodes import PipeKind, PipelineArch, PipeNode, Port


@dataclass(frozen=True)
class EdgeView:
    arch: PipelineArch
    degree_limit: int
    seed: int
    kept: dict[str, tuple[int, ...]]

    def router_inputs(self, node_id: str) -> list[tuple[int, Port]]:
        """(ordinal, source) pairs of the router inputs that survived."""
        node = self.arch.nodes[node_id]
        ordinals = self.kept.get(node_id, range(len(node.inputs)))
        return [(i, node.inputs[i]) for i in ordinals]

    def nodes(self) -> dict[str, PipeNode]:
        """Node map with the dropped router edges removed."""
        out = dict(self.arch.nodes)
        for nid, ordinals in self.kept.items():
            node = out[nid]
            out[nid] = replace(node, inputs=tuple(node.inputs[i] for i in ordinals))
        return out

    @property
    def dropped_edges(self) -> int:
        return sum(len(self.arch.nodes[nid].inputs) - len(kept) for nid, kept in self.kept.items())


def full_view(arch: PipelineArch) -> EdgeView:
    return EdgeView(arch, 0, 0, {})


def restrict(arch: PipelineArch, degree_limit: int, seed: int) -> EdgeView:
    """Keep a seeded uniformly random ``degree_limit``-subset of each wide router's inputs.

    ``degree_limit`` 0 keeps every edge.
    """
    if degree_limit < 0:
        raise ValueError(f"degree limit must be >= 0, got {degree_limit}")
    if degree_limit == 0:
        return full_view(arch)
    rng = random.Random(seed)
    kept: dict[str, tuple[int, ...]] = {}
    for router in arch.of_kind(PipeKind.ROUTER):
        fan_in = len(router.inputs)
        if fan_in > degree_limit:
            kept[router.id] = tuple(sorted(rng.sample(range(fan_in), degree_limit)))
    return EdgeView(arch, degree_limit, seed, kept)
