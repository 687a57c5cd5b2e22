"""Cycle arrival arithmetic for pipeline architectures.

arrival(PacketIn) = 0 and arrival(node) = common input arrival + latency.
Constant outputs are wildcards (``None``) that fit any cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from rpipe.ir.graph import topo_order
from rpipe.ir.nodes import PipeKind, PipelineArch


@dataclass
class ArrivalMismatch:
    node: str
    arrivals: tuple[int, ...]

    def describe(self) -> str:
        return "arrival mismatch " + " vs ".join(str(a) for a in self.arrivals)


@dataclass
class Arrivals:
    output: dict[str, int | None] = field(default_factory=dict)
    inputs: dict[str, int | None] = field(default_factory=dict)
    mismatches: list[ArrivalMismatch] = field(default_factory=list)

    def depth(self, arch: PipelineArch) -> int:
        """Cycles from packet in to packet out."""
        return self.inputs.get(arch.only(PipeKind.PACKET_OUT).id) or 0


def compute_arrivals(arch: PipelineArch) -> Arrivals:
    result = Arrivals()
    for nid in topo_order(arch.nodes):
        node = arch.nodes[nid]
        seen = sorted({result.output[p.node] for p in node.inputs if result.output.get(p.node) is not None})
        if len(seen) > 1:
            result.mismatches.append(ArrivalMismatch(nid, tuple(seen)))
        common = seen[-1] if seen else None
        if node.kind is PipeKind.PACKET_IN:
            common = 0
            result.output[nid] = 0
        elif common is None:
            result.output[nid] = None
        else:
            result.output[nid] = common + arch.latency(node)
        result.inputs[nid] = common
    return result
