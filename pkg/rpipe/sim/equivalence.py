"""Run a program and a configured pipeline side by side over one trace."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from rpipe.ir.config import RuntimeConfig
from rpipe.ir.nodes import CamImpl, PipelineArch, ProtocolProgram
from rpipe.sim.executor import Evaluation, PipelineExecutor, ProtocolExecutor, commit
from rpipe.sim.packet import Packet, PacketResult
from rpipe.sim.state import StateStore
from rpipe.sim.trace import random_trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mismatch:
    packet: bytes
    oracle: PacketResult
    pipeline: PacketResult
    first_divergent_node: str | None

    def describe(self) -> str:
        where = f" (first divergent node {self.first_divergent_node})" if self.first_divergent_node else ""
        return f"packet {self.packet.hex()}: oracle {self.oracle.describe()}, pipeline {self.pipeline.describe()}{where}"


@dataclass
class EquivalenceReport:
    packets_run: int = 0
    mismatches: list[Mismatch] = field(default_factory=list)
    state_mismatches: list[str] = field(default_factory=list)

    @property
    def equivalent(self) -> bool:
        return not self.mismatches and not self.state_mismatches


def _first_divergence(program: ProtocolProgram, oracle: Evaluation, pipeline: Evaluation, order: Sequence[str]) -> str | None:
    """First program node (in evaluation order) whose value the pipeline never produced."""
    produced = set(pipeline.values.values())
    for nid in order:
        for port in range(program.nodes[nid].output_ports):
            value = oracle.values.get((nid, port))
            if value is not None and value not in produced:
                return nid
    return None


def _cam_impls(program: ProtocolProgram, arch: PipelineArch, config: RuntimeConfig) -> dict[str, CamImpl]:
    return {tid: arch.cams[mem].impl for tid, mem in config.mem_bind.items() if tid in program.tables and mem in arch.cams}


def check_equivalence(
    program: ProtocolProgram,
    arch: PipelineArch,
    config: RuntimeConfig,
    trace: Sequence[bytes] | tuple[int, int],
    initial_state: StateStore | None = None,
    hash_seed: int = 0,
    max_mismatches: int = 20,
) -> EquivalenceReport:
    """Compare verdicts packet by packet and the bound memories after the trace.

    ``trace`` is a list of packets or a ``(seed, count)`` pair for
    ``random_trace``. ``initial_state`` is given in program terms (array and
    table ids) and is copied into the bound memories of the pipeline.
    """
    if isinstance(trace, tuple) and len(trace) == 2 and all(isinstance(x, int) for x in trace):
        trace = random_trace(*trace)
    oracle = ProtocolExecutor(program)
    pipeline = PipelineExecutor(arch, config)
    proto_state = initial_state or StateStore.for_program(program, _cam_impls(program, arch, config), hash_seed)
    pipe_state = proto_state.rebind(StateStore.for_arch(arch, proto_state.hash_seed), config.mem_bind)

    report = EquivalenceReport()
    for data in trace:
        packet = Packet(data)
        expected = oracle.evaluate(proto_state, packet)
        actual = pipeline.evaluate(pipe_state, packet)
        report.packets_run += 1
        if expected.result != actual.result:
            # only the first few mismatches get a divergence search
            located = len(report.mismatches) < max_mismatches
            node = _first_divergence(program, expected, actual, oracle.order) if located else None
            report.mismatches.append(Mismatch(data, expected.result, actual.result, node))
        proto_state = commit(proto_state, expected.writes)
        pipe_state = commit(pipe_state, actual.writes)

    report.state_mismatches = proto_state.differences(pipe_state.project(config.mem_bind))
    logger.info(
        "equivalence over %d packets: %d verdict mismatches, %d state mismatches",
        report.packets_run,
        len(report.mismatches),
        len(report.state_mismatches),
    )
    return report
