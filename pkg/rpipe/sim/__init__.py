"""Bit-exact packet simulation of programs and configured pipelines."""

from rpipe.sim.equivalence import EquivalenceReport, Mismatch, check_equivalence
from rpipe.sim.executor import PipelineExecutor, ProtocolExecutor, run_pipeline, run_protocol
from rpipe.sim.ops import eval_op
from rpipe.sim.packet import Packet, PacketResult
from rpipe.sim.state import CamState, StateStore, dump_state, load_state
from rpipe.sim.trace import random_trace, read_trace, write_trace

__all__ = [
    "CamState",
    "EquivalenceReport",
    "Mismatch",
    "Packet",
    "PacketResult",
    "PipelineExecutor",
    "ProtocolExecutor",
    "StateStore",
    "check_equivalence",
    "dump_state",
    "eval_op",
    "load_state",
    "random_trace",
    "read_trace",
    "run_pipeline",
    "run_protocol",
    "write_trace",
]
