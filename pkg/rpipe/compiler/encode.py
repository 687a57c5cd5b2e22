"""SAT encoding of "this configured pipeline computes this program".

Variables are literals of four kinds:

* ``OUT(hv, lv)``: hardware value ``hv`` equals program value ``lv`` for
  every packet (for nodes without outputs, ``h`` realizes ``l``);
* ``PICK(r, i)``: router ``r`` selects its input ``i``;
* ``ALUOP(a, op)``: ALU ``a`` performs ``op``;
* ``BIND(s, m)``: program array/table ``s`` lives in memory ``m``.

Statically incompatible OUT pairs get no variable and are dropped from the
clauses that mention them (``materialize_rule_out`` keeps them as unit
clauses instead).
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from rpipe._compat import StrEnum
from itertools import combinations
from typing import Any, Iterable, NamedTuple

from rpipe.compiler.restrict import EdgeView, full_view
from rpipe.compiler.static_check import MatchContext, bind_candidates, value_ports
from rpipe.errors import EncodeError
from rpipe.ir.nodes import (
    STATE_WRITE_KINDS,
    Opcode,
    PipeKind,
    PipelineArch,
    PipeNode,
    Port,
    ProtocolProgram,
    ProtoKind,
    ProtoNode,
    alu_operand_slots,
)

logger = logging.getLogger(__name__)

# synthetic program constant an idle hardware write enable must carry
IDLE_ENABLE = "__idle_enable__"


class LitKind(StrEnum):
    OUT = "OUT"
    PICK = "PICK"
    ALUOP = "ALUOP"
    BIND = "BIND"


def _value_name(port: Port) -> str:
    return port.node if port.port == 0 else f"{port.node}:{port.port}"


class Literal(NamedTuple):
    kind: LitKind
    a: Any
    b: Any

    def name(self) -> str:
        if self.kind is LitKind.OUT:
            return f"OUT({_value_name(self.a)},{_value_name(self.b)})"
        return f"{self.kind}({self.a},{self.b})"


@dataclass
class LitMap:
    """Bijection between literals and SAT variables 1..n."""

    literals: list[Literal] = field(default_factory=list)
    _vars: dict[Literal, int] = field(default_factory=dict, repr=False)

    def var(self, literal: Literal) -> int:
        found = self._vars.get(literal)
        if found is None:
            self.literals.append(literal)
            found = self._vars[literal] = len(self.literals)
        return found

    def get(self, literal: Literal) -> int | None:
        return self._vars.get(literal)

    def literal(self, var: int) -> Literal:
        return self.literals[var - 1]

    def names(self) -> dict[int, str]:
        return {i: lit.name() for i, lit in enumerate(self.literals, start=1)}

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self):
        return iter(enumerate(self.literals, start=1))


@dataclass
class CnfInstance:
    clauses: list[list[int]]
    litmap: LitMap
    program: ProtocolProgram
    view: EdgeView
    families: Counter = field(default_factory=Counter)

    @property
    def var_count(self) -> int:
        return len(self.litmap)

    def __post_init__(self) -> None:
        n = self.var_count
        for clause in self.clauses:
            if not clause:
                raise ValueError("empty clause in CNF instance")
            if any(not 0 < abs(x) <= n for x in clause):
                raise ValueError(f"clause {clause} references a variable outside 1..{n}")


def with_idle_enable(program: ProtocolProgram, arch: PipelineArch) -> ProtocolProgram:
    """Add the width-1 zero constant idle hardware writes are matched against."""
    has_writes = any(n.is_write for n in arch if n.kind in (PipeKind.RAM_ACCESS, PipeKind.CAM_ACCESS))
    if not has_writes or IDLE_ENABLE in program.nodes:
        return program
    nodes = dict(program.nodes)
    nodes[IDLE_ENABLE] = ProtoNode(IDLE_ENABLE, ProtoKind.CONSTANT, {"value": 0, "width": 1})
    return ProtocolProgram(nodes, program.arrays, program.tables)


def alu_operand_inputs(h: PipeNode, l: ProtoNode) -> list[Port]:
    """Hardware inputs lined up with the operands of ``l``."""
    if l.kind is ProtoKind.CONDITIONAL:
        return list(h.inputs[:3])
    return [h.inputs[s] for s in alu_operand_slots(h)[: len(l.inputs)]]


def state_of(node: ProtoNode) -> str | None:
    return node.attrs.get("array") or node.attrs.get("table")


def memory_of(node: PipeNode) -> str | None:
    return node.attrs.get("ram") or node.attrs.get("cam")


class _Encoder:
    def __init__(
        self,
        program: ProtocolProgram,
        arch: PipelineArch,
        view: EdgeView,
        materialize_rule_out: bool,
        depth_pruning: bool,
    ) -> None:
        for node in program.of_kind(ProtoKind.ARRAY_WRITE) + program.of_kind(ProtoKind.TABLE_WRITE):
            if len(node.inputs) != 3:
                raise ValueError(f"write {node.id!r} has no enable; normalize the program first")
        self.program = with_idle_enable(program, arch)
        self.arch = arch
        self.view = view
        self.materialize = materialize_rule_out
        self.ctx = MatchContext.build(self.program, arch, view, depth_pruning)
        self.litmap = LitMap()
        self.clauses: list[list[int]] = []
        self.families: Counter = Counter()
        self.matches: dict[Port, list[Port]] = {}

    def out(self, hv: Port, lv: Port) -> int | None:
        return self.litmap.get(Literal(LitKind.OUT, hv, lv))

    def emit(self, family: str, lits: Iterable[int | None]) -> None:
        clause = [x for x in lits if x is not None]
        if not clause:
            raise EncodeError(f"{family} constraint has no candidate")
        self.clauses.append(clause)
        self.families[family] += 1

    def at_most_one(self, family: str, lits: list[int]) -> None:
        for a, b in combinations(lits, 2):
            self.emit(family, [-a, -b])

    def declare_matches(self) -> None:
        all_values = [Port(n.id, p) for n in sorted(self.program, key=lambda n: n.id) for p in value_ports(n)]
        for h in sorted(self.arch, key=lambda n: n.id):
            for port in value_ports(h):
                hv = Port(h.id, port)
                found = [lv for lv in self.ctx.candidates(h, port) if self.ctx.compatible(hv, lv)]
                self.matches[hv] = found
                for lv in found:
                    self.litmap.var(Literal(LitKind.OUT, hv, lv))
                if self.materialize:
                    ok = set(found)
                    for lv in all_values:
                        if lv not in ok:
                            self.emit("rule-out", [-self.litmap.var(Literal(LitKind.OUT, hv, lv))])

    def encode_node(self, h: PipeNode) -> None:
        hv = Port(h.id, 0)
        matched = self.matches.get(hv, [])
        match h.kind:
            case PipeKind.REGISTER:
                for lv in matched:
                    self.emit("equals-input", [-self.out(hv, lv), self.out(h.inputs[0], lv)])
            case PipeKind.ROUTER:
                inputs = self.view.router_inputs(h.id)
                picks = [self.litmap.var(Literal(LitKind.PICK, h.id, i)) for i, _ in inputs]
                self.emit("at-least-one", picks)
                self.at_most_one("at-most-one", picks)
                for lv in matched:
                    o = self.out(hv, lv)
                    for pick, (_, src) in zip(picks, inputs):
                        self.emit("output-equals-input", [-o, -pick, self.out(src, lv)])
            case PipeKind.ALU:
                ops = [self.litmap.var(Literal(LitKind.ALUOP, h.id, op)) for op in h.ops]
                self.at_most_one("at-most-one", ops)
                for lv in matched:
                    l = self.program.nodes[lv.node]
                    o = self.out(hv, lv)
                    for lin, hin in zip(l.inputs, alu_operand_inputs(h, l)):
                        self.emit("operands-match", [-o, self.out(hin, lin)])
                    self.emit("alu-op", [-o, self.litmap.get(Literal(LitKind.ALUOP, h.id, Opcode(l.op)))])
            case PipeKind.CONSTANT:
                if h.runtime_constant:
                    for l1, l2 in combinations(matched, 2):
                        v1 = self.program.nodes[l1.node].attrs["value"]
                        v2 = self.program.nodes[l2.node].attrs["value"]
                        if v1 != v2:
                            self.emit("const-conflict", [-self.out(hv, l1), -self.out(hv, l2)])
            case PipeKind.PACKET_IN:
                pass
            case _:
                for lv in matched:
                    l = self.program.nodes[lv.node]
                    o = self.out(hv, lv)
                    for lin, hin in zip(l.inputs, h.inputs):
                        self.emit("operands-match", [-o, self.out(hin, lin)])
                    if h.kind in (PipeKind.RAM_ACCESS, PipeKind.CAM_ACCESS):
                        bind = self.litmap.get(Literal(LitKind.BIND, state_of(l), memory_of(h)))
                        self.emit("bind", [-o, bind])

    def declare_bindings(self) -> None:
        used = {state_of(n) for n in self.program if state_of(n) is not None}
        per_memory: dict[str, list[int]] = {}
        for sid, memories in bind_candidates(self.program, self.arch).items():
            if sid not in used:
                continue
            binds = [self.litmap.var(Literal(LitKind.BIND, sid, m)) for m in memories]
            if not binds:
                raise EncodeError(f"no memory of the architecture fits program state {sid!r}")
            self.emit("bind-alo", binds)
            self.at_most_one("bind-amo", binds)
            for m, b in zip(memories, binds):
                per_memory.setdefault(m, []).append(b)
        for m in sorted(per_memory):
            self.at_most_one("bind-exclusive", per_memory[m])

    def anchor(self) -> None:
        l_out = Port(self.program.only(ProtoKind.PACKET_OUT).id, 0)
        h_out = Port(self.arch.only(PipeKind.PACKET_OUT).id, 0)
        lit = self.out(h_out, l_out)
        if lit is None:
            raise EncodeError("no hardware PacketOut is compatible with the program's PacketOut")
        self.emit("anchor", [lit])

        hw_writes = [
            n for n in sorted(self.arch, key=lambda n: n.id)
            if n.kind in (PipeKind.RAM_ACCESS, PipeKind.CAM_ACCESS) and n.is_write
        ]
        for l in sorted(self.program, key=lambda n: n.id):
            if l.kind not in STATE_WRITE_KINDS:
                continue
            lits = [self.out(Port(h.id, 0), Port(l.id, 0)) for h in hw_writes]
            if all(x is None for x in lits):
                raise EncodeError(f"no hardware write can realize {l.id!r}")
            self.emit("write-alo", lits)
        idle = Port(IDLE_ENABLE, 0)
        for h in hw_writes:
            hv = Port(h.id, 0)
            realized = [self.out(hv, lv) for lv in self.matches.get(hv, [])]
            self.at_most_one("write-amo", realized)
            lits = realized + [self.out(h.inputs[2], idle)]
            if all(x is None for x in lits):
                raise EncodeError(f"hardware write {h.id!r} can neither realize a program write nor stay idle")
            self.emit("idle-write", lits)

    def run(self) -> CnfInstance:
        self.declare_matches()
        self.declare_bindings()
        for h in sorted(self.arch, key=lambda n: n.id):
            self.encode_node(h)
        self.anchor()
        return CnfInstance(self.clauses, self.litmap, self.program, self.view, self.families)


def encode(
    program: ProtocolProgram,
    arch: PipelineArch,
    view: EdgeView | None = None,
    materialize_rule_out: bool = False,
    depth_pruning: bool = True,
) -> CnfInstance:
    """Clauses satisfiable iff some configuration of ``view`` realizes ``program``.

    Raises ``EncodeError`` when a root constraint has no candidate at all.
    """
    view = view or full_view(arch)
    cnf = _Encoder(program, arch, view, materialize_rule_out, depth_pruning).run()
    logger.debug(
        "encoded %d vars, %d clauses (degree limit %d): %s",
        cnf.var_count,
        len(cnf.clauses),
        view.degree_limit,
        dict(sorted(cnf.families.items())),
    )
    return cnf
