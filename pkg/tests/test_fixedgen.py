import json

import pytest
from scapy.layers.inet import IP, TCP, UDP
from scapy.layers.l2 import Ether
from scapy.packet import Raw

from rpipe.compiler import Outcome, SearchParams, compile
from rpipe.errors import ParameterError
from rpipe.fixedgen import generate_fixed
from rpipe.frontend import BUILTINS, builtin_program
from rpipe.frontend.builder import ones_sum
from rpipe.hwgen import elaborate
from rpipe.ir import CamImpl, PipeKind, validate_pipeline
from rpipe.ir.timing import compute_arrivals
from rpipe.sim import StateStore, check_equivalence, load_state, run_protocol


# 443 -> 80, as the table key reads it in-word
FW_BLOCKED = int.from_bytes((443).to_bytes(2, "big") + (80).to_bytes(2, "big"), "little")
# memcached UDP frame header
FRAME = b"\x00\x07\x00\x00\x00\x01\x00\x00"


def preload(program):
    """Table and array contents that make the bundled programs take their rewrite paths."""
    store = StateStore.for_program(program)
    if "nat_table" in program.tables:
        correction = ones_sum([0x611E, ~0x5000 & 0xFFFF])
        doc = {
            "kind": "state",
            "arrays": {"nat_port": {"0": 0x5000}, "nat_csum": {"0": correction * 0x10001}},
            "tables": {"nat_table": [{"index": 0, "key": 0x611E}]},
        }
        return load_state(json.dumps(doc), store)
    if "mc_keys" in program.tables:
        key = int.from_bytes(b"k001", "little")
        doc = {"kind": "state", "arrays": {"mc_values": {"0": 0x31323334}}, "tables": {"mc_keys": [{"index": 0, "key": key}]}}
        return load_state(json.dumps(doc), store)
    if "fw_table" in program.tables:
        doc = {"kind": "state", "tables": {"fw_table": [{"index": 5, "key": FW_BLOCKED}]}}
        return load_state(json.dumps(doc), store)
    return store


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_fixed_pipeline_matches_program(name):
    program = builtin_program(name)
    fixed = generate_fixed(program)
    assert validate_pipeline(fixed.arch).ok
    report = check_equivalence(program, fixed.arch, fixed.config, (11, 200), initial_state=preload(program))
    assert report.equivalent, [m.describe() for m in report.mismatches[:3]]


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_fixed_pipeline_has_no_flexibility(name):
    program = builtin_program(name)
    arch = generate_fixed(program).arch
    assert all(len(r.inputs) == 1 for r in arch.of_kind(PipeKind.ROUTER))
    assert all(len(a.ops) == 1 for a in arch.of_kind(PipeKind.ALU))
    assert not any(c.runtime_constant for c in arch.of_kind(PipeKind.CONSTANT))
    assert elaborate(arch).config_regs == []
    # every program node keeps its id
    assert set(program.nodes) <= set(arch.nodes)


def test_fixed_schedule(tiny_program):
    fixed = generate_fixed(tiny_program)
    assert fixed.stage_of["y"] == 0
    assert fixed.stage_of["out"] == 1
    assert compute_arrivals(fixed.arch).depth(fixed.arch) == 1
    assert fixed.config.mem_bind == {}


def test_fixed_pipeline_compiles_its_own_program(tiny_program):
    fixed = generate_fixed(tiny_program)
    result = compile(tiny_program, fixed.arch, SearchParams(degree_limits=(0,), total_timeout=30.0))
    assert result.outcome is Outcome.FEASIBLE


def test_cam_impl_override(memcached_rx):
    fixed = generate_fixed(memcached_rx, {"mc_keys": CamImpl.HASH})
    assert fixed.arch.cams["mc_keys"].impl is CamImpl.HASH
    assert fixed.config.mem_bind == {"mc_keys": "mc_keys", "mc_values": "mc_values"}
    with pytest.raises(ParameterError):
        generate_fixed(memcached_rx, {"nope": CamImpl.HASH})


def _flow(name: str, i: int, hit: bool) -> tuple[type, int, int, bytes]:
    """(L4 layer, sport, dport, payload) of the i-th directed packet for a builtin."""
    if name == "nat":
        return TCP, 40000 + i, 7777 if hit else 8080, b"x" * i
    if name == "firewall":
        return TCP, 443 if hit else 53, 80, b"GET /"
    if name == "memcached_rx":
        return UDP, 40000 + i, 11211, FRAME + b"get " + (b"k001" if hit else b"zzzz") + b"\r\n"
    tag = b"VALUE " if hit else b"VALUX "
    return UDP, 11211, 40000 + i, FRAME + tag + b"k%03d 0 4\r\n" % i + b"%04d\r\nEND\r\n" % i


def _packet(l4: type, sport: int, dport: int, payload: bytes, ether_type: int = 0x0800) -> bytes:
    fields = {"sport": sport, "dport": dport}
    if l4 is TCP:
        fields.update(seq=1000, ack=77, flags="PA")
    return bytes(Ether(type=ether_type) / IP(src="10.0.0.1", dst="10.0.0.2") / l4(**fields) / Raw(payload))


def directed_trace(name: str) -> list[bytes]:
    """Hits, misses, truncations, non-IPv4 frames and the wrong transport: 50 packets."""
    hits = [_packet(*_flow(name, i, True)) for i in range(10)]
    misses = [_packet(*_flow(name, i, False)) for i in range(10)]
    truncated = [p[: 5 + 6 * i] for i, p in enumerate(hits)]
    not_ipv4 = [_packet(*_flow(name, i, True), ether_type=0x86DD) for i in range(10)]
    swapped = []
    for i in range(10):
        l4, sport, dport, payload = _flow(name, i, True)
        swapped.append(_packet(UDP if l4 is TCP else TCP, sport, dport, payload))
    return hits + misses + truncated + not_ipv4 + swapped


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_fixed_round_trip(name):
    program = builtin_program(name)
    fixed = generate_fixed(program)
    result = compile(program, fixed.arch, SearchParams(degree_limits=(0,), total_timeout=60.0))
    assert result.outcome is Outcome.FEASIBLE
    for trace in ((7, 1000), directed_trace(name)):
        report = check_equivalence(program, fixed.arch, result.config, trace, initial_state=preload(program))
        assert report.equivalent, [m.describe() for m in report.mismatches[:3]]


@pytest.mark.parametrize("name", ["nat", "firewall", "memcached_rx"])
def test_directed_trace_takes_the_rewrite_path(name):
    program = builtin_program(name)
    trace = directed_trace(name)
    assert len(trace) == 50
    state = preload(program)
    hit, _ = run_protocol(program, state, trace[0])
    miss, _ = run_protocol(program, state, trace[10])
    assert hit.data != trace[0]
    assert miss.data == trace[10]
