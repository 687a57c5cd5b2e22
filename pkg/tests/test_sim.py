import json
from dataclasses import replace

import pytest
from scapy.layers.inet import IP, TCP, UDP
from scapy.layers.l2 import Ether
from scapy.packet import Raw

from rpipe.errors import ArtifactSchemaError, ArtifactSyntaxError, ConfigError, PacketError
from rpipe.fixedgen import generate_fixed
from rpipe.frontend.builder import ones_sum
from rpipe.ir import CamImpl, Opcode, RuntimeConfig
from rpipe.sim import (
    Packet,
    StateStore,
    check_equivalence,
    dump_state,
    load_state,
    random_trace,
    read_trace,
    run_pipeline,
    run_protocol,
    write_trace,
)
from rpipe.sim.packet import deparse

CLIENT = {"src": "10.0.0.1", "dst": "10.0.0.2"}
PORT_7777 = 0x611E  # 7777 read in-word
PORT_80 = 0x5000


def nat_state(nat, key=PORT_7777, new_port=PORT_80):
    correction = ones_sum([key, ~new_port & 0xFFFF])
    doc = {
        "kind": "state",
        "arrays": {"nat_port": {"0": new_port}, "nat_csum": {"0": correction * 0x10001}},
        "tables": {"nat_table": [{"index": 0, "key": key}]},
    }
    return load_state(json.dumps(doc), StateStore.for_program(nat))


def tcp_packet(dport: int, payload: bytes = b"hello world") -> Ether:
    return Ether() / IP(**CLIENT) / TCP(sport=40000, dport=dport, seq=1000, flags="PA") / Raw(payload)


def test_nat_rewrites_port_and_checksum(nat):
    original = tcp_packet(7777)
    result, _ = run_protocol(nat, nat_state(nat), bytes(original))

    expected = Ether(bytes(original))
    expected[TCP].dport = 80
    del expected[TCP].chksum
    assert result.data == bytes(expected)
    assert Ether(result.data)[TCP].chksum == Ether(bytes(expected))[TCP].chksum


@pytest.mark.parametrize("payload", [b"", b"x", b"A" * 300])
def test_nat_checksum_holds_for_any_payload(nat, payload):
    result, _ = run_protocol(nat, nat_state(nat), bytes(tcp_packet(7777, payload)))
    parsed = Ether(result.data)
    recomputed = parsed.copy()
    del recomputed[TCP].chksum
    assert parsed[TCP].dport == 80
    assert Ether(bytes(recomputed))[TCP].chksum == parsed[TCP].chksum


def test_nat_forwards_misses_and_udp_unchanged(nat):
    state = nat_state(nat)
    for pkt in (tcp_packet(8080), Ether() / IP(**CLIENT) / UDP(sport=1, dport=7777) / Raw(b"q")):
        data = bytes(pkt)
        result, after = run_protocol(nat, state, data)
        assert result.data == data
        assert not after.differences(state)


def test_nat_short_packet_is_forwarded(nat):
    result, _ = run_protocol(nat, nat_state(nat), b"\x01\x02\x03")
    assert result.data == b"\x01\x02\x03"


def memcached_response(key: bytes, value: bytes) -> bytes:
    frame = b"\x12\x34\0\0\0\x01\0\0"
    body = frame + b"VALUE " + key + b" 0 4\r\n" + value + b"\r\nEND\r\n"
    return bytes(Ether() / IP(src="10.0.0.9", dst="10.0.0.1") / UDP(sport=11211, dport=40000) / Raw(body))


def memcached_get(key: bytes) -> bytes:
    frame = b"\x56\x78\0\0\0\x01\0\0"
    return bytes(Ether() / IP(**CLIENT) / UDP(sport=40000, dport=11211) / Raw(frame + b"get " + key + b"\r\n"))


@pytest.mark.parametrize("impl", [CamImpl.REGISTER, CamImpl.HASH])
def test_memcached_learn_then_answer(memcached_rx, memcached_tx, impl):
    key, value = b"k001", b"\xde\xad\xbe\xef"
    state = StateStore.for_program(memcached_tx, {"mc_keys": impl}, hash_seed=11)
    response = memcached_response(key, value)
    result, state = run_protocol(memcached_tx, state, response)
    assert result.data == response

    request = memcached_get(key)
    reply, after = run_protocol(memcached_rx, state, request)
    assert len(reply.data) == 77
    assert reply.data[50:] == b"VALUE " + key + b" 0 4\r\n" + value + b"\r\nEND\r\n"
    parsed = Ether(reply.data)
    assert parsed[IP].src == CLIENT["dst"] and parsed[IP].dst == CLIENT["src"]
    assert parsed[UDP].dport == 40000 and parsed[UDP].sport == 11211
    recomputed = parsed.copy()
    del recomputed[IP].chksum
    assert Ether(bytes(recomputed))[IP].chksum == parsed[IP].chksum
    assert not after.differences(state)


def test_memcached_miss_goes_to_server(memcached_rx):
    request = memcached_get(b"zzzz")
    result, _ = run_protocol(memcached_rx, StateStore.for_program(memcached_rx), request)
    assert result.data == request


def test_firewall_resets_blocked_flow(firewall):
    original = Ether() / IP(**CLIENT) / TCP(sport=40000, dport=80, seq=5, ack=77, flags="PA") / Raw(b"GET /")
    key = int.from_bytes((40000).to_bytes(2, "big") + (80).to_bytes(2, "big"), "little")
    doc = {"kind": "state", "tables": {"fw_table": [{"index": 3, "key": key}]}}
    state = load_state(json.dumps(doc), StateStore.for_program(firewall))
    result, _ = run_protocol(firewall, state, bytes(original))

    assert len(result.data) == 54
    rst = Ether(result.data)
    assert rst[TCP].flags == "R"
    assert (rst[TCP].sport, rst[TCP].dport) == (80, 40000)
    assert rst[TCP].seq == 77
    recomputed = rst.copy()
    del recomputed[IP].chksum
    del recomputed[TCP].chksum
    again = Ether(bytes(recomputed))
    assert (again[IP].chksum, again[TCP].chksum) == (rst[IP].chksum, rst[TCP].chksum)


# --- deparser commands ---------------------------------------------------------


def test_deparse_commands():
    packet = Packet(b"abcdefgh")
    prefix = int.from_bytes(b"WXYZ", "little")
    assert deparse(packet, 4, 0, prefix, 8).data == b"WXYZefgh"
    assert deparse(packet, 4, 1, prefix, 8).data == b"WXYZ"
    assert deparse(packet, 4, 0, prefix, 6).data == b"WXYZef"
    assert deparse(packet, 4, 2, prefix, 8).dropped
    assert deparse(packet, 4, 3, prefix, 8).dropped


def test_short_packet_prefix_is_zero_padded(tiny_program):
    result, _ = run_protocol(tiny_program, StateStore(), b"\x01\x00")
    assert result.data == b"\x02\x00"


def test_packet_over_mtu_rejected():
    with pytest.raises(PacketError):
        Packet(b"\0" * 20, mtu=16)


def test_length_field_saturates():
    assert Packet(b"\0" * 70000, mtu=70000).length_field() == 0xFFFF


# --- state documents -------------------------------------------------------------


def test_state_dump_load_round_trip(memcached_tx):
    state = StateStore.for_program(memcached_tx, {"mc_keys": CamImpl.HASH}, hash_seed=3)
    _, state = run_protocol(memcached_tx, state, memcached_response(b"abcd", b"1234"))
    again = load_state(dump_state(state), StateStore.for_program(memcached_tx, {"mc_keys": CamImpl.HASH}))
    assert again.hash_seed == 3
    assert not again.differences(state)


def test_state_document_errors(nat):
    store = StateStore.for_program(nat)
    with pytest.raises(ArtifactSchemaError):
        load_state('{"kind": "config"}', store)
    with pytest.raises(ArtifactSchemaError):
        load_state('{"kind": "state", "arrays": {"nope": {}}}', store)
    with pytest.raises(ArtifactSchemaError):
        load_state('{"kind": "state", "tables": {"nat_table": [{"index": 999, "key": 1}]}}', store)


@pytest.mark.parametrize(
    "cells",
    [{"-1": 7}, {"256": 7}, {"0": 1 << 40}, {"0": -3}, {"zero": 1}, {"0": "7"}],
    ids=["negative-index", "past-end", "too-wide", "negative-value", "bad-index", "string-value"],
)
def test_array_preload_out_of_range(nat, cells):
    doc = json.dumps({"kind": "state", "arrays": {"nat_port": cells}})
    with pytest.raises(ArtifactSchemaError) as info:
        load_state(doc, StateStore.for_program(nat))
    assert info.value.field.startswith("$.arrays.nat_port.")


def test_array_preload_accepts_full_width_value(nat):
    state = load_state(json.dumps({"kind": "state", "arrays": {"nat_port": {"255": 0xFFFFFFFF}}}), StateStore.for_program(nat))
    assert state.arrays["nat_port"][255] == 0xFFFFFFFF


def test_hash_cam_collisions_overwrite():
    from rpipe.sim.state import CamState

    cam = CamState.empty(CamImpl.HASH, 32, 1)
    ok, index = cam.place(5, 0)
    cam.store(index, 5)
    assert cam.lookup(5, 0) == (True, 0)
    cam.store(cam.place(6, 0)[1], 6)
    assert cam.lookup(5, 0) == (False, 0)
    assert cam.lookup(6, 0) == (True, 0)


def test_register_cam_fills_first_free_entry():
    from rpipe.sim.state import CamState

    cam = CamState.empty(CamImpl.REGISTER, 32, 2)
    for key in (10, 20):
        cam.store(cam.place(key, 0)[1], key)
    assert cam.lookup(20, 0) == (True, 1)
    assert cam.place(30, 0) == (False, 0)


# --- traces ----------------------------------------------------------------------


def test_trace_text_round_trip():
    packets = random_trace(7, 25)
    assert read_trace(write_trace(packets, header="seed 7")) == packets


def test_random_trace_is_deterministic():
    assert random_trace(1, 10) == random_trace(1, 10)
    assert random_trace(1, 10) != random_trace(2, 10)


def test_read_trace_skips_comments_and_reports_line():
    assert read_trace("# header\n\nabcd  # trailing\n") == [b"\xab\xcd"]
    with pytest.raises(ArtifactSyntaxError) as info:
        read_trace("00\nzz\n")
    assert info.value.line == 2


# --- equivalence -----------------------------------------------------------------


def test_matching_config_is_equivalent(tiny_program, tiny_arch):
    config = RuntimeConfig({"ra": 0, "rb": 0}, {"alu": Opcode.ADD})
    report = check_equivalence(tiny_program, tiny_arch, config, (0, 200))
    assert report.packets_run == 200
    assert report.equivalent


def test_perturbed_router_is_caught(tiny_program, tiny_arch):
    config = RuntimeConfig({"ra": 0, "rb": 1}, {"alu": Opcode.ADD})
    trace = [b"\x04\x03\x02\x01payload", b"\xff\xff\xff\xff"]
    report = check_equivalence(tiny_program, tiny_arch, config, trace)
    assert not report.equivalent
    assert report.mismatches[0].first_divergent_node == "y"
    assert "first divergent node y" in report.mismatches[0].describe()


def _without(config, state_id):
    return replace(config, mem_bind={k: v for k, v in config.mem_bind.items() if k != state_id})


def test_live_read_of_unbound_memory_is_rejected(nat):
    fixed = generate_fixed(nat)
    state = StateStore.for_arch(fixed.arch)
    packet = bytes(tcp_packet(7777))
    result, _ = run_pipeline(fixed.arch, fixed.config, state, packet)
    assert result.data == packet
    with pytest.raises(ConfigError, match="nat_port"):
        run_pipeline(fixed.arch, _without(fixed.config, "nat_port"), state, packet)


def test_dead_write_to_unbound_memory_is_inert(memcached_tx):
    fixed = generate_fixed(memcached_tx)
    state = StateStore.for_arch(fixed.arch)
    response = memcached_response(b"k001", b"\xde\xad\xbe\xef")
    result, after = run_pipeline(fixed.arch, _without(fixed.config, "mc_values"), state, response)
    assert result.data == response
    assert after.cams["mc_keys"].lookup(int.from_bytes(b"k001", "little"), 0)[0]
    assert after.arrays["mc_values"] == state.arrays["mc_values"]
