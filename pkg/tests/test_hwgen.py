import pytest

from rpipe.census import census
from rpipe.compiler import SearchParams, compile
from rpipe.errors import ConfigError
from rpipe.frontend import FlexParams, MemoryBlock, gen_flex_arch
from rpipe.hwgen import (
    CONFIG_BUS,
    config_bitstream,
    config_map,
    decode_bitstream,
    elaborate,
    estimate_cost,
    format_bitstream,
)
from rpipe.ir import CamImpl, Opcode, RuntimeConfig
from rpipe.ir.timing import compute_arrivals
from tests.tiny import two_router_arch


def test_elaborate_is_structural(add_only_params):
    arch = gen_flex_arch(add_only_params)
    netlist = elaborate(arch)
    modules = [i.module for i in netlist.instances]
    assert modules.count("Alu") == 1
    assert modules.count("Router") == census(arch).columns["Routers"]
    assert len(netlist.wires) == census(arch).columns["Edges"]
    assert len(netlist.instances) == len(arch.nodes) + 1
    assert netlist.instance(CONFIG_BUS).params["words"] == len(config_map(netlist).entries)


@pytest.mark.slow
def test_elaborate_3x100():
    arch = gen_flex_arch(FlexParams(stages=3, alus_per_stage=100, registers_per_stage=128, flag_registers=32))
    assert [i.module for i in elaborate(arch).instances].count("Alu") == 300


def test_netlist_document(tiny_arch):
    doc = elaborate(tiny_arch).to_document()
    assert doc["kind"] == "netlist"
    assert {"owner": "ra", "field": "select", "width": 1} in doc["config_regs"]
    assert {"owner": "alu", "field": "op", "width": 1} in doc["config_regs"]


def test_bitstream_round_trip(tiny_program, tiny_arch):
    config = compile(tiny_program, tiny_arch, SearchParams(degree_limits=(0,), total_timeout=30.0)).config
    netlist = elaborate(tiny_arch)
    words = config_bitstream(netlist, config)
    assert len(words) == len(config_map(netlist).entries)
    full = config.materialized(tiny_arch)
    assert decode_bitstream(netlist, words) == RuntimeConfig(full.router_select, full.alu_op, full.const_value)


def test_runtime_constant_in_bitstream():
    arch = two_router_arch(const_value=None)
    netlist = elaborate(arch)
    config = RuntimeConfig({"ra": 1}, {"alu": Opcode.SUB}, {"k": 0xDEADBEEF})
    words = config_bitstream(netlist, config)
    assert 0xDEADBEEF in words
    assert decode_bitstream(netlist, words).const_value == {"k": 0xDEADBEEF}
    assert format_bitstream(words).splitlines() == [f"{w:08x}" for w in words]


def test_bitstream_errors(tiny_arch):
    netlist = elaborate(tiny_arch)
    with pytest.raises(ConfigError):
        config_bitstream(netlist, RuntimeConfig(router_select={"hlen": 0}))
    with pytest.raises(ConfigError):
        decode_bitstream(netlist, [0])
    words = config_bitstream(netlist, RuntimeConfig())
    with pytest.raises(ConfigError):
        decode_bitstream(netlist, [2] + words[1:])


def test_mul_costs_area():
    base = FlexParams(stages=3, alus_per_stage=4)
    plain, mul = estimate_cost(gen_flex_arch(base)), estimate_cost(gen_flex_arch(base.with_ops(Opcode.MUL)))
    assert mul.area > plain.area
    assert mul.area_by_kind["Alu"] > plain.area_by_kind["Alu"]
    assert mul.depth == plain.depth


def test_alu_latency_adds_two_cycles_per_stage():
    base = FlexParams(stages=3, alus_per_stage=4)
    fast = gen_flex_arch(base)
    slow = gen_flex_arch(FlexParams(stages=3, alus_per_stage=4, alu_latency=3))
    assert estimate_cost(slow).depth - estimate_cost(fast).depth == 2 * 3
    assert compute_arrivals(slow).depth(slow) == estimate_cost(slow).depth


def test_hash_cam_is_cheaper_storage():
    def with_cam(impl):
        block = MemoryBlock("cam0", "cam", 1, width=32, entries=256, impl=impl)
        return estimate_cost(gen_flex_arch(FlexParams(stages=2, alus_per_stage=2, memories=(block,))))

    assert with_cam(CamImpl.HASH).area_by_kind["CamStorage"] < with_cam(CamImpl.REGISTER).area_by_kind["CamStorage"]


def test_config_bits_match_map(flex_5x8):
    assert estimate_cost(flex_5x8).config_bits == config_map(elaborate(flex_5x8)).total_bits
