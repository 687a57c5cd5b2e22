import json
import random

import pytest
from scapy.layers.inet import IP, UDP
from scapy.layers.l2 import Ether
from scapy.packet import Raw

from rpipe.cli import ExitStatus, run_cli
from rpipe.compiler import parse_dimacs
from rpipe.ir import Opcode, Port, ProtocolProgram, ProtoKind, ProtoNode, RuntimeConfig, load_artifact, store_artifact
from rpipe.sim import write_trace
from tests.tiny import packet_edges, random_arch


@pytest.fixture
def files(tmp_path, tiny_program, tiny_arch):
    paths = {"program": tmp_path / "double.json", "arch": tmp_path / "arch.json"}
    paths["program"].write_bytes(store_artifact(tiny_program))
    paths["arch"].write_bytes(store_artifact(tiny_arch))
    return {k: str(v) for k, v in paths.items()}


def or_program() -> ProtocolProgram:
    return ProtocolProgram.build(
        packet_edges(Port("y"))
        + [
            ProtoNode("x", ProtoKind.SLICE, {"offset": 0, "width": 32}, (Port("pi", 0),)),
            ProtoNode("y", ProtoKind.BINARY, {"op": Opcode.OR}, (Port("x"), Port("x"))),
        ]
    )


def test_compile_writes_config_stats_and_dimacs(tmp_path, files):
    cfg, stats, cnf_dir = tmp_path / "cfg.json", tmp_path / "stats.json", tmp_path / "cnf"
    status = run_cli(
        ["compile", "-p", files["program"], "-a", files["arch"], "-o", str(cfg),
         "--degree-limits", "0", "--timeout", "30", "--stats", str(stats), "--dimacs", str(cnf_dir)]
    )
    assert status is ExitStatus.OK
    config = load_artifact(cfg.read_bytes(), "config")
    assert config.alu_op == {"alu": Opcode.ADD}
    doc = json.loads(stats.read_text())
    assert doc["outcome"] == "feasible"
    assert len(doc["tries"]) == 1
    num_vars, clauses = parse_dimacs((cnf_dir / "instance.cnf").read_text())
    assert num_vars > 0 and clauses
    assert "OUT(alu,y)" in json.loads((cnf_dir / "instance.names.json").read_text()).values()


def test_compile_with_fixed_decision_order(tmp_path, files):
    cfg = tmp_path / "cfg.json"
    status = run_cli(
        ["compile", "-p", files["program"], "-a", files["arch"], "-o", str(cfg), "--degree-limits", "0", "--heuristic", "ordered"]
    )
    assert status is ExitStatus.OK
    assert load_artifact(cfg.read_bytes(), "config").alu_op == {"alu": Opcode.ADD}


def test_compile_infeasible(tmp_path, files, capsys):
    program = tmp_path / "or.json"
    program.write_bytes(store_artifact(or_program()))
    status = run_cli(["compile", "-p", str(program), "-a", files["arch"], "-o", str(tmp_path / "cfg.json"), "--degree-limits", "0"])
    assert status is ExitStatus.INFEASIBLE
    assert "infeasible (unrestricted UNSAT)" in capsys.readouterr().err
    assert not (tmp_path / "cfg.json").exists()


def test_compile_enumerate(tmp_path):
    program = ProtocolProgram.build(
        packet_edges(Port("x")) + [ProtoNode("x", ProtoKind.SLICE, {"offset": 0, "width": 32}, (Port("pi", 0),))]
    )
    (tmp_path / "p.json").write_bytes(store_artifact(program))
    (tmp_path / "a.json").write_bytes(store_artifact(random_arch(random.Random(6))))
    status = run_cli(
        ["compile", "-p", str(tmp_path / "p.json"), "-a", str(tmp_path / "a.json"), "-o", str(tmp_path / "cfg.json"), "--enumerate", "3"]
    )
    assert status is ExitStatus.OK
    written = sorted(p.name for p in tmp_path.glob("cfg*.json"))
    assert written == ["cfg.1.json", "cfg.2.json", "cfg.json"]


def test_sim_and_check(tmp_path, files):
    trace = tmp_path / "trace.txt"
    trace.write_text(write_trace([b"\x01\x00\x00\x00", b"\x02\x00\x00\x00xyz"], header="two packets"))
    out = tmp_path / "out.txt"
    assert run_cli(["sim", "--proto", files["program"], "--trace", str(trace), "-o", str(out)]) is ExitStatus.OK
    assert out.read_text().split() == ["02000000", "0400000078797a"]

    good, bad = tmp_path / "good.json", tmp_path / "bad.json"
    good.write_bytes(store_artifact(RuntimeConfig({"ra": 0, "rb": 0}, {"alu": Opcode.ADD})))
    bad.write_bytes(store_artifact(RuntimeConfig({"ra": 0, "rb": 1}, {"alu": Opcode.ADD})))
    pipe_out = tmp_path / "pipe.txt"
    args = ["sim", "--arch", files["arch"], "-c", str(good), "--trace", str(trace), "-o", str(pipe_out)]
    assert run_cli(args) is ExitStatus.OK
    assert pipe_out.read_text() == out.read_text()

    check = ["check", "-p", files["program"], "-a", files["arch"], "--random", "50"]
    assert run_cli(check + ["-c", str(good)]) is ExitStatus.OK
    assert run_cli(check + ["-c", str(bad)]) is ExitStatus.INTERNAL


def test_sim_arch_needs_config(files):
    assert run_cli(["sim", "--arch", files["arch"], "--random", "3"]) is ExitStatus.INPUT_ERROR


def test_sim_dumps_learned_state(tmp_path):
    reply = Ether() / IP(src="10.0.0.2", dst="10.0.0.1") / UDP(sport=11211, dport=40000) / Raw(
        b"\x00\x07\x00\x00\x00\x01\x00\x00VALUE k001 0 4\r\n1234\r\nEND\r\n"
    )
    trace, dump, out = tmp_path / "replies.txt", tmp_path / "state.json", tmp_path / "out.txt"
    trace.write_text(write_trace([bytes(reply)]))
    status = run_cli(
        ["sim", "--proto", "builtin:memcached_tx", "--trace", str(trace), "-o", str(out), "--dump-state", str(dump)]
    )
    assert status is ExitStatus.OK
    assert out.read_text().strip() == bytes(reply).hex()
    doc = json.loads(dump.read_text())
    assert doc["kind"] == "state"
    assert [e["key"] for e in doc["tables"]["mc_keys"]] == [int.from_bytes(b"k001", "little")]
    assert list(doc["arrays"]["mc_values"].values()) == [int.from_bytes(b"1234", "little")]


def test_fixedgen_then_check(tmp_path, capsys):
    arch, cfg = tmp_path / "nat_fixed.json", tmp_path / "nat_cfg.json"
    status = run_cli(["fixedgen", "-p", "builtin:nat", "-o", str(arch), "-c", str(cfg), "--report", "--cam-impl", "nat_table=hash"])
    assert status is ExitStatus.OK
    assert "ALUs" in capsys.readouterr().out
    assert run_cli(["check", "-p", "builtin:nat", "-a", str(arch), "-c", str(cfg), "--random", "100"]) is ExitStatus.OK


def test_report_pdf_default_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr("rpipe.cli.RPIPE_REPORT_DIR", str(tmp_path / "reports"))
    args = ["fixedgen", "-p", "builtin:firewall", "-o", str(tmp_path / "fw.json")]
    assert run_cli(args + ["--report-pdf", "census.pdf"]) is ExitStatus.OK
    assert (tmp_path / "reports" / "census.pdf").read_bytes().startswith(b"%PDF")
    assert not (tmp_path / "census.pdf").exists()
    assert run_cli(args + ["--report-pdf", str(tmp_path / "out" / "census.pdf")]) is ExitStatus.OK
    assert (tmp_path / "out" / "census.pdf").exists()


def test_gen_arch_and_stats(tmp_path, capsys):
    arch = tmp_path / "flex.json"
    status = run_cli(["gen-arch", "flex", "--stages", "2", "--alus", "3", "--ops", "add,sub", "--prefix-len", "8", "-o", str(arch)])
    assert status is ExitStatus.OK
    capsys.readouterr()
    assert run_cli(["stats", str(arch), "builtin:nat"]) is ExitStatus.OK
    out = capsys.readouterr().out
    assert str(arch) in out and "builtin:nat" in out
    assert f"| {arch} | 6 |" in out


def test_gen_arch_sweep(tmp_path):
    out = tmp_path / "family"
    status = run_cli(
        ["gen-arch", "flex", "--ops", "add", "--prefix-len", "8", "--sweep-stages", "1,2", "--sweep-alus", "1,2", "-o", str(out)]
    )
    assert status is ExitStatus.OK
    assert sorted(p.name for p in out.iterdir()) == ["flex_1x1.json", "flex_1x2.json", "flex_2x1.json", "flex_2x2.json"]


def test_elaborate_outputs(tmp_path, files, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_bytes(store_artifact(RuntimeConfig({"ra": 1}, {"alu": Opcode.SUB})))
    netlist, cmap, bits = tmp_path / "n.json", tmp_path / "map.json", tmp_path / "bits.hex"
    status = run_cli(
        ["elaborate", "-a", files["arch"], "-o", str(netlist), "--config-map", str(cmap), "-c", str(cfg),
         "--bitstream", str(bits), "--cost"]
    )
    assert status is ExitStatus.OK
    assert json.loads(netlist.read_text())["kind"] == "netlist"
    assert json.loads(cmap.read_text())["total_bits"] == 3
    # entries sorted by owner: alu op, ra select, rb select
    assert bits.read_text().split() == ["00000001", "00000001", "00000000"]
    assert "Configuration bits: 3" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["compile", "-p", "missing.json", "-a", "missing.json", "-o", "x.json"],
        ["stats", "builtin:dns"],
        ["gen-arch", "flex", "--stages", "0", "-o", "x.json"],
        ["sim", "--proto", "builtin:nat", "--random", "1", "--trace", "t.txt"],
        ["frobnicate"],
    ],
)
def test_input_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run_cli(argv) is ExitStatus.INPUT_ERROR


def test_malformed_artifact(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text('{"kind": "protocol", "nodes": [')
    assert run_cli(["stats", str(broken)]) is ExitStatus.INPUT_ERROR


def test_help_is_ok():
    assert run_cli(["--help"]) is ExitStatus.OK


def test_oversized_trace_packet(tmp_path):
    trace = tmp_path / "jumbo.txt"
    trace.write_text(write_trace([b"\0" * 1600]))
    assert run_cli(["sim", "--proto", "builtin:nat", "--trace", str(trace)]) is ExitStatus.INPUT_ERROR


def test_undecodable_artifact(tmp_path):
    binary = tmp_path / "binary.json"
    binary.write_bytes(b"\xff\xfe{}")
    assert run_cli(["stats", str(binary)]) is ExitStatus.INPUT_ERROR


def test_cam_impl_for_unknown_table(tmp_path):
    status = run_cli(["fixedgen", "-p", "builtin:nat", "-o", str(tmp_path / "f.json"), "--cam-impl", "nope=hash"])
    assert status is ExitStatus.INPUT_ERROR
    assert not (tmp_path / "f.json").exists()


@pytest.mark.parametrize("cells", [{"999999": 1}, {"-1": 7}, {"0": 1 << 40}], ids=["past-end", "negative", "too-wide"])
def test_state_preload_out_of_range(tmp_path, cells):
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"kind": "state", "arrays": {"nat_port": cells}}))
    status = run_cli(["sim", "--proto", "builtin:nat", "--random", "2", "--state", str(state), "-o", str(tmp_path / "out.txt")])
    assert status is ExitStatus.INPUT_ERROR


@pytest.mark.slow
def test_gen_arch_3x100_census(tmp_path, capsys):
    arch = tmp_path / "flex_3x100.json"
    status = run_cli(["gen-arch", "flex", "--stages", "3", "--alus", "100", "--registers", "128", "-o", str(arch)])
    assert status is ExitStatus.OK
    capsys.readouterr()
    assert run_cli(["stats", str(arch)]) is ExitStatus.OK
    assert f"| {arch} | 300 |" in capsys.readouterr().out


def test_gen_arch_flag_options(tmp_path):
    arch = tmp_path / "flex.json"
    base = ["gen-arch", "flex", "--stages", "1", "--alus", "8", "--prefix-len", "8", "-o", str(arch)]
    # a quarter of 8 ALUs compare by default; flag registers are sized to match
    assert run_cli(base) is ExitStatus.OK
    assert run_cli(base + ["--compare-alus", "3", "--flag-registers", "3", "--flag-constants", "1"]) is ExitStatus.OK
    doc = json.loads(arch.read_text())
    flag_consts = [n for n in doc["nodes"] if n["kind"] == "Constant" and n["attrs"]["width"] == 1]
    assert len(flag_consts) == 1
    assert run_cli(base + ["--compare-alus", "3", "--flag-registers", "2"]) is ExitStatus.INPUT_ERROR
    assert run_cli(base + ["--ops", "add,frob"]) is ExitStatus.INPUT_ERROR
