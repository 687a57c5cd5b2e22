"""Command-line interface: ``python -m rpipe <command> ...``.

Every command is batch-only and deterministic given its seeds. Diagnostics go
to standard error; artifacts go to the files named on the command line (or
standard output for tables).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from enum import IntEnum
from pathlib import Path
from typing import Callable, Sequence

from rpipe.census import census, estimate_program
from rpipe.compiler import (
    Heuristic,
    Outcome,
    SearchParams,
    compile,
    dimacs_sidecar,
    encode,
    enumerate_configs,
    export_dimacs,
)
from rpipe.errors import (
    EncodeError,
    InconsistentAssignmentError,
    ParameterError,
    RpipeError,
    SolverTimeout,
)
from rpipe.fixedgen import generate_fixed
from rpipe.frontend import (
    FlexParams,
    alu_split,
    builtin_program,
    gen_flex_arch,
    load_flex_params,
    normalize_program,
    sweep_flex,
)
from rpipe.hwgen import config_bitstream, config_map, elaborate, estimate_cost, format_bitstream
from rpipe.ir import (
    CamImpl,
    Opcode,
    PipeKind,
    PipelineArch,
    ProtocolProgram,
    RuntimeConfig,
    check_config,
    load_artifact,
    store_artifact,
    validate_pipeline,
    validate_protocol,
)
from rpipe.ir.serialize import dump_json, parse_document
from rpipe.report import census_markdown, compile_markdown, cost_markdown, estimate_markdown, save_pdf
from rpipe.sim import (
    PipelineExecutor,
    ProtocolExecutor,
    StateStore,
    check_equivalence,
    dump_state,
    load_state,
    random_trace,
    read_trace,
)
from rpipe.sim.packet import Packet
from shared.config import (
    RPIPE_DEGREE_LIMITS,
    RPIPE_LOG_LEVEL,
    RPIPE_PER_TRY_TIMEOUT,
    RPIPE_REPORT_DIR,
    RPIPE_TOTAL_TIMEOUT,
    RPIPE_WORKERS,
    parse_degree_limits,
)

logger = logging.getLogger("rpipe.cli")

BUILTIN_PREFIX = "builtin:"


class ExitStatus(IntEnum):
    OK = 0
    INFEASIBLE = 1
    UNKNOWN = 2
    INPUT_ERROR = 3
    INTERNAL = 4


def _warn(report, what: str) -> None:
    for d in report.diagnostics:
        if d.severity != "error":
            logger.warning("%s: [%s] %s: %s", what, d.node, d.code, d.message)
    report.raise_for_errors(what)


def load_program(ref: str) -> ProtocolProgram:
    """A protocol artifact path or ``builtin:<name>``."""
    if ref.startswith(BUILTIN_PREFIX):
        program = builtin_program(ref[len(BUILTIN_PREFIX) :])
    else:
        program = load_artifact(Path(ref).read_bytes(), "protocol")
    _warn(validate_protocol(program), ref)
    return program


def load_arch(path: str) -> PipelineArch:
    arch = load_artifact(Path(path).read_bytes(), "pipeline")
    _warn(validate_pipeline(arch), path)
    return arch


def load_config(path: str) -> RuntimeConfig:
    return load_artifact(Path(path).read_bytes(), "config")


def _report_path(path: str) -> Path:
    """Bare file names land in RPIPE_REPORT_DIR."""
    target = Path(path)
    return Path(RPIPE_REPORT_DIR) / target if target.parent == Path(".") else target


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(data)
    logger.info("wrote %s", target)


def _int_list(text: str) -> list[int]:
    try:
        return [int(p, 0) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _cam_impl(text: str) -> tuple[str, CamImpl]:
    table, _, impl = text.partition("=")
    choices = {"hash": CamImpl.HASH, "register": CamImpl.REGISTER}
    if not table or impl.lower() not in choices:
        raise argparse.ArgumentTypeError(f"expected TABLE=hash|register, got {text!r}")
    return table, choices[impl.lower()]


def _packets(args: argparse.Namespace) -> list[bytes]:
    if args.trace:
        return read_trace(Path(args.trace).read_bytes())
    return random_trace(args.pkt_seed, args.random)


# --- compile ---------------------------------------------------------------


def cmd_compile(args: argparse.Namespace) -> ExitStatus:
    program = load_program(args.program)
    arch = load_arch(args.arch)
    params = SearchParams(
        degree_limits=tuple(args.degree_limits),
        seed=args.seed,
        workers=args.workers,
        per_try_timeout=args.per_try_timeout,
        total_timeout=args.timeout,
        heuristic=Heuristic(args.heuristic),
    )
    if args.dimacs:
        normalized = normalize_program(program, arch.only(PipeKind.PACKET_IN).attrs["prefix_len"])
        try:
            cnf = encode(normalized, arch)
        except EncodeError as exc:
            logger.warning("no DIMACS instance written: %s", exc)
        else:
            _write(str(Path(args.dimacs) / "instance.cnf"), export_dimacs(cnf))
            _write(str(Path(args.dimacs) / "instance.names.json"), dimacs_sidecar(cnf))

    if args.enumerate:
        configs = enumerate_configs(program, arch, args.enumerate, args.per_try_timeout, params.heuristic)
        if not configs:
            print("infeasible (unrestricted UNSAT)", file=sys.stderr)
            return ExitStatus.INFEASIBLE
        out = Path(args.output)
        for i, config in enumerate(configs):
            target = out if i == 0 else out.with_name(f"{out.stem}.{i}{out.suffix}")
            _write(str(target), store_artifact(config))
        return ExitStatus.OK

    result = compile(program, arch, params)
    if args.stats:
        _write(args.stats, dump_json({"outcome": str(result.outcome), **result.stats.to_document()}))
    if args.report_pdf:
        save_pdf(compile_markdown(args.program, args.arch, result), _report_path(args.report_pdf), "Compile Report")
    if result.outcome is Outcome.FEASIBLE:
        _write(args.output, store_artifact(result.config))
        return ExitStatus.OK
    if result.outcome is Outcome.INFEASIBLE:
        detail = "unrestricted UNSAT" if result.stats.reason.startswith("unrestricted") else result.stats.reason
        print(f"infeasible ({detail})", file=sys.stderr)
        return ExitStatus.INFEASIBLE
    print(f"unknown ({result.stats.reason})", file=sys.stderr)
    return ExitStatus.UNKNOWN


# --- fixedgen --------------------------------------------------------------


def cmd_fixedgen(args: argparse.Namespace) -> ExitStatus:
    program = load_program(args.program)
    result = generate_fixed(program, dict(args.cam_impl or []))
    _write(args.output, store_artifact(result.arch))
    if args.config:
        _write(args.config, store_artifact(result.config))
    if args.report or args.report_pdf:
        table = census_markdown([(args.program, census(program)), (args.output, census(result.arch))])
        if args.report:
            sys.stdout.write(table)
        if args.report_pdf:
            save_pdf("# Fixed Pipeline\n" + table, _report_path(args.report_pdf), "Fixed Pipeline Census")
    return ExitStatus.OK


# --- sim / check -----------------------------------------------------------


def cmd_sim(args: argparse.Namespace) -> ExitStatus:
    if args.proto:
        program = load_program(args.proto)
        executor: ProtocolExecutor | PipelineExecutor = ProtocolExecutor(program)
        state = StateStore.for_program(program, hash_seed=args.hash_seed)
    else:
        if not args.config:
            raise argparse.ArgumentTypeError("--arch needs -c/--config")
        arch = load_arch(args.arch)
        executor = PipelineExecutor(arch, load_config(args.config))
        state = StateStore.for_arch(arch, args.hash_seed)
    if args.state:
        state = load_state(Path(args.state).read_bytes(), state)
    lines = []
    for data in _packets(args):
        result, state = executor.run(state, Packet(data))
        lines.append("drop" if result.dropped else result.data.hex())
    _write(args.output, ("\n".join(lines) + "\n").encode() if lines else b"")
    if args.dump_state:
        _write(args.dump_state, dump_state(state))
    return ExitStatus.OK


def cmd_check(args: argparse.Namespace) -> ExitStatus:
    program = load_program(args.program)
    arch = load_arch(args.arch)
    config = load_config(args.config)
    check_config(config, arch, program)
    program = normalize_program(program, arch.only(PipeKind.PACKET_IN).attrs["prefix_len"])
    initial = None
    if args.state:
        initial = load_state(Path(args.state).read_bytes(), StateStore.for_program(program, hash_seed=args.hash_seed))
    trace = read_trace(Path(args.trace).read_bytes()) if args.trace else (args.pkt_seed, args.random)
    report = check_equivalence(program, arch, config, trace, initial, args.hash_seed)
    for mismatch in report.mismatches:
        print(mismatch.describe(), file=sys.stderr)
    for diff in report.state_mismatches:
        print(diff, file=sys.stderr)
    if not report.equivalent:
        print(f"NOT equivalent on {report.packets_run} packets", file=sys.stderr)
        return ExitStatus.INTERNAL
    print(f"equivalent on {report.packets_run} packets", file=sys.stderr)
    return ExitStatus.OK


# --- gen-arch ----------------------------------------------------------------


def _flex_params(args: argparse.Namespace) -> FlexParams:
    if args.params:
        base = load_flex_params(Path(args.params).read_bytes())
    else:
        base = FlexParams(stages=args.stages or 1, alus_per_stage=args.alus or 1)
    overrides = {
        "stages": args.stages,
        "alus_per_stage": args.alus,
        "alu_width": args.alu_width,
        "alu_latency": args.alu_latency,
        "registers_per_stage": args.registers,
        "flag_registers": args.flag_registers,
        "runtime_constants": args.constants,
        "flag_constants": args.flag_constants,
        "compare_alus": args.compare_alus,
        "prefix_len": args.prefix_len,
    }
    values = base.to_document()
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.ops:
        try:
            values["ops"] = [Opcode(o.strip().upper()) for o in args.ops.split(",") if o.strip()]
        except ValueError as exc:
            raise ParameterError(f"--ops: {exc}") from None
    params = FlexParams.from_document(values)
    if args.flag_registers is None and not args.params:
        # one flag register per comparison ALU at least
        _, n_cmp = alu_split(params)
        params = replace(params, flag_registers=max(params.flag_registers, n_cmp))
    return params


def cmd_gen_arch(args: argparse.Namespace) -> ExitStatus:
    params = _flex_params(args)
    if not (args.sweep_stages or args.sweep_alus):
        _write(args.output, store_artifact(gen_flex_arch(params)))
        return ExitStatus.OK
    family = sweep_flex(params, args.sweep_stages or [params.stages], args.sweep_alus or [params.alus_per_stage])
    out = Path(args.output)
    rows = []
    for p, arch in family:
        name = f"flex_{p.stages}x{p.alus_per_stage}.json"
        _write(str(out / name), store_artifact(arch))
        rows.append((name, census(arch)))
    sys.stdout.write(census_markdown(rows))
    return ExitStatus.OK


# --- stats / elaborate --------------------------------------------------------


def _load_any(ref: str) -> ProtocolProgram | PipelineArch:
    if ref.startswith(BUILTIN_PREFIX):
        return load_program(ref)
    data = Path(ref).read_bytes()
    if parse_document(data).get("kind") == "pipeline":
        return load_arch(ref)
    return load_program(ref)


def cmd_stats(args: argparse.Namespace) -> ExitStatus:
    artifacts = [(ref, _load_any(ref)) for ref in args.artifacts]
    text = census_markdown([(ref, census(a)) for ref, a in artifacts])
    for ref, artifact in artifacts:
        if isinstance(artifact, ProtocolProgram):
            text += "\n" + estimate_markdown(ref, estimate_program(artifact))
    sys.stdout.write(text)
    if args.report_pdf:
        save_pdf("# Census\n" + text, _report_path(args.report_pdf), "Census")
    return ExitStatus.OK


def cmd_elaborate(args: argparse.Namespace) -> ExitStatus:
    arch = load_arch(args.arch)
    netlist = elaborate(arch)
    _write(args.output, dump_json(netlist.to_document()))
    if args.config_map:
        _write(args.config_map, dump_json(config_map(netlist).to_document()))
    if args.bitstream:
        if not args.config:
            raise argparse.ArgumentTypeError("--bitstream needs -c/--config")
        _write(args.bitstream, format_bitstream(config_bitstream(netlist, load_config(args.config))).encode())
    if args.cost or args.report_pdf:
        text = cost_markdown(args.arch, estimate_cost(arch))
        if args.cost:
            sys.stdout.write(text)
        if args.report_pdf:
            save_pdf(text, _report_path(args.report_pdf), "Cost Estimate")
    return ExitStatus.OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpipe", description="Compile protocol programs onto packet-processing pipelines.")
    parser.add_argument("--log-level", default=RPIPE_LOG_LEVEL, help="logging level (default from RPIPE_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="find a runtime configuration of an architecture for a program")
    p.add_argument("-p", "--program", required=True, help="protocol artifact or builtin:<name>")
    p.add_argument("-a", "--arch", required=True)
    p.add_argument("-o", "--output", required=True, help="runtime configuration to write")
    p.add_argument("--degree-limits", type=_int_list, default=list(parse_degree_limits(RPIPE_DEGREE_LIMITS)))
    p.add_argument("--seed", type=lambda s: int(s, 0), default=0)
    p.add_argument("--workers", type=int, default=RPIPE_WORKERS)
    p.add_argument("--timeout", type=float, default=RPIPE_TOTAL_TIMEOUT, help="total search budget in seconds")
    p.add_argument("--per-try-timeout", type=float, default=RPIPE_PER_TRY_TIMEOUT)
    p.add_argument("--heuristic", choices=[h.value for h in Heuristic], default=Heuristic.VSIDS.value, help="solver decision order")
    p.add_argument("--dimacs", metavar="DIR", help="also write the unrestricted instance as DIMACS")
    p.add_argument("--enumerate", type=int, metavar="K", help="write up to K distinct configurations")
    p.add_argument("--stats", metavar="FILE", help="write search statistics as JSON")
    p.add_argument("--report-pdf", metavar="PATH", help="PDF report; a bare file name goes to RPIPE_REPORT_DIR")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("fixedgen", help="generate a fixed pipeline for a program")
    p.add_argument("-p", "--program", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-c", "--config", help="also write the (trivial) runtime configuration")
    p.add_argument("--cam-impl", type=_cam_impl, action="append", metavar="TABLE=hash|register")
    p.add_argument("--report", action="store_true", help="print the node census table")
    p.add_argument("--report-pdf", metavar="PATH", help="PDF report; a bare file name goes to RPIPE_REPORT_DIR")
    p.set_defaults(func=cmd_fixedgen)

    p = sub.add_parser("sim", help="run packets through a program or a configured pipeline")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--proto")
    target.add_argument("--arch")
    p.add_argument("-c", "--config")
    _packet_source(p)
    p.add_argument("--state", help="state preload document")
    p.add_argument("--dump-state", metavar="FILE")
    p.add_argument("-o", "--output", help="results, one line per packet (default stdout)")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("check", help="compare a configured pipeline against its program")
    p.add_argument("-p", "--program", required=True)
    p.add_argument("-a", "--arch", required=True)
    p.add_argument("-c", "--config", required=True)
    _packet_source(p)
    p.add_argument("--state", help="state preload document (program ids)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen-arch", help="generate a parameterized architecture")
    p.add_argument("family", choices=["flex"])
    p.add_argument("--stages", type=int)
    p.add_argument("--alus", type=int)
    p.add_argument("--ops", help="comma-separated opcodes")
    p.add_argument("--alu-width", type=int)
    p.add_argument("--alu-latency", type=int)
    p.add_argument("--registers", type=int)
    p.add_argument("--flag-registers", type=int, help="width-1 registers per stage (default: enough for the comparison ALUs)")
    p.add_argument("--constants", type=int)
    p.add_argument("--flag-constants", type=int)
    p.add_argument("--compare-alus", type=int, help="comparison ALUs per stage (default: a quarter)")
    p.add_argument("--prefix-len", type=int)
    p.add_argument("--params", help="flex parameters JSON file")
    p.add_argument("--sweep-stages", type=_int_list)
    p.add_argument("--sweep-alus", type=_int_list)
    p.add_argument("-o", "--output", required=True, help="architecture file (directory when sweeping)")
    p.set_defaults(func=cmd_gen_arch)

    p = sub.add_parser("stats", help="print node census tables")
    p.add_argument("artifacts", nargs="+")
    p.add_argument("--report-pdf", metavar="PATH", help="PDF report; a bare file name goes to RPIPE_REPORT_DIR")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("elaborate", help="elaborate an architecture into a netlist")
    p.add_argument("-a", "--arch", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--config-map", metavar="FILE")
    p.add_argument("-c", "--config")
    p.add_argument("--bitstream", metavar="FILE")
    p.add_argument("--cost", action="store_true")
    p.add_argument("--report-pdf", metavar="PATH", help="PDF report; a bare file name goes to RPIPE_REPORT_DIR")
    p.set_defaults(func=cmd_elaborate)
    return parser


def _packet_source(p: argparse.ArgumentParser) -> None:
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--trace", help="hex packet trace file")
    source.add_argument("--random", type=int, metavar="N", help="N seeded random packets")
    p.add_argument("--pkt-seed", type=int, default=0)
    p.add_argument("--hash-seed", type=int, default=0)


def run_cli(argv: Sequence[str] | None = None) -> ExitStatus:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ExitStatus.OK if exc.code == 0 else ExitStatus.INPUT_ERROR
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handler: Callable[[argparse.Namespace], ExitStatus] = args.func
    try:
        return handler(args)
    except InconsistentAssignmentError as exc:
        logger.error("internal inconsistency: %s", exc)
        return ExitStatus.INTERNAL
    except SolverTimeout as exc:
        logger.error("%s", exc)
        return ExitStatus.UNKNOWN
    except EncodeError as exc:
        print(f"infeasible ({exc})", file=sys.stderr)
        return ExitStatus.INFEASIBLE
    except (RpipeError, OSError, argparse.ArgumentTypeError) as exc:
        logger.error("%s", exc)
        return ExitStatus.INPUT_ERROR
    except Exception:
        logger.exception("unexpected failure")
        return ExitStatus.INTERNAL


def main() -> None:
    sys.exit(int(run_cli()))
