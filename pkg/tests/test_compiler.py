import json
import random
from itertools import islice

import pytest

from rpipe.compiler import (
    CdclSolver,
    Heuristic,
    MatchContext,
    Outcome,
    SearchParams,
    SolveStatus,
    TryResult,
    compile,
    dimacs_sidecar,
    encode,
    enumerate_configs,
    export_dimacs,
    parse_dimacs,
    restrict,
    run_try,
    solve,
    static_check,
    try_schedule,
    try_seed,
    try_verdict,
)
from rpipe.compiler.solver import luby
from rpipe.errors import ArtifactSyntaxError, ParameterError
from rpipe.frontend import ProgramBuilder, gen_flex_arch
from rpipe.frontend.builder import ones_sum
from rpipe.ir import Opcode, PipeKind, Port, ProtocolProgram, ProtoKind, ProtoNode
from rpipe.sim import StateStore, check_equivalence, load_state
from tests.tiny import brute_force_feasible, packet_edges, random_arch, random_program, two_router_arch

EXHAUSTIVE = SearchParams(degree_limits=(0,), total_timeout=60.0)


def pigeonhole(holes: int) -> tuple[int, list[list[int]]]:
    """holes + 1 pigeons into ``holes`` holes; var p*holes + h + 1."""
    pigeons = holes + 1

    def var(p, h):
        return p * holes + h + 1

    clauses = [[var(p, h) for h in range(holes)] for p in range(pigeons)]
    for h in range(holes):
        for p in range(pigeons):
            for q in range(p + 1, pigeons):
                clauses.append([-var(p, h), -var(q, h)])
    return pigeons * holes, clauses


def identity_program() -> ProtocolProgram:
    return ProtocolProgram.build(
        packet_edges(Port("x")) + [ProtoNode("x", ProtoKind.SLICE, {"offset": 0, "width": 32}, (Port("pi", 0),))]
    )


def or_program() -> ProtocolProgram:
    return ProtocolProgram.build(
        packet_edges(Port("y"))
        + [
            ProtoNode("x", ProtoKind.SLICE, {"offset": 0, "width": 32}, (Port("pi", 0),)),
            ProtoNode("y", ProtoKind.BINARY, {"op": Opcode.OR}, (Port("x"), Port("x"))),
        ]
    )


# --- solver ----------------------------------------------------------------------


def test_luby_prefix():
    assert [luby(i) for i in range(1, 16)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


@pytest.mark.parametrize("heuristic", list(Heuristic))
def test_solver_sat_model_satisfies(heuristic):
    clauses = [[1, 2], [-1, 3], [-2, -3], [2, 3]]
    result = solve(3, clauses, heuristic=heuristic)
    assert result.status is SolveStatus.SAT
    assert all(result.assignment.satisfies(c) for c in clauses)


@pytest.mark.parametrize("heuristic", list(Heuristic))
def test_solver_pigeonhole_unsat(heuristic):
    n, clauses = pigeonhole(4)
    assert solve(n, clauses, heuristic=heuristic).status is SolveStatus.UNSAT


def test_solver_empty_and_trivial():
    assert solve(2, []).status is SolveStatus.SAT
    assert solve(1, [[1], [-1]]).status is SolveStatus.UNSAT


def test_solver_is_incremental():
    solver = CdclSolver(2, [[1, 2]])
    seen = set()
    while (result := solver.solve()).status is SolveStatus.SAT:
        model = tuple(result.assignment.true_vars())
        assert model not in seen
        seen.add(model)
        solver.add_clause([-v if result.assignment[v] else v for v in (1, 2)])
    assert seen == {(1,), (2,), (1, 2)}


def test_solver_stop_request():
    n, clauses = pigeonhole(9)
    result = CdclSolver(n, clauses).solve(should_stop=lambda: True)
    assert result.status is SolveStatus.TIMEOUT


def test_solver_rejects_unknown_variables():
    with pytest.raises(ValueError):
        CdclSolver(2, [[3]])


def test_solver_random_3sat_agrees_with_brute_force():
    rng = random.Random(4)
    for _ in range(40):
        n = 8
        clauses = [[rng.choice([-1, 1]) * rng.randint(1, n) for _ in range(3)] for _ in range(36)]
        truth = any(
            all(any((bits >> (abs(x) - 1) & 1) == (x > 0) for x in c) for c in clauses) for bits in range(1 << n)
        )
        assert (solve(n, clauses).status is SolveStatus.SAT) == truth


# --- encoding --------------------------------------------------------------------


def test_clause_census(tiny_program, tiny_arch):
    cnf = encode(tiny_program, tiny_arch, depth_pruning=False)
    assert dict(cnf.families) == {
        "equals-input": 1,
        "at-least-one": 2,
        "at-most-one": 3,
        "output-equals-input": 12,
        "operands-match": 6,
        "alu-op": 1,
        "anchor": 1,
    }
    # 13 OUT, 4 PICK and 2 ALUOP literals
    assert cnf.var_count == 19


def test_rule_out_materialized(tiny_program, tiny_arch):
    cnf = encode(tiny_program, tiny_arch, materialize_rule_out=True, depth_pruning=False)
    # 10 hardware values x 6 program values, minus the 13 compatible pairs
    assert cnf.families["rule-out"] == 10 * 6 - 13
    assert solve(cnf.var_count, cnf.clauses).status is SolveStatus.SAT


def test_depth_pruning_drops_router_candidates(tiny_program, tiny_arch):
    cnf = encode(tiny_program, tiny_arch)
    assert cnf.families["output-equals-input"] == 2 * 2 * 2


def _width_program() -> ProtocolProgram:
    return ProtocolProgram.build(
        packet_edges(Port("y"))
        + [
            ProtoNode("x", ProtoKind.SLICE, {"offset": 0, "width": 32}, (Port("pi", 0),)),
            ProtoNode("h", ProtoKind.SLICE, {"offset": 0, "width": 16}, (Port("pi", 0),)),
            ProtoNode("y", ProtoKind.BINARY, {"op": Opcode.ADD}, (Port("x"), Port("x"))),
            ProtoNode("z", ProtoKind.BINARY, {"op": Opcode.ADD}, (Port("h"), Port("h"))),
            ProtoNode("xo", ProtoKind.BINARY, {"op": Opcode.XOR}, (Port("x"), Port("x"))),
            ProtoNode("c5", ProtoKind.CONSTANT, {"value": 5, "width": 32}),
            ProtoNode("c7", ProtoKind.CONSTANT, {"value": 7, "width": 32}),
            ProtoNode("c5_8", ProtoKind.CONSTANT, {"value": 5, "width": 8}),
        ]
    )


@pytest.mark.parametrize(
    "h, l, runtime, expected",
    [
        ("hlen", "z", True, True),
        ("hlen", "y", True, False),
        ("alu", "y", True, True),
        ("alu", "xo", True, False),
        ("k", "c5", True, True),
        ("k", "c5_8", True, False),
        ("k", "c7", False, True),
        ("k", "c5", False, False),
        ("hout", "out", True, True),
    ],
)
def test_static_check(h, l, runtime, expected):
    program = _width_program()
    arch = two_router_arch(const_value=None if runtime else 7)
    context = MatchContext.build(program, arch, depth_pruning=False)
    hn, ln = arch.nodes[h], program.nodes[l]
    assert static_check(hn, ln, context) is expected
    assert context.static_check(hn, ln) is expected


def test_encode_requires_enables(small_flex):
    b = ProgramBuilder("store", 4)
    b.array("a", 32, 4)
    b.write("a", b.word(0), b.word(0))
    with pytest.raises(ValueError):
        encode(b.emit(), small_flex)


def test_dimacs_export_parses_back(tiny_program, tiny_arch):
    cnf = encode(tiny_program, tiny_arch)
    num_vars, clauses = parse_dimacs(export_dimacs(cnf).decode())
    assert (num_vars, clauses) == (cnf.var_count, cnf.clauses)
    names = json.loads(dimacs_sidecar(cnf))
    assert len(names) == cnf.var_count
    assert "OUT(alu,y)" in names.values()


@pytest.mark.parametrize("text", ["1 2 0\n", "p cnf 2 2\n1 2 0\n", "p cnf 1 1\n2 0\n", "p cnf 2 1\n1 x 0\n"])
def test_dimacs_parse_errors(text):
    with pytest.raises(ArtifactSyntaxError):
        parse_dimacs(text)


def test_dimacs_comments_and_split_clauses():
    assert parse_dimacs("c hello\np cnf 3 2\n1 -2\n0 3 0\n") == (3, [[1, -2], [3]])


# --- degree-limited views --------------------------------------------------------


def test_restrict_keeps_degree_limit(flex_5x8):
    view = restrict(flex_5x8, 3, seed=9)
    dropped = 0
    for router in flex_5x8.of_kind(PipeKind.ROUTER):
        kept = view.router_inputs(router.id)
        assert len(kept) == min(3, len(router.inputs))
        assert all(router.inputs[i] == src for i, src in kept)
        dropped += len(router.inputs) - len(kept)
    assert view.dropped_edges == dropped > 0
    assert restrict(flex_5x8, 3, seed=9) == view
    assert restrict(flex_5x8, 0, seed=9).dropped_edges == 0


def test_try_schedule_round_robin():
    params = SearchParams(degree_limits=(2, 4, 0), seed=5, max_tries=5)
    schedule = list(try_schedule(params))
    assert [(i, d) for i, d, _ in schedule] == [(0, 2), (1, 4), (2, 0), (3, 2), (4, 4)]
    assert [s for _, _, s in schedule] == [try_seed(5, i) for i in range(5)]
    unbounded = SearchParams(degree_limits=(2,), total_timeout=1.0)
    assert len(list(islice(try_schedule(unbounded), 50))) == 50


@pytest.mark.parametrize(
    "kwargs",
    [
        {"degree_limits": ()},
        {"degree_limits": (-1,)},
        {"workers": 0},
        {"seed": -1},
        {"total_timeout": None, "max_tries": None},
    ],
)
def test_search_params_validation(kwargs):
    with pytest.raises(ParameterError):
        SearchParams(**kwargs)


def test_verdicts():
    def result(status, conclusive):
        return TryResult(0, 0 if conclusive else 2, 0, status, conclusive, 0.0)

    assert try_verdict(result("sat", False)) is Outcome.FEASIBLE
    assert try_verdict(result("unsat", True)) is Outcome.INFEASIBLE
    assert try_verdict(result("structural", True)) is Outcome.INFEASIBLE
    assert try_verdict(result("unsat", False)) is None
    assert try_verdict(result("structural", False)) is None
    assert try_verdict(result("timeout", True)) is None


def test_try_result_document_round_trip(tiny_program, tiny_arch):
    result = run_try(tiny_program, tiny_arch, 0, 1)
    assert TryResult.from_document(result.to_document()) == result


# --- compile ---------------------------------------------------------------------


def test_tiny_compile(tiny_program, tiny_arch):
    result = compile(tiny_program, tiny_arch, EXHAUSTIVE)
    assert result.outcome is Outcome.FEASIBLE
    assert result.config.router_select == {"ra": 0, "rb": 0}
    assert result.config.alu_op == {"alu": Opcode.ADD}
    assert check_equivalence(tiny_program, tiny_arch, result.config, (1, 100)).equivalent


def test_unsupported_op_is_infeasible(tiny_arch):
    result = compile(or_program(), tiny_arch, EXHAUSTIVE)
    assert result.outcome is Outcome.INFEASIBLE
    assert result.config is None


def test_restricted_unsat_is_not_a_proof(tiny_arch):
    params = SearchParams(degree_limits=(1,), max_tries=4, total_timeout=None)
    result = compile(or_program(), tiny_arch, params)
    assert result.outcome is Outcome.UNKNOWN
    assert len(result.stats.tries) == 4
    assert not any(t.conclusive for t in result.stats.tries)


def test_restricted_try_outcome(tiny_program, tiny_arch):
    result = run_try(tiny_program, tiny_arch, 1, seed=3)
    assert not result.conclusive
    assert try_verdict(result) in (Outcome.FEASIBLE, None)


def test_mul_needs_mul_alus(small_flex_params):
    b = ProgramBuilder("mul", small_flex_params.prefix_len)
    product = b.op(Opcode.MUL, b.word(0), b.word(1))
    program = b.emit({0: product, 1: product})

    plain = compile(program, gen_flex_arch(small_flex_params), EXHAUSTIVE)
    assert plain.outcome is Outcome.INFEASIBLE

    arch = gen_flex_arch(small_flex_params.with_ops(Opcode.MUL))
    result = compile(program, arch, EXHAUSTIVE)
    assert result.outcome is Outcome.FEASIBLE
    assert check_equivalence(program, arch, result.config, (2, 200)).equivalent


def test_enumerated_configs_are_all_equivalent():
    program = identity_program()
    arch = random_arch(random.Random(6))
    configs = enumerate_configs(program, arch, limit=6, timeout=30.0)
    assert len(configs) == 6
    assert len({json.dumps(c.router_select, sort_keys=True) + str(c.alu_op) for c in configs}) == 6
    for config in configs:
        assert config.router_select["ro"] == 1
        assert check_equivalence(program, arch, config, (3, 50)).equivalent


def test_enumerate_infeasible_is_empty(tiny_arch):
    assert enumerate_configs(or_program(), tiny_arch, limit=3) == []


def _oracle_case(seed: int) -> None:
    rng = random.Random(seed)
    program, arch = random_program(rng), random_arch(rng)
    result = compile(program, arch, EXHAUSTIVE)
    assert result.outcome is not Outcome.UNKNOWN
    assert (result.outcome is Outcome.FEASIBLE) == brute_force_feasible(program, arch), seed
    if result.config is not None:
        assert check_equivalence(program, arch, result.config, (seed, 30)).equivalent, seed


@pytest.mark.parametrize("seed", range(20))
def test_compile_matches_exhaustive_search(seed):
    _oracle_case(seed)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20, 220))
def test_compile_matches_exhaustive_search_wide(seed):
    _oracle_case(seed)


@pytest.mark.slow
def test_parallel_search(tiny_program, tiny_arch):
    params = SearchParams(degree_limits=(1, 0), workers=2, total_timeout=60.0)
    result = compile(tiny_program, tiny_arch, params)
    assert result.outcome is Outcome.FEASIBLE
    assert check_equivalence(tiny_program, tiny_arch, result.config, (0, 50)).equivalent


def nat_preload(nat):
    correction = ones_sum([0x611E, ~0x5000 & 0xFFFF])
    doc = {
        "kind": "state",
        "arrays": {"nat_port": {"0": 0x5000}, "nat_csum": {"0": correction * 0x10001}},
        "tables": {"nat_table": [{"index": 0, "key": 0x611E}]},
    }
    return load_state(json.dumps(doc), StateStore.for_program(nat))


@pytest.mark.slow
def test_nat_on_flex_5x8(nat, flex_5x8):
    result = compile(nat, flex_5x8, SearchParams(total_timeout=120.0, check_monotone=True))
    assert result.outcome is Outcome.FEASIBLE
    assert set(result.config.mem_bind) == {"nat_table", "nat_port", "nat_csum"}
    report = check_equivalence(nat, flex_5x8, result.config, (0, 1000), initial_state=nat_preload(nat))
    assert report.equivalent, [m.describe() for m in report.mismatches[:3]]
