import os

import pytest

from rpipe.frontend import FlexParams, builtin_program, gen_flex_arch
from rpipe.ir import Opcode
from tests.tiny import doubling_program, two_router_arch


def pytest_collection_modifyitems(config, items):
    if os.getenv("RPIPE_TEMPORAL_TESTS") == "1":
        return
    skip = pytest.mark.skip(reason="set RPIPE_TEMPORAL_TESTS=1 to run against a Temporal test server")
    for item in items:
        if "temporal" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def nat():
    return builtin_program("nat")


@pytest.fixture(scope="session")
def firewall():
    return builtin_program("firewall")


@pytest.fixture(scope="session")
def memcached_rx():
    return builtin_program("memcached_rx")


@pytest.fixture(scope="session")
def memcached_tx():
    return builtin_program("memcached_tx")


@pytest.fixture
def tiny_program():
    return doubling_program()


@pytest.fixture
def tiny_arch():
    return two_router_arch()


@pytest.fixture(scope="session")
def small_flex_params():
    """Two stages of two ALUs over an 8-byte prefix, no memories."""
    return FlexParams(
        stages=2,
        alus_per_stage=2,
        registers_per_stage=6,
        flag_registers=2,
        runtime_constants=1,
        flag_constants=1,
        memories=(),
        prefix_len=8,
    )


@pytest.fixture(scope="session")
def small_flex(small_flex_params):
    return gen_flex_arch(small_flex_params)


@pytest.fixture(scope="session")
def flex_5x8():
    return gen_flex_arch(FlexParams(stages=5, alus_per_stage=8))


@pytest.fixture(scope="session")
def add_only_params():
    return FlexParams(stages=1, alus_per_stage=1, ops=(Opcode.ADD,), memories=())
