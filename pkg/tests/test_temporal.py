import json
import uuid

import pytest
from temporalio.client import WorkflowFailureError
from temporalio.exceptions import ApplicationError
from temporalio.testing import ActivityEnvironment, WorkflowEnvironment
from temporalio.worker import Worker

from activities import compile_try
from rpipe.compiler import Outcome, TryResult, try_verdict
from rpipe.ir import Opcode, load_artifact, store_artifact
from workflows import CompileSearchWorkflow

TASK_QUEUE = "rpipe-test-queue"


@pytest.fixture
def artifacts(tiny_program, tiny_arch):
    return store_artifact(tiny_program).decode(), store_artifact(tiny_arch).decode()


def try_input(artifacts: tuple[str, str], overrides: dict | None = None) -> dict:
    program, arch = artifacts
    doc = {"program": program, "arch": arch, "degree_limit": 0, "seed": 5, "index": 0, "timeout": 30.0}
    return doc | (overrides or {})


async def test_compile_try_activity(artifacts):
    doc = await ActivityEnvironment().run(compile_try, try_input(artifacts))
    result = TryResult.from_document(doc)
    assert try_verdict(result) is Outcome.FEASIBLE
    assert result.conclusive
    assert result.config.router_select == {"ra": 0, "rb": 0}
    assert result.config.alu_op == {"alu": Opcode.ADD}


@pytest.mark.parametrize(
    "overrides",
    [{"program": "{not json"}, {"arch": '{"kind": "protocol", "nodes": []}'}, {"heuristic": "coin-flip"}],
    ids=["syntax", "wrong-kind", "heuristic"],
)
async def test_compile_try_rejects_bad_input(artifacts, overrides):
    with pytest.raises(ApplicationError) as info:
        await ActivityEnvironment().run(compile_try, try_input(artifacts, overrides))
    assert info.value.non_retryable


@pytest.mark.temporal
async def test_search_workflow_feasible(artifacts):
    program, arch = artifacts
    async with await WorkflowEnvironment.start_time_skipping() as env:
        async with Worker(env.client, task_queue=TASK_QUEUE, workflows=[CompileSearchWorkflow], activities=[compile_try]):
            result = await env.client.execute_workflow(
                CompileSearchWorkflow.run,
                {"program": program, "arch": arch, "degree_limits": [1, 0], "in_flight": 2, "total_timeout": 120.0},
                id=f"compile-test-{uuid.uuid4()}",
                task_queue=TASK_QUEUE,
            )
    assert result["outcome"] == "feasible"
    config = load_artifact(json.dumps(result["config"]), "config")
    assert config.alu_op == {"alu": Opcode.ADD}


@pytest.mark.temporal
async def test_search_workflow_rejects_bad_params(artifacts):
    program, arch = artifacts
    async with await WorkflowEnvironment.start_time_skipping() as env:
        async with Worker(env.client, task_queue=TASK_QUEUE, workflows=[CompileSearchWorkflow], activities=[compile_try]):
            with pytest.raises(WorkflowFailureError):
                await env.client.execute_workflow(
                    CompileSearchWorkflow.run,
                    {"program": program, "arch": arch, "degree_limits": [-1]},
                    id=f"compile-test-{uuid.uuid4()}",
                    task_queue=TASK_QUEUE,
                )
