import asyncio
import threading

from temporalio import activity
from temporalio.exceptions import ApplicationError

from rpipe.compiler import Heuristic, run_try
from rpipe.errors import InconsistentAssignmentError, RpipeError
from rpipe.frontend import normalize_program
from rpipe.ir import PipeKind, load_artifact

HEARTBEAT_SECONDS = 5.0


'''Activities for the distributed compile search.
One activity is one try: restrict the architecture's router fan-in under a
degree limit and seed, encode and solve. Artifacts travel as their JSON text
so workers need no shared filesystem.'''
@activity.defn
async def compile_try(input: dict) -> dict:
    """Run one encode-and-solve try and return its TryResult document.

    Input keys: program, arch (artifact JSON text), degree_limit, seed, index,
    timeout (seconds or None), heuristic (optional).
    The activity heartbeats while the solver runs; cancellation stops the
    solver at its next check."""
    try:
        program = load_artifact(input["program"], "protocol")
        arch = load_artifact(input["arch"], "pipeline")
        program = normalize_program(program, arch.only(PipeKind.PACKET_IN).attrs["prefix_len"])
        heuristic = Heuristic(input.get("heuristic", Heuristic.VSIDS))
    except (RpipeError, KeyError, ValueError) as e:
        exception_message = f"Bad compile_try input: {e}"
        activity.logger.error(exception_message)
        raise ApplicationError(exception_message, non_retryable=True) from e

    activity.logger.info(
        f"Try {input['index']}: degree limit {input['degree_limit']}, seed {input['seed']:#018x}"
    )
    cancel = threading.Event()
    task = asyncio.create_task(
        asyncio.to_thread(
            run_try,
            program,
            arch,
            input["degree_limit"],
            input["seed"],
            input["index"],
            input.get("timeout"),
            heuristic,
            True,
            cancel,
        )
    )
    try:
        while True:
            done, _ = await asyncio.wait({task}, timeout=HEARTBEAT_SECONDS)
            if done:
                break
            activity.heartbeat(f"try {input['index']} solving")
        result = task.result()
    except asyncio.CancelledError:
        cancel.set()
        activity.logger.info(f"Try {input['index']} cancelled")
        raise
    except InconsistentAssignmentError as e:
        # solver or encoder bug: retrying will not help
        activity.logger.error(f"Try {input['index']} inconsistent: {e}")
        raise ApplicationError(str(e), type="InconsistentAssignment", non_retryable=True) from e
    except RpipeError as e:
        activity.logger.error(f"Try {input['index']} failed: {e}")
        raise ApplicationError(str(e), non_retryable=True) from e

    activity.logger.info(
        f"Try {result.index} -> {result.status} ({result.var_count} vars, {result.clause_count} clauses, {result.seconds:.2f}s)"
    )
    return result.to_document()
