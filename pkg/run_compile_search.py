import argparse
import asyncio
import json
import logging
import uuid
from pathlib import Path

from shared.config import (
    RPIPE_DEGREE_LIMITS,
    RPIPE_LOG_LEVEL,
    RPIPE_PER_TRY_TIMEOUT,
    RPIPE_TOTAL_TIMEOUT,
    RPIPE_WORKERS,
    TEMPORAL_TASK_QUEUE,
    get_temporal_client,
    parse_degree_limits,
)
from workflows import CompileSearchWorkflow

logger = logging.getLogger("rpipe.search")

parser = argparse.ArgumentParser(description="Run a compile search on the Temporal worker pool.")
parser.add_argument("-p", "--program", required=True, help="protocol program artifact")
parser.add_argument("-a", "--arch", required=True, help="pipeline architecture artifact")
parser.add_argument("-o", "--output", required=True, help="where to write the runtime configuration")
parser.add_argument("--degree-limits", default=RPIPE_DEGREE_LIMITS)
parser.add_argument("--seed", type=lambda s: int(s, 0), default=0)
parser.add_argument("--in-flight", type=int, default=max(RPIPE_WORKERS, 1), help="tries running at once")
parser.add_argument("--timeout", type=float, default=RPIPE_TOTAL_TIMEOUT)
parser.add_argument("--per-try-timeout", type=float, default=RPIPE_PER_TRY_TIMEOUT)


async def main(args: argparse.Namespace) -> int:
    """Start a CompileSearchWorkflow, wait for it and write the configuration when Feasible.
    Exit status follows the rpipe CLI: 0 feasible, 1 infeasible, 2 unknown."""
    logging.basicConfig(level=RPIPE_LOG_LEVEL.upper())
    client = await get_temporal_client()
    inputs = {
        "program": Path(args.program).read_text(),
        "arch": Path(args.arch).read_text(),
        "degree_limits": list(parse_degree_limits(args.degree_limits)),
        "seed": args.seed,
        "in_flight": args.in_flight,
        "per_try_timeout": args.per_try_timeout,
        "total_timeout": args.timeout,
    }
    handle = await client.start_workflow(
        CompileSearchWorkflow.run,
        inputs,
        id=f"compile-{Path(args.program).stem}-{uuid.uuid4()}",
        task_queue=TEMPORAL_TASK_QUEUE,
    )
    logger.info("Compile search started with ID: %s", handle.id)
    result: dict = await handle.result()

    logger.info("Outcome: %s (%s), %d tries", result["outcome"], result["stats"]["reason"], len(result["stats"]["tries"]))
    if result["outcome"] == "feasible":
        Path(args.output).write_text(json.dumps(result["config"], indent=2, sort_keys=True) + "\n")
        logger.info("wrote %s", args.output)
        return 0
    return 1 if result["outcome"] == "infeasible" else 2


if __name__ == "__main__":
    raise SystemExit(asyncio.run(main(parser.parse_args())))
