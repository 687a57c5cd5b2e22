import asyncio
import logging

from temporalio.worker import Worker

import activities
from shared.config import RPIPE_LOG_LEVEL, RPIPE_WORKERS, TEMPORAL_TASK_QUEUE, get_temporal_client
from workflows import CompileSearchWorkflow

logger = logging.getLogger("rpipe.worker")


async def main() -> None:
    logging.basicConfig(level=RPIPE_LOG_LEVEL.upper())
    await run_worker()


async def run_worker() -> None:
    # Get a client and register the search workflow and its try activity
    client = await get_temporal_client()
    concurrent_tries = max(RPIPE_WORKERS, 1)
    worker = Worker(
        client,
        task_queue=TEMPORAL_TASK_QUEUE,
        workflows=[CompileSearchWorkflow],
        activities=[activities.compile_try],
        max_concurrent_activities=concurrent_tries,
    )
    logger.info("Starting worker on %s (%d concurrent tries)", TEMPORAL_TASK_QUEUE, concurrent_tries)
    await worker.run()


if __name__ == "__main__":
    asyncio.run(main())
