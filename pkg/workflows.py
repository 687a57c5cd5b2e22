import asyncio
from datetime import timedelta

from temporalio import workflow
from temporalio.common import RetryPolicy
from temporalio.exceptions import ActivityError, ApplicationError

with workflow.unsafe.imports_passed_through():
    from activities import compile_try
    from rpipe.compiler import Outcome, SearchParams, TryResult, try_schedule, try_verdict
    from rpipe.errors import ParameterError

DEFAULT_IN_FLIGHT = 4
# slack on top of the solver's own timeout before Temporal gives up on a try
TRY_TIMEOUT_SLACK = timedelta(seconds=30)

'''CompileSearchWorkflow:
Runs the degree-limit search of a compile as Temporal activities.
Each activity is one try (restricted view, encode, solve). Several tries are in
flight at once; the first Feasible try wins and the rest are cancelled.
Infeasible is only concluded from a try that dropped no router input.
The workflow clock bounds the whole search; when it runs out the outcome is Unknown.'''
@workflow.defn
class CompileSearchWorkflow:
    def __init__(self) -> None:
        self.status: str = "INITIALIZING"
        self.tries: list[dict] = []
        self.outcome: str | None = None

    @workflow.run
    async def run(self, inputs: dict) -> dict:
        try:
            params = SearchParams(
                degree_limits=tuple(inputs.get("degree_limits", (2, 4, 8, 0))),
                seed=inputs.get("seed", 0),
                workers=inputs.get("in_flight", DEFAULT_IN_FLIGHT),
                per_try_timeout=inputs.get("per_try_timeout", 60.0),
                total_timeout=inputs.get("total_timeout", 300.0),
                max_tries=inputs.get("max_tries"),
            )
        except ParameterError as e:
            raise ApplicationError(f"Bad search parameters: {e}", non_retryable=True) from e
        workflow.logger.info(f"Starting compile search: limits {list(params.degree_limits)}, seed {params.seed}")

        started = workflow.now()
        deadline = started + timedelta(seconds=params.total_timeout) if params.total_timeout is not None else None
        schedule = try_schedule(params)
        pending: dict[asyncio.Task, int] = {}
        winner: TryResult | None = None
        self.set_workflow_status("SEARCHING")

        def submit() -> bool:
            nxt = next(schedule, None)
            if nxt is None:
                return False
            index, limit, seed = nxt
            try_input = {
                "program": inputs["program"],
                "arch": inputs["arch"],
                "degree_limit": limit,
                "seed": seed,
                "index": index,
                "timeout": params.per_try_timeout,
            }
            close_timeout = (
                timedelta(seconds=params.per_try_timeout) + TRY_TIMEOUT_SLACK
                if params.per_try_timeout is not None
                else timedelta(hours=12)
            )
            handle = workflow.start_activity(
                compile_try,
                try_input,
                start_to_close_timeout=close_timeout,
                heartbeat_timeout=timedelta(seconds=30),
                retry_policy=RetryPolicy(
                    initial_interval=timedelta(seconds=1),
                    maximum_interval=timedelta(seconds=30),
                    maximum_attempts=3,
                ),
            )
            pending[handle] = index
            return True

        for _ in range(params.workers):
            if not submit():
                break

        while pending and winner is None:
            timeout = None
            if deadline is not None:
                timeout = (deadline - workflow.now()).total_seconds()
                if timeout <= 0:
                    break
            done, _ = await asyncio.wait(pending, timeout=timeout, return_when=asyncio.FIRST_COMPLETED)
            for handle in sorted(done, key=pending.__getitem__):
                index = pending.pop(handle)
                try:
                    result = TryResult.from_document(handle.result())
                except ActivityError as e:
                    workflow.logger.error(f"Try {index} failed: {e.cause or e}")
                    raise ApplicationError(f"try {index} failed: {e.cause or e}", non_retryable=True) from e
                self.tries.append(result.to_document())
                workflow.logger.info(f"Try {result.index}: degree limit {result.degree_limit} -> {result.status}")
                if winner is None and try_verdict(result) is not None:
                    winner = result
            if winner is None:
                while len(pending) < params.workers and submit():
                    pass

        for handle in pending:
            handle.cancel()

        seconds = (workflow.now() - started).total_seconds()
        if winner is None:
            self.outcome = str(Outcome.UNKNOWN)
            reason = "search budget exhausted"
        elif try_verdict(winner) is Outcome.FEASIBLE:
            self.outcome = str(Outcome.FEASIBLE)
            reason = f"try {winner.index} satisfiable"
        else:
            self.outcome = str(Outcome.INFEASIBLE)
            reason = winner.reason or "unrestricted instance unsatisfiable"
        self.set_workflow_status("COMPLETED")
        workflow.logger.info(f"Compile search finished: {self.outcome} ({reason}) after {len(self.tries)} tries")
        return {
            "outcome": self.outcome,
            "config": winner.to_document()["config"] if winner is not None else None,
            "stats": {
                "seconds": round(seconds, 6),
                "reason": reason,
                "tries": [{k: v for k, v in t.items() if k != "config"} for t in self.tries],
            },
        }

    def set_workflow_status(self, status: str) -> None:
        """Set the current status of the workflow and its markdown details."""
        self.status = status
        details = f"## Compile Search \n\n- **Phase:** {status}\n- **Tries finished:** {len(self.tries)}\n"
        if self.outcome is not None:
            details += f"- **Outcome:** {self.outcome}\n"
        details += f"- **Last Status Set:** {workflow.now().isoformat()}\n"
        workflow.set_current_details(details)
        workflow.logger.debug(f"Workflow status set to: {status}")

    @workflow.query
    async def GetSearchStatus(self) -> str:
        return self.status

    @workflow.query
    async def GetTries(self) -> list:
        return [{k: v for k, v in t.items() if k != "config"} for t in self.tries]
