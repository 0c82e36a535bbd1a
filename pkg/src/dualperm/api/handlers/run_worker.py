"""
Background Run Worker.

Executes one submitted run: the pipeline writes progress into the run state,
polls the state's cancellation flag, and the final status is one of
"complete", "error" or "cancelled". Runs are serialized by a
module lock; torch threading is process-wide.
"""

import threading
from typing import Optional

from dualperm.api.utils.state_helpers import is_cancelled, update_run_state
from dualperm.config.run_schemas import RunConfig
from dualperm.main import run_pipeline
from dualperm.utils.exceptions import CancellationError
from dualperm.utils.logger import clear_correlation_ids, get_logger, log_performance

logger = get_logger(__name__)

_run_lock = threading.Lock()


def execute_run(
    run_id: str,
    config: RunConfig,
    seed: Optional[int] = None,
    deterministic: bool = False,
) -> None:
    """Run the pipeline for a submitted config and record the outcome.

    Args:
        run_id: Id returned to the client.
        config: Validated run config.
        seed: Single seed to run instead of config.seeds.
        deterministic: Passed through to run_pipeline.
    """

    def progress_callback(phase: str, message: str) -> None:
        update_run_state(run_id, progress={"phase": phase, "message": message})

    def cancellation_check() -> bool:
        return is_cancelled(run_id)

    try:
        update_run_state(run_id, progress={"phase": "queued", "message": "Waiting for the previous run..."})
        with _run_lock, log_performance("run_execution", run_id=run_id, method=config.method):
            result = run_pipeline(
                config,
                seeds=[seed] if seed is not None else None,
                deterministic=deterministic,
                run_id=run_id,
                progress_callback=progress_callback,
                cancellation_check=cancellation_check,
            )
        report = [row.model_dump(mode="json") for row in result["rows"]]
        update_run_state(
            run_id,
            status="complete",
            report=report,
            run_dirs=[str(d) for d in result["run_dirs"]],
        )
        logger.info(
            "Run completed",
            extra={"extra_fields": {"run_id": run_id, "status": "complete", "rows": len(report)}},
        )

    except CancellationError:
        logger.info(
            "Run cancelled",
            extra={"extra_fields": {"run_id": run_id, "status": "cancelled"}},
        )
        update_run_state(run_id, status="cancelled")

    except Exception as e:
        logger.error(
            "Run failed",
            extra={
                "extra_fields": {
                    "run_id": run_id,
                    "status": "error",
                    "error": str(e),
                    "error_type": type(e).__name__,
                }
            },
            exc_info=True,
        )
        update_run_state(run_id, status="error", error=str(e))

    finally:
        clear_correlation_ids()
