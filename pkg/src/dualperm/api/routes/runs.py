"""
Run API Routes.

Routes for submitting runs, polling their state and cancelling them.
"""

import uuid
from typing import Optional

from fastapi import APIRouter, BackgroundTasks
from fastapi.responses import JSONResponse

from dualperm import __version__
from dualperm.api.handlers.run_worker import execute_run
from dualperm.api.utils.state_helpers import create_run_state, get_run_state, request_cancellation
from dualperm.config.run_schemas import RunConfig
from dualperm.utils.logger import get_logger, set_correlation_id

logger = get_logger(__name__)

router = APIRouter(prefix="/api", tags=["runs"])


@router.post("/runs")
async def start_run(
    config: RunConfig,
    background_tasks: BackgroundTasks,
    seed: Optional[int] = None,
    deterministic: bool = False,
) -> JSONResponse:
    """Start a run in the background and return its id.

    Args:
        config: RunConfig JSON body.
        seed: Optional query parameter; runs this seed instead of config.seeds.
        deterministic: Optional query parameter for deterministic mode.

    Returns:
        {"run_id": "uuid-string"}; poll /api/runs/{run_id} for progress.
    """
    run_id = str(uuid.uuid4())
    set_correlation_id(run_id=run_id, method=config.method)
    create_run_state(run_id)
    background_tasks.add_task(execute_run, run_id, config, seed, deterministic)
    logger.info(
        "Run submitted",
        extra={"extra_fields": {"run_id": run_id, "method": config.method, "seed": seed}},
    )
    return JSONResponse({"run_id": run_id})


@router.get("/runs/{run_id}")
async def get_run(run_id: str) -> JSONResponse:
    """Current state of a run: {status, progress, report, error}.

    Raises:
        HTTPException 404: Unknown run id.
    """
    state = get_run_state(run_id)
    return JSONResponse(
        {
            "status": state["status"],
            "progress": state.get("progress"),
            "report": state.get("report"),
            "error": state.get("error"),
        }
    )


@router.post("/runs/{run_id}/cancel")
async def cancel_run(run_id: str) -> JSONResponse:
    """Request cancellation; the run stops at its next cancellation check.

    Raises:
        HTTPException 404: Unknown run id.
    """
    state = request_cancellation(run_id)
    logger.info(
        "Cancellation requested",
        extra={"extra_fields": {"run_id": run_id, "status": state["status"]}},
    )
    return JSONResponse({"status": state["status"]})


@router.get("/health")
async def health() -> JSONResponse:
    return JSONResponse({"status": "ok", "version": __version__})
