"""
Run State Store.

In-process store for run state, shared between the request handlers and the
background workers. All access goes through the module functions, which hold
a lock.
"""

import threading
from datetime import datetime
from typing import Any, Dict, Optional

from fastapi import HTTPException, status

# {run_id: {status, progress, report, error, created_at}}
run_states: Dict[str, Dict[str, Any]] = {}
_lock = threading.Lock()

TERMINAL_STATUSES = ("complete", "error", "cancelled")


def create_run_state(run_id: str) -> Dict[str, Any]:
    state = {
        "status": "running",
        "progress": None,
        "report": None,
        "error": None,
        "created_at": datetime.now().isoformat(),
    }
    with _lock:
        run_states[run_id] = state
        return dict(state)


def update_run_state(run_id: str, **fields: Any) -> Optional[Dict[str, Any]]:
    """Merge fields into a run's state; returns the new state or None if unknown."""
    with _lock:
        state = run_states.get(run_id)
        if state is None:
            return None
        state.update(fields)
        return dict(state)


def get_run_state(run_id: str) -> Dict[str, Any]:
    """Copy of a run's state.

    Raises:
        HTTPException 404: If the run is unknown.
    """
    with _lock:
        state = run_states.get(run_id)
        if state is None:
            raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Run not found")
        return dict(state)


def request_cancellation(run_id: str) -> Dict[str, Any]:
    """Flag a running run for cancellation; finished runs keep their status.

    Raises:
        HTTPException 404: If the run is unknown.
    """
    with _lock:
        state = run_states.get(run_id)
        if state is None:
            raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Run not found")
        if state["status"] not in TERMINAL_STATUSES:
            state["status"] = "cancelling"
        return dict(state)


def is_cancelled(run_id: str) -> bool:
    with _lock:
        state = run_states.get(run_id)
        return state is not None and state["status"] == "cancelling"
