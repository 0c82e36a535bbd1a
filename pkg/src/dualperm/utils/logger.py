"""
Structured Logging Utility.

JSON logging for solver runs, training loops and the run service. Each record
is one JSON object per line, so a run log can be filtered with `jq` or read
next to `trace.ndjson`.

Features:
- Correlation IDs (run_id, config_hash, method) on every record of a run
- duration_ms from the log_performance context manager
- Structured context through extra={"extra_fields": {...}}
- LOG_LEVEL from the environment (a .env file is honoured)

Usage:
    from dualperm.utils.logger import get_logger, log_performance

    logger = get_logger(__name__)
    logger.info("Solve finished", extra={"extra_fields": {"cycles": 2}})

    with log_performance("stokes_solve", grid_n=512):
        state = solve_stokes_micro(...)
"""

import json
import logging
import os
import time
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Dict, Iterator, Optional

from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = getattr(logging, os.environ.get("LOG_LEVEL", "INFO").upper(), logging.INFO)

CORRELATION_KEYS = ("run_id", "config_hash", "method")

# Correlation ids of the run in progress; each thread or task sees its own copy
_log_context: ContextVar[Dict[str, Any]] = ContextVar("dualperm_log_context", default={})

# Anything on a record beyond these was passed through `extra`
_STANDARD_ATTRS = frozenset(logging.makeLogRecord({}).__dict__) | {
    "message",
    "asctime",
    "extra_fields",
    "duration_ms",
}


class JSONFormatter(logging.Formatter):
    """Render a record as one JSON object.

    Base fields come first, then correlation ids, then `extra_fields` and any
    other attributes set through `extra`.
    """

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            **_log_context.get(),
        }

        fields = getattr(record, "extra_fields", None)
        if isinstance(fields, dict):
            payload.update(fields)
        payload.update(
            {key: value for key, value in vars(record).items() if key not in _STANDARD_ATTRS}
        )

        duration = getattr(record, "duration_ms", None)
        if duration is not None:
            payload["duration_ms"] = duration

        if record.exc_info and record.exc_info[0] is not None:
            payload["exception_type"] = record.exc_info[0].__name__
            payload["exception"] = self.formatException(record.exc_info)

        return json.dumps(payload, default=str)


def configure_logging(level: Optional[int] = None) -> None:
    """Send every record to stderr as JSON, replacing existing root handlers."""
    level = level or LOG_LEVEL
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(JSONFormatter())

    root = logging.getLogger()
    root.setLevel(level)
    root.handlers = [handler]


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def set_correlation_id(
    run_id: Optional[str] = None,
    config_hash: Optional[str] = None,
    method: Optional[str] = None,
) -> None:
    """Attach correlation ids to every following record; None leaves a key as is."""
    values = dict(zip(CORRELATION_KEYS, (run_id, config_hash, method)))
    _log_context.set({**_log_context.get(), **{key: value for key, value in values.items() if value}})


def correlation_ids() -> Dict[str, Any]:
    return dict(_log_context.get())


def clear_correlation_ids() -> None:
    _log_context.set({})


@contextmanager
def log_performance(operation: str, **fields: Any) -> Iterator[None]:
    """Log the start and the outcome of a block with its duration.

    Args:
        operation: Name used in the messages ("Starting <operation>", ...).
        **fields: Extra fields added to all three records.

    Example:
        with log_performance("brinkman_solve", grid_n=128):
            state = solve_stokes_brinkman(...)
    """
    logger = get_logger(__name__)
    context = {"operation": operation, **fields}
    logger.info(f"Starting {operation}", extra={"extra_fields": context})
    started = time.perf_counter()

    def elapsed_ms() -> float:
        return round((time.perf_counter() - started) * 1000, 2)

    try:
        yield
    except Exception as e:
        logger.error(
            f"Failed {operation}",
            extra={
                "extra_fields": {**context, "status": "error", "error": str(e)},
                "duration_ms": elapsed_ms(),
            },
            exc_info=True,
        )
        raise

    logger.info(
        f"Completed {operation}",
        extra={"extra_fields": {**context, "status": "success"}, "duration_ms": elapsed_ms()},
    )
