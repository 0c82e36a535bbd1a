"""
Request Logging Middleware.

One structured record per request, written once the response is ready.
Failed requests are logged with the exception before it propagates.
"""

import time
from typing import Any, Awaitable, Callable

from fastapi import Request, Response

from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


async def log_requests_middleware(
    request: Request, call_next: Callable[[Request], Awaitable[Response]]
) -> Response:
    """Log method, path, status and duration of every request."""
    started = time.perf_counter()
    fields: dict[str, Any] = {
        "http_method": request.method,
        "http_path": request.url.path,
        "client_ip": request.client.host if request.client else None,
    }

    try:
        response = await call_next(request)
    except Exception:
        fields["duration_ms"] = round((time.perf_counter() - started) * 1000, 2)
        logger.error("HTTP request failed", extra={"extra_fields": fields}, exc_info=True)
        raise

    fields["http_status_code"] = response.status_code
    fields["duration_ms"] = round((time.perf_counter() - started) * 1000, 2)
    level = logger.warning if response.status_code >= 400 else logger.info
    level("HTTP request", extra={"extra_fields": fields})
    return response
