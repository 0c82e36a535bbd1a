"""
Exception Handlers for the run service.
"""

from typing import Any, Dict, List

from fastapi import Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

VALIDATION_MESSAGE = "Validation error: please check the run configuration"


def field_errors(exc: RequestValidationError) -> List[Dict[str, Any]]:
    """One entry per failed field, e.g. {"field": "body -> hybrid -> k_max", ...}."""
    return [
        {
            "field": " -> ".join(map(str, error["loc"])),
            "message": error["msg"],
            "type": error["type"],
        }
        for error in exc.errors()
    ]


async def validation_exception_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
    """Return 422 with {"detail": [field errors], "message": summary}."""
    errors = field_errors(exc)
    logger.warning(
        "Run config rejected",
        extra={"extra_fields": {"http_path": request.url.path, "validation_errors": errors}},
    )
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_CONTENT,
        content={"detail": errors, "message": VALIDATION_MESSAGE},
    )
