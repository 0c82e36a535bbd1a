"""
FastAPI server exposing the run pipeline over HTTP.

Runs execute as background tasks inside this process; state is kept in memory.

To run the server:
    python -m uvicorn dualperm.api.server:app --app-dir src
"""

import os

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware

from dualperm import __version__
from dualperm.api.handlers.exceptions import validation_exception_handler
from dualperm.api.middleware.logging import log_requests_middleware
from dualperm.api.routes import runs
from dualperm.utils.logger import configure_logging

configure_logging()

# ------------- FastAPI Setup -------------

app = FastAPI(
    title="dualperm run service",
    description="Submit, poll and cancel permeability runs",
    version=__version__,
)

# Comma-separated list of allowed origins; everything is allowed when unset
ALLOWED_ORIGINS = [o.strip() for o in os.environ.get("DUALPERM_ALLOWED_ORIGINS", "").split(",") if o.strip()]

app.add_middleware(
    CORSMiddleware,
    allow_origins=ALLOWED_ORIGINS or ["*"],
    allow_credentials=bool(ALLOWED_ORIGINS),
    allow_methods=["*"],
    allow_headers=["*"],
)

app.middleware("http")(log_requests_middleware)

app.add_exception_handler(RequestValidationError, validation_exception_handler)

app.include_router(runs.router)

if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
