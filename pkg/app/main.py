"""
Main FastAPI application for the LTO verifier.
"""

import logging
from typing import Any, Dict

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.check_runner import CheckRunner, registry
from app.config import validate_config
from app.errors import ConfigError, LtoError
from app.utils.report_utils import report_frame, summary

logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="LTO Verifier",
    description="Finite-volume checks of local topological order axioms, boundary algebras and Haag duality",
    version=__version__,
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/")
async def root():
    """Root endpoint with API information."""
    return {
        "name": "LTO Verifier API",
        "version": __version__,
        "description": "Finite-volume checks of local topological order axioms",
        "usage": "GET /api/checks lists checks and suites; POST a RunConfig to /api/run",
    }


@app.get("/api/checks")
async def list_checks():
    return registry()


@app.post("/api/run")
async def run_checks(config: Dict[str, Any] = Body(...)):
    """
    Run the checks of a RunConfig and return the merged report.

    Parameters:
    - config: RunConfig document (models, categories, checks, regions, tolerances, ...)

    Returns:
    - ``{"pass", "count", "failed", "reports"}``; a failing check is a 200
      response with ``pass`` false, an invalid config is a 422 and any
      other failure a 500
    """
    try:
        run_config = validate_config(config)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())

    # Reports are written by the CLI only
    run_config = run_config.model_copy(update={"out": None})
    try:
        return await CheckRunner(run_config).run()
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())
    except LtoError as e:
        logger.error("Run failed: %s", e)
        raise HTTPException(status_code=500, detail=e.to_dict())
    except Exception as e:
        logger.exception("Run failed")
        raise HTTPException(status_code=500, detail=f"Error running checks: {str(e)}")


@app.post("/api/report")
async def summarize_report(report: Dict[str, Any] = Body(...)):
    """Tabulate a merged or single report: one row per check plus pass counts."""
    try:
        frame = report_frame(report)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())
    return {"summary": summary(frame), "rows": frame.to_dict(orient="records")}


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("app.main:app", host="0.0.0.0", port=8000, reload=True)
