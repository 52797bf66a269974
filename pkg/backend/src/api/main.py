import logging
import os

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..config import configure_logging
from ..errors import ConfigError, InputError, NumericError, TlgError
from .operations import router as operations_router

configure_logging()

logger = logging.getLogger(__name__)

VERSION = "0.1.0"

app = FastAPI(
    title="tlground API",
    description="Tracklet NMS, grounding score fusion and J&F evaluation",
    version=VERSION,
)


def get_cors_origins() -> list[str]:
    """Allowed origins; everything in development."""
    if os.getenv("ENVIRONMENT", "development") == "development":
        return ["*"]
    origins = os.getenv("TLG_CORS_ORIGINS", "")
    return [o.strip() for o in origins.split(",") if o.strip()]


app.add_middleware(
    CORSMiddleware,
    allow_origins=get_cors_origins(),
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["*"],
)

app.include_router(operations_router)


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "service": "tlground API", "version": VERSION}


def _status_for(exc: TlgError) -> int:
    if isinstance(exc, NumericError):
        return 422
    if isinstance(exc, (InputError, ConfigError)):
        return 400
    return 500


@app.exception_handler(TlgError)
async def tlg_exception_handler(request, exc: TlgError):
    status_code = _status_for(exc)
    logger.warning(f"{request.url.path} failed with {type(exc).__name__}: {exc}")
    return JSONResponse(
        status_code=status_code,
        content={
            "error": str(exc),
            "type": type(exc).__name__,
            "status_code": status_code,
        },
    )


@app.exception_handler(HTTPException)
async def http_exception_handler(request, exc):
    return JSONResponse(
        status_code=exc.status_code,
        content={"error": exc.detail, "status_code": exc.status_code},
    )


@app.exception_handler(Exception)
async def general_exception_handler(request, exc):
    logger.exception(f"Unhandled error on {request.url.path}")
    return JSONResponse(
        status_code=500,
        content={"error": "Internal server error", "status_code": 500},
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=int(os.getenv("PORT", "8000")))
