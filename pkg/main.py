"""
FastAPI application for TWIST-Recon
"""

import logging
from contextlib import asynccontextmanager
from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.core.config import settings
from app.core.database import init_db
from app.core.errors import (
    ContractError,
    DatasetError,
    ParameterError,
    ReconstructionError,
)
from app.routes import datasets_router, reconstruction_router, metrics_router

# Configure logging
logging.basicConfig(level=settings.log_level)
logger = logging.getLogger(__name__)


# Lifespan context manager for startup/shutdown
@asynccontextmanager
async def lifespan(app: FastAPI):
    """Handle startup and shutdown events"""
    logger.info(f"Starting {settings.app_name} API...")
    init_db()
    logger.info("Database initialized")
    yield
    logger.info(f"Shutting down {settings.app_name} API...")


# Create FastAPI application
app = FastAPI(
    title=settings.app_name,
    version=settings.app_version,
    description="TWIST MR angiography reconstruction API",
    lifespan=lifespan,
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)


# Root endpoint
@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "message": f"Welcome to {settings.app_name} API",
        "version": settings.app_version,
        "docs": "/docs",
    }


# Health check endpoint
@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {"status": "healthy", "app": settings.app_name, "device": settings.device}


# Include routers
app.include_router(datasets_router)
app.include_router(reconstruction_router)
app.include_router(metrics_router)


def error_status(exc: ReconstructionError) -> int:
    if isinstance(exc, DatasetError):
        return status.HTTP_404_NOT_FOUND
    if isinstance(exc, (ParameterError, ContractError)):
        return status.HTTP_400_BAD_REQUEST
    return status.HTTP_422_UNPROCESSABLE_ENTITY


@app.exception_handler(ReconstructionError)
async def reconstruction_exception_handler(request: Request, exc: ReconstructionError):
    """Service errors become 4xx responses"""
    logger.warning(f"{type(exc).__name__} on {request.url.path}: {exc}")
    return JSONResponse(
        status_code=error_status(exc),
        content={"detail": str(exc), "error": type(exc).__name__}
    )


@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    """Global exception handler"""
    logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={"detail": "Internal server error"}
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        app,
        host=settings.app_host,
        port=settings.app_port,
    )
