"""
Reconstruction endpoints
"""

from fastapi import APIRouter, HTTPException, status
import logging

from app.core.config import settings
from app.schemas import ReconstructRequest, ReconstructResponse
from app.services import ExperimentService
from app.routes.datasets import resolve_under

router = APIRouter(prefix="/api/reconstruct", tags=["reconstruction"])
logger = logging.getLogger(__name__)


@router.post("", response_model=ReconstructResponse)
async def reconstruct(request: ReconstructRequest):
    """Reconstruct one frame of a dataset with a trained checkpoint"""
    dataset_dir = resolve_under(settings.data_dir, request.dataset)
    checkpoint = resolve_under(settings.runs_dir, request.checkpoint)
    if not (dataset_dir / "manifest.json").exists():
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Dataset not found")
    if not checkpoint.exists():
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Checkpoint not found")

    _, response = ExperimentService.reconstruct_frame(
        checkpoint, dataset_dir, request.sequence, request.frame, request.vs
    )
    logger.info(f"Reconstructed {request.dataset} s{request.sequence} t{request.frame} "
                f"vs{request.vs} in {response.latency_ms:.1f} ms")
    return response
