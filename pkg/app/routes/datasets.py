"""
Dataset endpoints
"""

from fastapi import APIRouter, HTTPException, status
from pathlib import Path
import logging

from app.core.config import settings
from app.schemas import DatasetManifest
from app.services import DatasetService

router = APIRouter(prefix="/api/datasets", tags=["datasets"])
logger = logging.getLogger(__name__)


def resolve_under(root: str, name: str) -> Path:
    """Child path of a configured directory; rejects names that escape it"""
    base = Path(root).resolve()
    path = (base / name).resolve()
    if base != path and base not in path.parents:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="Invalid path")
    return path


@router.get("/{name}", response_model=DatasetManifest)
async def get_dataset(name: str):
    """Manifest of a dataset under the data directory"""
    directory = resolve_under(settings.data_dir, name)
    if not (directory / "manifest.json").exists():
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Dataset not found")
    return DatasetService.load_manifest(directory)
