"""
Metric record endpoints
"""

from typing import Optional

from fastapi import APIRouter, Depends, HTTPException, status, Query
from sqlalchemy.orm import Session
import logging

from app.core.database import get_db
from app.models.models import ExperimentRun, MetricRecord
from app.schemas import ExperimentRunResponse

router = APIRouter(prefix="/api/metrics", tags=["metrics"])
logger = logging.getLogger(__name__)


@router.get("/{run_name}", response_model=ExperimentRunResponse)
async def get_run_metrics(
    run_name: str,
    method: Optional[str] = Query(None),
    vs: Optional[int] = Query(None, ge=0),
    db: Session = Depends(get_db)
):
    """Stored metric records of an evaluated run, optionally filtered"""
    run = db.query(ExperimentRun).filter(ExperimentRun.name == run_name).first()
    if not run:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Run not found")

    query = db.query(MetricRecord).filter(MetricRecord.run_id == run.id)
    if method is not None:
        query = query.filter(MetricRecord.method == method)
    if vs is not None:
        query = query.filter(MetricRecord.vs == vs)
    records = query.order_by(MetricRecord.id).all()

    return ExperimentRunResponse(
        id=run.id,
        name=run.name,
        reference_policy=run.reference_policy,
        seed=run.seed,
        records=records,
    )
