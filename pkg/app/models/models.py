"""
SQLAlchemy models for the metric record store
"""

from sqlalchemy import Column, Integer, String, DateTime, ForeignKey, Float, UniqueConstraint
from sqlalchemy.orm import relationship
from datetime import datetime

from app.core.database import Base


class ExperimentRun(Base):
    """One evaluated experiment (dataset + reconstructions + reference policy)"""
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String(255), unique=True, nullable=False, index=True)
    reference_policy = Column(String(50), nullable=False)  # ground_truth, grappa_vs_max
    seed = Column(Integer, default=0)
    dataset_dir = Column(String(512), nullable=True)
    report_path = Column(String(512), nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    records = relationship("MetricRecord", back_populates="run", cascade="all, delete-orphan",
                           order_by="MetricRecord.id")


class MetricRecord(Base):
    """PSNR / SSIM of one method at one (sequence, vs, frame)"""
    __tablename__ = "metric_records"
    __table_args__ = (
        UniqueConstraint("run_id", "sequence", "method", "vs", "frame", name="uq_metric_key"),
    )

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("experiment_runs.id"), nullable=False)
    sequence = Column(Integer, nullable=False)
    frame = Column(Integer, nullable=False)
    vs = Column(Integer, nullable=False)
    method = Column(String(50), nullable=False, index=True)  # proposed, aliased, raw, grappa, ground_truth
    psnr_db = Column(Float, nullable=True)  # NULL: identical images (+inf)
    ssim = Column(Float, nullable=False)

    # Relationships
    run = relationship("ExperimentRun", back_populates="records")
