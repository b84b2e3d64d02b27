"""
Initialize models module
"""

from app.models.models import ExperimentRun, MetricRecord
from app.models.networks import PatchDiscriminator, UNetGenerator

__all__ = [
    "ExperimentRun",
    "MetricRecord",
    "PatchDiscriminator",
    "UNetGenerator",
]
