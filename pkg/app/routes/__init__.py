"""
Initialize routes module
"""

from app.routes.datasets import router as datasets_router
from app.routes.reconstruction import router as reconstruction_router
from app.routes.metrics import router as metrics_router

__all__ = [
    "datasets_router",
    "reconstruction_router",
    "metrics_router",
]
