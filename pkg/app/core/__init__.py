"""
Initialize core module
"""

from app.core.config import settings
from app.core.database import Base, init_db, get_db
from app.core.errors import (
    ReconstructionError,
    ParameterError,
    ContractError,
    CalibrationError,
    NumericalError,
    DegenerateInputError,
    UndefinedDynamicsError,
    DatasetError,
    TrainingDivergenceError,
)

__all__ = [
    "settings",
    "Base",
    "init_db",
    "get_db",
    "ReconstructionError",
    "ParameterError",
    "ContractError",
    "CalibrationError",
    "NumericalError",
    "DegenerateInputError",
    "UndefinedDynamicsError",
    "DatasetError",
    "TrainingDivergenceError",
]
