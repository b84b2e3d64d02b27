"""
Exception hierarchy for reconstruction services
"""

from typing import Any, Dict, Optional


class ReconstructionError(Exception):
    """Base class for every error raised by the services"""


class ParameterError(ReconstructionError, ValueError):
    """Invalid parameter or configuration value"""


class ContractError(ReconstructionError, ValueError):
    """Shape, mask or lattice contract violated by the caller"""


class CalibrationError(ReconstructionError):
    """Autocalibration region too small for the requested kernel"""


class NumericalError(ReconstructionError, ArithmeticError):
    """Singular or ill-posed linear system"""


class DegenerateInputError(ReconstructionError, ValueError):
    """Input without spread (e.g. zero standard deviation)"""


class UndefinedDynamicsError(ReconstructionError, ValueError):
    """Time series without a peak above its baseline"""


class DatasetError(ReconstructionError, IOError):
    """Dataset container missing an array or holding a corrupt one"""


class TrainingDivergenceError(ReconstructionError, RuntimeError):
    """Training produced a non-finite loss"""

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.report = report or {}
