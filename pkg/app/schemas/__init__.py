"""
Initialize schemas module
"""

from app.schemas.schemas import (
    BolusParams,
    StructureSpec,
    PhantomSpec,
    PhantomSuiteConfig,
    Role,
    MultiCoilImage,
    CoilSensitivities,
    SamplingConfig,
    SamplingSchedule,
    SamplingMask,
    KSpaceFrame,
    GrappaConfig,
    GrappaKernel,
    SSoSImage,
    NetworkConfig,
    LossWeights,
    LossReport,
    TrainConfig,
    AliasedSample,
    TrainingSummary,
    AblationVariant,
    AblationConfig,
    AblationResult,
    AblationReport,
    EvaluationConfig,
    ExperimentConfig,
    ArraySpec,
    DatasetManifest,
    MetricRecordSchema,
    StartToPeakRecord,
    ExperimentReport,
    ReconstructRequest,
    ReconstructResponse,
    MetricRecordResponse,
    ExperimentRunResponse,
    default_phantom_spec,
    validate_payload,
)

__all__ = [
    "BolusParams",
    "StructureSpec",
    "PhantomSpec",
    "PhantomSuiteConfig",
    "Role",
    "MultiCoilImage",
    "CoilSensitivities",
    "SamplingConfig",
    "SamplingSchedule",
    "SamplingMask",
    "KSpaceFrame",
    "GrappaConfig",
    "GrappaKernel",
    "SSoSImage",
    "NetworkConfig",
    "LossWeights",
    "LossReport",
    "TrainConfig",
    "AliasedSample",
    "TrainingSummary",
    "AblationVariant",
    "AblationConfig",
    "AblationResult",
    "AblationReport",
    "EvaluationConfig",
    "ExperimentConfig",
    "ArraySpec",
    "DatasetManifest",
    "MetricRecordSchema",
    "StartToPeakRecord",
    "ExperimentReport",
    "ReconstructRequest",
    "ReconstructResponse",
    "MetricRecordResponse",
    "ExperimentRunResponse",
    "default_phantom_spec",
    "validate_payload",
]
