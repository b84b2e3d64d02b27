"""
Pydantic schemas for configuration, domain types and reports
"""

from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ParameterError

M = TypeVar("M", bound=BaseModel)


def validate_payload(model_cls: Type[M], payload: Any) -> M:
    """Validate a dict / model against a schema, raising ParameterError on failure"""
    try:
        if isinstance(payload, model_cls):
            return model_cls.model_validate(payload.model_dump())
        return model_cls.model_validate(payload)
    except ValidationError as e:
        raise ParameterError(f"Invalid {model_cls.__name__}: {e}") from e


# ============= Phantom Schemas =============
class BolusParams(BaseModel):
    """Gamma-variate enhancement parameters"""
    t0: float = 4.0  # arrival frame
    a: float = 2.0  # shape
    b: float = 1.5  # scale
    amplitude: float = Field(1.0, ge=0.0)


class StructureSpec(BaseModel):
    """Ellipse in normalized grid coordinates ([-1, 1] on both axes)"""
    name: str
    center: Tuple[float, float] = (0.0, 0.0)
    axes: Tuple[float, float] = (0.5, 0.5)
    angle_deg: float = 0.0
    intensity: float = Field(1.0, ge=0.0)
    bolus: Optional[BolusParams] = None

    @field_validator("axes")
    @classmethod
    def axes_positive(cls, v):
        if min(v) <= 0:
            raise ValueError("ellipse axes must be > 0")
        return v


class PhantomSpec(BaseModel):
    grid_height: int = Field(64, ge=16)
    grid_width: int = Field(64, ge=16)
    num_frames: int = Field(24, ge=1)
    num_coils: int = Field(4, ge=1)
    structures: List[StructureSpec] = Field(default_factory=list)
    noise_std: float = Field(0.0, ge=0.0)
    seed: int = 0
    coil_smoothness: float = Field(2.0, gt=0.0)
    edge_sigma: float = Field(1.2, ge=0.0)  # pixels; 0 keeps hard ellipse edges


class PhantomSuiteConfig(BaseModel):
    """Seeded family of phantom instances sharing a template"""
    template: PhantomSpec = Field(default_factory=lambda: default_phantom_spec())
    num_instances: int = Field(3, ge=1)
    held_out: List[int] = Field(default_factory=lambda: [2])
    arrival_shift_per_instance: float = 1.0

    @model_validator(mode="after")
    def held_out_in_range(self):
        bad = [i for i in self.held_out if not 0 <= i < self.num_instances]
        if bad:
            raise ValueError(f"held-out instances out of range: {bad}")
        return self


def default_phantom_spec() -> PhantomSpec:
    """Head-like phantom: background tissue, two arteries and a draining sinus"""
    return PhantomSpec(
        structures=[
            StructureSpec(name="tissue", center=(0.0, 0.0), axes=(0.8, 0.65), intensity=0.3),
            StructureSpec(
                name="artery_left", center=(-0.1, -0.3), axes=(0.08, 0.35), angle_deg=10.0,
                intensity=0.2, bolus=BolusParams(t0=5.0, a=1.5, b=1.0, amplitude=3.0),
            ),
            StructureSpec(
                name="artery_right", center=(-0.1, 0.3), axes=(0.08, 0.35), angle_deg=-10.0,
                intensity=0.2, bolus=BolusParams(t0=5.0, a=1.5, b=1.0, amplitude=3.0),
            ),
            StructureSpec(
                name="sinus", center=(0.4, 0.0), axes=(0.12, 0.2),
                intensity=0.2, bolus=BolusParams(t0=9.0, a=2.0, b=1.0, amplitude=2.0),
            ),
        ],
        edge_sigma=0.8,
    )


class Role(str, Enum):
    ground_truth = "ground_truth"
    aliased = "aliased"
    reconstruction = "reconstruction"


class MultiCoilImage(BaseModel):
    """Complex coil images [C, H, W] for one temporal frame"""
    data: np.ndarray
    frame_index: int = 0
    role: Role = Role.ground_truth

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("data")
    @classmethod
    def check_data(cls, v):
        v = np.asarray(v)
        if v.ndim != 3 or v.shape[0] < 1:
            raise ValueError(f"expected [C, H, W] with C >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite entries")
        return v.astype(np.complex128, copy=False) if not np.iscomplexobj(v) else v

    @property
    def num_coils(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.data.shape)


class CoilSensitivities(BaseModel):
    maps: np.ndarray
    normalized: bool = True

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_normalization(self):
        if self.maps.ndim != 3:
            raise ValueError(f"expected [C, H, W] maps, got {self.maps.shape}")
        if self.normalized:
            energy = np.sum(np.abs(self.maps) ** 2, axis=0)
            if not np.allclose(energy, 1.0, atol=1e-6, rtol=0.0):
                raise ValueError("sum of squared sensitivities deviates from 1")
        return self


# ============= Sampling Schemas =============
class SamplingConfig(BaseModel):
    a_radius: int = Field(12, ge=1)
    lattice: Tuple[int, int] = (3, 2)
    b_interleaves: int = Field(5, ge=1)


class SamplingSchedule(BaseModel):
    """TWIST A/B schedule: ACS block plus disjoint periphery interleaves"""
    height: int
    width: int
    num_frames: int
    a_radius: int
    b_interleaves: int
    lattice: Tuple[int, int]
    frame_labels: List[Tuple[str, str]]
    acs_mask: np.ndarray  # [H, W] bool
    subsets: np.ndarray  # [k, H, W] bool, periphery interleaves B_1..B_k

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def lattice_mask(self) -> np.ndarray:
        """Fully view-shared pattern: ACS plus every periphery subset"""
        return self.acs_mask | np.any(self.subsets, axis=0)

    def descriptor(self) -> Dict[str, Any]:
        return {
            "height": self.height,
            "width": self.width,
            "num_frames": self.num_frames,
            "a_radius": self.a_radius,
            "b_interleaves": self.b_interleaves,
            "lattice": list(self.lattice),
            "frame_labels": [list(lbl) for lbl in self.frame_labels],
        }


class SamplingMask(BaseModel):
    mask: np.ndarray  # [H, W] bool
    vs: int = 0  # 0 = not built from a schedule (e.g. full sampling)
    frame: Optional[int] = None
    acceleration: float = 0.0
    lattice: Optional[Tuple[int, int]] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def compute_acceleration(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ValueError(f"mask must be [H, W], got {self.mask.shape}")
        count = int(self.mask.sum())
        self.acceleration = float(self.mask.size) / count if count else float("inf")
        return self

    @classmethod
    def full(cls, height: int, width: int) -> "SamplingMask":
        return cls(mask=np.ones((height, width), dtype=bool))


class KSpaceFrame(BaseModel):
    """Complex k-space [C, H, W], zero wherever the mask is false"""
    data: np.ndarray
    mask: SamplingMask
    frame_index: int = 0

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_support(self):
        if self.data.ndim != 3 or self.data.shape[1:] != self.mask.mask.shape:
            raise ValueError(f"k-space {self.data.shape} does not match mask {self.mask.mask.shape}")
        if np.any(self.data[:, ~self.mask.mask] != 0):
            raise ValueError("k-space has samples outside its mask")
        return self


# ============= GRAPPA Schemas =============
class GrappaConfig(BaseModel):
    kernel_size: Tuple[int, int] = (5, 5)
    regularization: float = Field(1e-4, ge=0.0)


class GrappaKernel(BaseModel):
    weights: np.ndarray  # [classes, C_out, C_in * taps]
    offsets: List[Tuple[int, int]]  # (dy, dz) per class
    kernel_size: Tuple[int, int] = (5, 5)
    lattice: Tuple[int, int] = (3, 2)
    regularization: float = 1e-4

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def one_weight_set_per_class(self):
        ry, rz = self.lattice
        if len(self.offsets) != ry * rz - 1 or self.weights.shape[0] != len(self.offsets):
            raise ValueError("kernel needs one weight set per missing-point offset class")
        return self

    def descriptor(self) -> Dict[str, Any]:
        return {
            "offsets": [list(o) for o in self.offsets],
            "kernel_size": list(self.kernel_size),
            "lattice": list(self.lattice),
            "regularization": self.regularization,
            "shape": list(self.weights.shape),
        }


# ============= Metrics Schemas =============
class SSoSImage(BaseModel):
    data: np.ndarray  # real [H, W] >= 0

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("data")
    @classmethod
    def nonnegative(cls, v):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"SSoS image must be [H, W], got {v.shape}")
        if np.any(v < 0):
            raise ValueError("SSoS image has negative entries")
        return v


# ============= Network / Loss / Training Schemas =============
class NetworkConfig(BaseModel):
    num_coils: int = Field(4, ge=1)
    depth: int = Field(3, ge=1)
    base_filters: int = Field(16, ge=1)
    residual: bool = False
    disc_widths: Tuple[int, ...] = (64, 128, 1)
    leaky_slope: float = 0.2
    norm_eps: float = 1e-5

    @classmethod
    def full_scale(cls) -> "NetworkConfig":
        """16 coils, widths 64 -> 1024"""
        return cls(num_coils=16, depth=5, base_filters=64)


class LossWeights(BaseModel):
    gamma: float = Field(2.0, ge=0.0)  # cycle
    alpha: float = Field(1.0, ge=0.0)  # identity
    beta: float = Field(2.0, ge=0.0)  # frequency
    gp_coeff: float = Field(10.0, ge=0.0)  # Lipschitz penalty


class LossReport(BaseModel):
    cycle: float
    wgan_g: float
    wgan_d: float
    identity: float
    freq: float
    total_g: float
    total_d: float

    @classmethod
    def combine(cls, weights: LossWeights, cycle: float, wgan_g: float, wgan_d: float,
                identity: float, freq: float) -> "LossReport":
        total_g = weights.gamma * cycle + wgan_g + weights.alpha * identity + weights.beta * freq
        return cls(cycle=cycle, wgan_g=wgan_g, wgan_d=wgan_d, identity=identity, freq=freq,
                   total_g=total_g, total_d=wgan_d)

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in self.model_dump().values())


class TrainConfig(BaseModel):
    epochs: int = Field(50, ge=1)
    phase1_epochs: int = Field(10, ge=0)
    lr: float = Field(0.001, ge=0.0)
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    g_steps_per_d_step: int = Field(5, ge=1)
    batch_size: int = Field(1, ge=1)
    vs_choices: List[int] = Field(default_factory=lambda: [2, 3, 5])
    weights: LossWeights = Field(default_factory=LossWeights)
    seed: int = 0
    d_image_norm: Literal["l1", "l2"] = "l1"
    init_std: float = Field(0.02, gt=0.0)
    steps_per_epoch: Optional[int] = Field(None, ge=1)  # None: one pass over domain Y
    checkpoint_every: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_schedule(self):
        if self.phase1_epochs > self.epochs:
            raise ValueError("phase1_epochs exceeds epochs")
        if not self.vs_choices or min(self.vs_choices) < 1:
            raise ValueError("vs_choices must be non-empty positive counts")
        return self


class AliasedSample(BaseModel):
    """Domain-Y training sample: aliased coil images with the mask that produced them"""
    image: MultiCoilImage
    mask: SamplingMask
    sequence: int = 0

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def mask_matches_image(self):
        if self.mask.mask.shape != self.image.data.shape[1:]:
            raise ValueError(f"mask {self.mask.mask.shape} does not match image {self.image.data.shape}")
        return self


class TrainingSummary(BaseModel):
    run_dir: str
    log_path: str
    checkpoints: List[str] = Field(default_factory=list)
    start_epoch: int = 0
    epochs_completed: int = 0
    steps: int = 0
    final_lr: float = 0.0
    epoch_total_g: List[float] = Field(default_factory=list)  # median total_g per epoch


# ============= Ablation Schemas =============
class AblationVariant(str, Enum):
    proposed = "proposed"
    no_freq = "no_freq"
    no_identity = "no_identity"
    no_freq_no_identity = "no_freq_no_identity"
    conventional_cyclegan = "conventional_cyclegan"


class AblationConfig(BaseModel):
    variant: AblationVariant = AblationVariant.proposed
    use_freq: bool = True
    use_identity: bool = True

    @model_validator(mode="after")
    def flags_match_variant(self):
        expected = {
            AblationVariant.proposed: (True, True),
            AblationVariant.no_freq: (False, True),
            AblationVariant.no_identity: (True, False),
            AblationVariant.no_freq_no_identity: (False, False),
        }.get(self.variant)
        if expected is not None and (self.use_freq, self.use_identity) != expected:
            raise ValueError(f"flags do not match variant {self.variant.value}")
        return self

    @classmethod
    def for_variant(cls, variant: AblationVariant) -> "AblationConfig":
        variant = AblationVariant(variant)
        use_freq = variant in (AblationVariant.proposed, AblationVariant.no_identity,
                               AblationVariant.conventional_cyclegan)
        use_identity = variant in (AblationVariant.proposed, AblationVariant.no_freq,
                                   AblationVariant.conventional_cyclegan)
        if variant == AblationVariant.conventional_cyclegan:
            use_freq = False
        return cls(variant=variant, use_freq=use_freq, use_identity=use_identity)

    def apply(self, weights: LossWeights) -> LossWeights:
        """Zero the weights of the disabled terms"""
        return weights.model_copy(update={
            "beta": weights.beta if self.use_freq else 0.0,
            "alpha": weights.alpha if self.use_identity else 0.0,
        })


class AblationResult(BaseModel):
    variant: AblationVariant
    weights: LossWeights
    checkpoint: str = ""
    parameter_count: int = 0
    median_psnr_db: Dict[int, float] = Field(default_factory=dict)  # keyed by VS
    median_ssim: Dict[int, float] = Field(default_factory=dict)
    records: List["MetricRecordSchema"] = Field(default_factory=list)

    model_config = ConfigDict(ser_json_inf_nan="constants")


class AblationReport(BaseModel):
    seed: int
    results: Dict[str, AblationResult] = Field(default_factory=dict)  # keyed by variant
    margins_db: Dict[str, Dict[int, float]] = Field(default_factory=dict)  # proposed minus variant, per VS

    model_config = ConfigDict(ser_json_inf_nan="constants")


# ============= Experiment Schemas =============
class EvaluationConfig(BaseModel):
    reference_policy: Literal["ground_truth", "grappa_vs_max"] = "ground_truth"
    ssim_window: int = Field(7, ge=1)
    k1: float = 0.01
    k2: float = 0.03
    threshold_frac: float = Field(0.1, gt=0.0, lt=1.0)
    roi_structures: List[str] = Field(default_factory=list)  # empty: every enhancing structure
    emit_plots: bool = True


class ExperimentConfig(BaseModel):
    name: str = "desk"
    seed: int = 0
    phantom: PhantomSuiteConfig = Field(default_factory=PhantomSuiteConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    grappa: GrappaConfig = Field(default_factory=GrappaConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @model_validator(mode="after")
    def coils_consistent(self):
        if self.network.num_coils != self.phantom.template.num_coils:
            raise ValueError("network.num_coils must equal phantom num_coils")
        if max(self.train.vs_choices) > self.sampling.b_interleaves:
            raise ValueError("vs_choices exceed b_interleaves")
        return self


class ArraySpec(BaseModel):
    file: str
    dtype: Literal["complex64", "float32", "uint8"]
    shape: List[int]
    role: str = ""


class DatasetManifest(BaseModel):
    version: int = 1
    byte_order: Literal["little"] = "little"
    seed: int = 0
    arrays: Dict[str, ArraySpec] = Field(default_factory=dict)
    schedule: Dict[str, Any] = Field(default_factory=dict)
    sequences: List[Dict[str, Any]] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)


class MetricRecordSchema(BaseModel):
    sequence: int
    frame: int
    vs: int
    method: str
    psnr_db: float
    ssim: float

    model_config = ConfigDict(ser_json_inf_nan="constants")

    def key(self) -> Tuple[int, str, int, int]:
        return (self.sequence, self.method, self.vs, self.frame)


class StartToPeakRecord(BaseModel):
    sequence: int
    roi: str
    method: str
    vs: int
    start_to_peak: Optional[int] = None
    error_vs_truth: Optional[int] = None


class ExperimentReport(BaseModel):
    name: str = ""
    reference_policy: str = "ground_truth"
    records: List[MetricRecordSchema] = Field(default_factory=list)
    start_to_peak: List[StartToPeakRecord] = Field(default_factory=list)
    plots: List[str] = Field(default_factory=list)

    model_config = ConfigDict(ser_json_inf_nan="constants")

    @model_validator(mode="after")
    def unique_keys(self):
        keys = [r.key() for r in self.records]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate (sequence, method, vs, frame) metric records")
        return self


# ============= API Schemas =============
class ReconstructRequest(BaseModel):
    dataset: str
    checkpoint: str
    sequence: int = 0
    frame: int = Field(0, ge=0)
    vs: int = Field(2, ge=1)


class ReconstructResponse(BaseModel):
    sequence: int
    frame: int
    vs: int
    shape: List[int]
    acceleration: float
    latency_ms: float
    psnr_db: Optional[float] = None
    ssim: Optional[float] = None
    vs_seen_in_training: bool = True

    model_config = ConfigDict(ser_json_inf_nan="constants")


class MetricRecordResponse(BaseModel):
    id: int
    sequence: int
    frame: int
    vs: int
    method: str
    psnr_db: Optional[float] = None
    ssim: float

    model_config = ConfigDict(from_attributes=True, ser_json_inf_nan="constants")


class ExperimentRunResponse(BaseModel):
    id: int
    name: str
    reference_policy: str
    seed: int
    records: List[MetricRecordResponse] = Field(default_factory=list)

    model_config = ConfigDict(from_attributes=True, ser_json_inf_nan="constants")


AblationResult.model_rebuild()
