"""
Phantom service: synthetic dynamic contrast-enhanced multi-coil sequences
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from app.core.errors import ParameterError
from app.schemas import (
    BolusParams,
    CoilSensitivities,
    MultiCoilImage,
    PhantomSpec,
    PhantomSuiteConfig,
    Role,
    StructureSpec,
)
from app.schemas.schemas import validate_payload

logger = logging.getLogger(__name__)


class PhantomService:
    """Ground-truth phantom generation"""

    @staticmethod
    def bolus_curve(params: BolusParams, t: float) -> float:
        """Gamma-variate enhancement, peak value `amplitude` at t0 + a*b"""
        if params.a <= 0 or params.b <= 0:
            raise ParameterError(f"gamma-variate needs a, b > 0 (got a={params.a}, b={params.b})")
        if t < 0:
            raise ParameterError(f"frame index must be >= 0, got {t}")
        dt = t - params.t0
        if dt <= 0 or params.amplitude == 0:
            return 0.0
        a, b = params.a, params.b
        return float(params.amplitude * (dt / (a * b)) ** a * np.exp(a - dt / b))

    @staticmethod
    def structure_mask(structure: StructureSpec, height: int, width: int) -> np.ndarray:
        """Boolean ellipse support on the grid"""
        yy, xx = np.meshgrid(
            np.linspace(-1.0, 1.0, height), np.linspace(-1.0, 1.0, width), indexing="ij"
        )
        theta = np.deg2rad(structure.angle_deg)
        dy, dx = yy - structure.center[0], xx - structure.center[1]
        u = dy * np.cos(theta) + dx * np.sin(theta)
        v = -dy * np.sin(theta) + dx * np.cos(theta)
        return (u / structure.axes[0]) ** 2 + (v / structure.axes[1]) ** 2 <= 1.0

    @staticmethod
    def make_coil_sensitivities(height: int, width: int, num_coils: int,
                                smoothness: float = 2.0, seed: int = 0) -> CoilSensitivities:
        """Gaussian-lobe coils on a ring with smooth phase, normalized to unit energy"""
        if num_coils < 1:
            raise ParameterError(f"num_coils must be >= 1, got {num_coils}")
        if smoothness <= 0:
            raise ParameterError(f"smoothness must be > 0, got {smoothness}")
        rng = np.random.default_rng(seed)
        yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
        cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
        ring = min(height, width) / 2.0
        c_width = smoothness * min(height, width)
        phi = rng.uniform(0.0, 2.0 * np.pi)

        maps = []
        for i in range(num_coils):
            theta = phi + 2.0 * np.pi * i / num_coils
            y0, x0 = cy + ring * np.sin(theta), cx + ring * np.cos(theta)
            magnitude = np.exp(-((yy - y0) ** 2 + (xx - x0) ** 2) / (2.0 * c_width))
            ky, kx = rng.normal(scale=0.5, size=2)
            phase = rng.uniform(-np.pi, np.pi) + ky * (yy - cy) / height + kx * (xx - cx) / width
            maps.append(magnitude * np.exp(1j * phase))
        maps = np.stack(maps)

        rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
        maps = maps / rss
        return CoilSensitivities(maps=maps, normalized=True)

    @classmethod
    def frame_image(cls, spec: PhantomSpec, t: int) -> np.ndarray:
        """Real scalar image of frame t; later structures overwrite earlier ones"""
        image = np.zeros((spec.grid_height, spec.grid_width))
        for structure in spec.structures:
            enhancement = cls.bolus_curve(structure.bolus, t) if structure.bolus else 0.0
            support = cls.structure_mask(structure, spec.grid_height, spec.grid_width)
            image[support] = structure.intensity * (1.0 + enhancement)
        if spec.edge_sigma > 0:
            image = gaussian_filter(image, spec.edge_sigma)
        return image

    @classmethod
    def make_phantom_sequence(
        cls, spec: PhantomSpec, sensitivities: Optional[CoilSensitivities] = None
    ) -> Tuple[List[MultiCoilImage], CoilSensitivities]:
        """Ground-truth coil images for every frame plus the sensitivities used"""
        spec = validate_payload(PhantomSpec, spec)
        sens = sensitivities or cls.make_coil_sensitivities(
            spec.grid_height, spec.grid_width, spec.num_coils, spec.coil_smoothness, spec.seed
        )
        if sens.maps.shape != (spec.num_coils, spec.grid_height, spec.grid_width):
            raise ParameterError(f"sensitivity maps {sens.maps.shape} do not match the phantom grid")
        noise_rng = np.random.default_rng([spec.seed, 1])
        frames = []
        for t in range(spec.num_frames):
            coils = sens.maps * cls.frame_image(spec, t)[None]
            if spec.noise_std > 0:
                shape = coils.shape
                coils = coils + spec.noise_std * (
                    noise_rng.standard_normal(shape) + 1j * noise_rng.standard_normal(shape)
                ) / np.sqrt(2.0)
            frames.append(MultiCoilImage(data=coils.astype(np.complex64), frame_index=t, role=Role.ground_truth))
        logger.info(
            f"Phantom generated: {spec.num_frames} frames, {spec.num_coils} coils, "
            f"{spec.grid_height}x{spec.grid_width}, seed {spec.seed}"
        )
        return frames, sens

    @staticmethod
    def suite_specs(suite: PhantomSuiteConfig, seed: int) -> List[PhantomSpec]:
        """Instances of a suite: seed and bolus arrival shifted per instance"""
        specs = []
        for i in range(suite.num_instances):
            structures = []
            for s in suite.template.structures:
                if s.bolus is not None:
                    bolus = s.bolus.model_copy(update={"t0": s.bolus.t0 + i * suite.arrival_shift_per_instance})
                    s = s.model_copy(update={"bolus": bolus})
                structures.append(s)
            specs.append(suite.template.model_copy(update={"seed": seed + i, "structures": structures}))
        return specs
