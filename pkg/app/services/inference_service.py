"""
Inference service: feed-forward reconstruction of aliased frames and scoring
"""

import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import torch
from torch import nn

from app.schemas import DatasetManifest, EvaluationConfig, MetricRecordSchema, MultiCoilImage, Role, SSoSImage
from app.services.dataset_service import DatasetService
from app.services.metrics_service import MetricsService
from app.services.network_service import NetworkService
from app.services.training_service import TrainingService

logger = logging.getLogger(__name__)


class InferenceService:
    """Normalize -> generator -> denormalize, with timing"""

    @staticmethod
    def reconstruct(generator: nn.Module, y: MultiCoilImage) -> Tuple[MultiCoilImage, float]:
        """Reconstruction at the input's scale and the latency in seconds"""
        generator.eval()
        start = time.perf_counter()
        normalized, scale = TrainingService.normalize(y)
        out = NetworkService.generator_apply(generator, normalized)
        recon = TrainingService.denormalize(out, scale)
        latency = time.perf_counter() - start
        return recon.model_copy(update={"frame_index": y.frame_index, "role": Role.reconstruction}), latency

    @staticmethod
    def score(recon: MultiCoilImage, reference: MultiCoilImage,
              config: Optional[EvaluationConfig] = None) -> Tuple[float, float]:
        """(PSNR dB, SSIM) of the SSoS images"""
        config = config or EvaluationConfig()
        return InferenceService.score_ssos(MetricsService.ssos(recon), MetricsService.ssos(reference), config)

    @staticmethod
    def score_ssos(recon: SSoSImage, reference: SSoSImage, config: EvaluationConfig) -> Tuple[float, float]:
        psnr = MetricsService.psnr(recon, reference)
        ssim = MetricsService.ssim(recon, reference, config.k1, config.k2, config.ssim_window)
        return psnr, ssim

    @staticmethod
    def set_threads(num_threads: int):
        if num_threads > 0:
            torch.set_num_threads(num_threads)

    @classmethod
    def evaluate_generator(cls, generator: nn.Module, directory: Path, manifest: DatasetManifest,
                           sequences: Sequence[int], vs_list: Sequence[int], config: EvaluationConfig,
                           method: str = "proposed") -> List[MetricRecordSchema]:
        """Metric records of the generator on every (sequence, vs, frame) aliased input"""
        records = []
        num_frames = manifest.schedule["num_frames"]
        for seq in sequences:
            references = cls.references(directory, manifest, seq, config.reference_policy)
            for vs in vs_list:
                for t in range(num_frames):
                    sample = DatasetService.read_aliased(directory, manifest, seq, t, vs)
                    recon, _ = cls.reconstruct(generator, sample.image)
                    psnr, ssim = cls.score(recon, references[t], config)
                    records.append(MetricRecordSchema(sequence=seq, frame=t, vs=vs, method=method,
                                                      psnr_db=psnr, ssim=ssim))
        return records

    @staticmethod
    def references(directory: Path, manifest: DatasetManifest, sequence: int,
                   policy: str) -> List[MultiCoilImage]:
        what = "ground_truth" if policy == "ground_truth" else "grappa"
        return DatasetService.read_frames(directory, manifest, sequence, what)
