"""
Metrics service: SSoS, image / k-space distances, PSNR, SSIM and start-to-peak
"""

import logging
from typing import Literal, Sequence

import numpy as np
from skimage.metrics import structural_similarity

from app.core.errors import ContractError, ParameterError, UndefinedDynamicsError
from app.schemas import KSpaceFrame, MultiCoilImage, SSoSImage

logger = logging.getLogger(__name__)


class MetricsService:
    """Image quality and temporal dynamics metrics"""

    @staticmethod
    def ssos_array(data: np.ndarray) -> np.ndarray:
        """Square root of the sum of squared coil magnitudes over axis -3"""
        return np.sqrt(np.sum(np.abs(data) ** 2, axis=-3))

    @classmethod
    def ssos(cls, x: MultiCoilImage) -> SSoSImage:
        return SSoSImage(data=cls.ssos_array(x.data))

    @classmethod
    def d_image(cls, x: MultiCoilImage, x_prime: MultiCoilImage, norm: Literal["l1", "l2"] = "l1") -> float:
        """||S(X) - S(X')|| with an entrywise L1 (default) or L2 norm"""
        if x.data.shape != x_prime.data.shape:
            raise ContractError(f"shape mismatch: {x.data.shape} vs {x_prime.data.shape}")
        diff = cls.ssos_array(x.data) - cls.ssos_array(x_prime.data)
        if norm == "l1":
            return float(np.sum(np.abs(diff)))
        if norm == "l2":
            return float(np.sqrt(np.sum(diff ** 2)))
        raise ParameterError(f"unknown norm {norm!r}")

    @staticmethod
    def d_freq(k: KSpaceFrame, k_prime: KSpaceFrame) -> float:
        """Sum over coils of the Frobenius norm of the on-mask difference"""
        if not np.array_equal(k.mask.mask, k_prime.mask.mask):
            raise ContractError("d_freq needs identical masks")
        if k.data.shape != k_prime.data.shape:
            raise ContractError(f"shape mismatch: {k.data.shape} vs {k_prime.data.shape}")
        diff = (k.data - k_prime.data)[:, k.mask.mask]  # [C, |mask|]
        return float(np.sum(np.linalg.norm(diff, axis=1)))

    @staticmethod
    def psnr(recon: SSoSImage, ref: SSoSImage) -> float:
        """20 log10(max(ref) / RMSE); +inf when the images are identical"""
        if recon.data.shape != ref.data.shape:
            raise ContractError(f"shape mismatch: {recon.data.shape} vs {ref.data.shape}")
        mse = float(np.mean((recon.data - ref.data) ** 2))
        if mse == 0.0:
            return float("inf")
        return float(20.0 * np.log10(ref.data.max() / np.sqrt(mse)))

    @staticmethod
    def ssim(recon: SSoSImage, ref: SSoSImage, k1: float = 0.01, k2: float = 0.03, window: int = 7) -> float:
        """Mean SSIM over uniform window x window neighborhoods, range taken from the reference"""
        if recon.data.shape != ref.data.shape:
            raise ContractError(f"shape mismatch: {recon.data.shape} vs {ref.data.shape}")
        if window > min(ref.data.shape):
            raise ParameterError(f"window {window} larger than image {ref.data.shape}")
        if window < 3 or window % 2 == 0:
            raise ParameterError(f"window must be odd and >= 3, got {window}")
        data_range = float(ref.data.max() - ref.data.min())
        if data_range == 0.0:
            # constant reference: fall back to its level so c1, c2 stay positive
            data_range = float(abs(ref.data.max())) or 1.0
        return float(structural_similarity(
            recon.data, ref.data, win_size=window, data_range=data_range, K1=k1, K2=k2,
            gaussian_weights=False,
        ))

    @staticmethod
    def start_to_peak(series: Sequence[float], threshold_frac: float = 0.1) -> int:
        """Frames from enhancement onset to the peak.

        The onset is the first frame above baseline + threshold_frac * (peak - baseline),
        the baseline being the mean of the frames preceding the first crossing of the
        threshold measured from frame 0.
        """
        s = np.asarray(series, dtype=np.float64)
        if s.ndim != 1 or len(s) < 2:
            raise UndefinedDynamicsError("need a 1-D series of at least two frames")
        if not 0 < threshold_frac < 1:
            raise ParameterError(f"threshold_frac must be in (0, 1), got {threshold_frac}")
        peak = int(np.argmax(s))
        if s.max() == s.min() or peak == 0:
            raise UndefinedDynamicsError("series has no peak above its baseline")

        def first_crossing(baseline: float) -> int:
            above = np.nonzero(s[: peak + 1] > baseline + threshold_frac * (s[peak] - baseline))[0]
            return int(above[0]) if len(above) else peak

        onset = first_crossing(s[0])
        baseline = float(np.mean(s[:onset])) if onset > 0 else float(s[0])
        if s[peak] <= baseline:
            raise UndefinedDynamicsError("peak does not rise above the baseline")
        return peak - first_crossing(baseline)

    @staticmethod
    def roi_series(ssos_frames: np.ndarray, roi: np.ndarray) -> np.ndarray:
        """Mean SSoS intensity inside an ROI for every frame of a [T, H, W] stack"""
        roi = np.asarray(roi, dtype=bool)
        if not roi.any():
            raise ParameterError("empty ROI")
        return np.asarray(ssos_frames)[:, roi].mean(axis=1)
