"""
Centered, unitary 2-D Fourier transforms over the last two axes
"""

import numpy as np
import torch

_AXES = (-2, -1)


def fft2c(x: np.ndarray) -> np.ndarray:
    """Image -> k-space, DC at index (H//2, W//2)"""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x, axes=_AXES), norm="ortho"), axes=_AXES)


def ifft2c(k: np.ndarray) -> np.ndarray:
    """k-space -> image; adjoint and inverse of fft2c"""
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k, axes=_AXES), norm="ortho"), axes=_AXES)


def fft2c_torch(x: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(torch.fft.fft2(torch.fft.ifftshift(x, dim=_AXES), norm="ortho"), dim=_AXES)


def ifft2c_torch(k: torch.Tensor) -> torch.Tensor:
    return torch.fft.fftshift(torch.fft.ifft2(torch.fft.ifftshift(k, dim=_AXES), norm="ortho"), dim=_AXES)


def project_torch(x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """F^-1 P_mask F applied per coil; mask broadcasts over [B, H, W] or [H, W]"""
    if mask.dim() == x.dim() - 1:
        mask = mask.unsqueeze(-3)
    return ifft2c_torch(fft2c_torch(x) * mask.to(x.dtype))
