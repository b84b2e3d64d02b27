"""
Loss service: cycle, WGAN, identity and frequency terms of the transport objective
"""

import logging
from typing import Callable, Dict, Literal, Optional, Tuple

import torch

from app.core.errors import ContractError
from app.core.fourier import fft2c_torch, project_torch
from app.schemas import LossReport, LossWeights

logger = logging.getLogger(__name__)

Generator = Callable[[torch.Tensor], torch.Tensor]
Norm = Literal["l1", "l2"]


def _project(x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """F^-1 P F, exact identity for an all-true mask"""
    if bool(mask.all()):
        return x
    return project_torch(x, mask)


class LossService:
    """Loss terms over batches of complex coil images [B, C, H, W] and masks [B, H, W]"""

    @staticmethod
    def ssos(x: torch.Tensor) -> torch.Tensor:
        """[B, C, H, W] complex -> [B, 1, H, W] real"""
        return torch.linalg.vector_norm(x, dim=1, keepdim=True)

    @classmethod
    def d_image(cls, a: torch.Tensor, b: torch.Tensor, norm: Norm = "l1") -> torch.Tensor:
        """Per-sample distance of the SSoS images in per-pixel units.

        l1 is the mean absolute difference, l2 the root mean square difference.
        """
        if a.shape != b.shape:
            raise ContractError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
        diff = cls.ssos(a) - cls.ssos(b)
        if norm == "l1":
            return diff.abs().mean(dim=(1, 2, 3))
        return diff.pow(2).mean(dim=(1, 2, 3)).sqrt()

    @staticmethod
    def d_freq(ka: torch.Tensor, kb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Per-sample sum over coils of the on-mask Frobenius norm, divided by sqrt(|mask|)"""
        if ka.shape != kb.shape or mask.shape[-2:] != ka.shape[-2:]:
            raise ContractError(f"shape mismatch: {tuple(ka.shape)}, {tuple(kb.shape)}, mask {tuple(mask.shape)}")
        m = mask.unsqueeze(-3) if mask.dim() == ka.dim() - 1 else mask
        diff = (ka - kb) * m.to(ka.dtype)
        sampled = m.sum(dim=(-2, -1)).clamp(min=1).to(diff.real.dtype)
        return (torch.linalg.vector_norm(diff, dim=(-2, -1)) / sampled.sqrt()).sum(dim=-1)

    @staticmethod
    def _check_masks(x: torch.Tensor, mask: torch.Tensor):
        if mask.shape[-2:] != x.shape[-2:] or (mask.dim() == 3 and mask.shape[0] != x.shape[0]):
            raise ContractError(f"mask {tuple(mask.shape)} does not match batch {tuple(x.shape)}")

    @classmethod
    def cycle_loss(cls, G: Generator, x_batch: torch.Tensor, y_batch: torch.Tensor, mask_x: torch.Tensor,
                   mask_y: torch.Tensor, norm: Norm = "l1") -> torch.Tensor:
        """mean d_I(Y, A G(Y)) + mean d_I(X, G(A X)) with A = F^-1 P F"""
        cls._check_masks(x_batch, mask_x)
        cls._check_masks(y_batch, mask_y)
        term_y = cls.d_image(y_batch, _project(G(y_batch), mask_y), norm).mean()
        term_x = cls.d_image(x_batch, G(_project(x_batch, mask_x)), norm).mean()
        return term_y + term_x

    @classmethod
    def identity_loss(cls, G: Generator, x_batch: torch.Tensor, norm: Norm = "l1") -> torch.Tensor:
        """mean d_I(X, G(X))"""
        return cls.d_image(x_batch, G(x_batch), norm).mean()

    @classmethod
    def freq_loss(cls, G: Generator, x_batch: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """mean d_F(P F X, P F G(F^-1 P F X))"""
        cls._check_masks(x_batch, mask)
        return cls._freq_term(x_batch, G(_project(x_batch, mask)), mask)

    @classmethod
    def _freq_term(cls, x_batch: torch.Tensor, g_aliased: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return cls.d_freq(fft2c_torch(x_batch), fft2c_torch(g_aliased), mask).mean()

    @staticmethod
    def critic_score(D: Callable[[torch.Tensor], torch.Tensor], s: torch.Tensor) -> torch.Tensor:
        """Per-sample critic value: mean of the patch score map"""
        out = D(s)
        return out.reshape(out.shape[0], -1).mean(dim=1)

    @classmethod
    def gradient_penalty(cls, D, real: torch.Tensor, fake: torch.Tensor,
                         rng: Optional[torch.Generator] = None) -> torch.Tensor:
        """mean (sqrt(HW) * ||grad D(x~)|| - 1)^2 over random convex combinations of SSoS images.

        The critic score is a mean over pixels, so sqrt(HW) * ||grad|| is the per-pixel RMS
        slope of the score map.
        """
        if real.shape != fake.shape:
            raise ContractError(f"shape mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}")
        if real.is_complex():
            real, fake = cls.ssos(real), cls.ssos(fake)
        real, fake = real.detach(), fake.detach()
        eps = torch.rand((real.shape[0],) + (1,) * (real.dim() - 1), generator=rng,
                         dtype=real.dtype).to(real.device)
        interp = (eps * real + (1.0 - eps) * fake).requires_grad_(True)
        with torch.enable_grad():
            scores = cls.critic_score(D, interp)
            grad = None
            if scores.requires_grad:
                grad = torch.autograd.grad(scores.sum(), interp, create_graph=True, allow_unused=True)[0]
        if grad is None:
            grad = torch.zeros_like(interp)
        flat = grad.reshape(grad.shape[0], -1)
        norms = torch.linalg.vector_norm(flat, dim=1) * flat.shape[1] ** 0.5
        return ((norms - 1.0) ** 2).mean()

    @classmethod
    def wgan_losses(cls, D, G: Generator, x_batch: torch.Tensor, y_batch: torch.Tensor,
                    gp_coeff: float = 10.0, rng: Optional[torch.Generator] = None,
                    fake: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """(wgan_g, wgan_d); the critic maximizes mean D(S(X)) - mean D(S(G(Y)))"""
        if fake is None:
            fake = G(y_batch)
        real_s, fake_s = cls.ssos(x_batch), cls.ssos(fake)
        wgan_g = -cls.critic_score(D, fake_s).mean()
        bracket = cls.critic_score(D, real_s.detach()).mean() - cls.critic_score(D, fake_s.detach()).mean()
        wgan_d = -bracket
        if gp_coeff > 0:
            wgan_d = wgan_d + gp_coeff * cls.gradient_penalty(D, real_s, fake_s, rng)
        return wgan_g, wgan_d

    @classmethod
    def evaluate(cls, G: Generator, D, x_batch: torch.Tensor, y_batch: torch.Tensor, mask_x: torch.Tensor,
                 mask_y: torch.Tensor, weights: LossWeights, norm: Norm = "l1",
                 rng: Optional[torch.Generator] = None) -> Dict[str, torch.Tensor]:
        """Every term as a tensor, sharing generator passes; `total_g` carries the graph"""
        cls._check_masks(x_batch, mask_x)
        cls._check_masks(y_batch, mask_y)
        g_y = G(y_batch)
        g_aliased_x = G(_project(x_batch, mask_x))
        g_x = G(x_batch)

        cycle = (cls.d_image(y_batch, _project(g_y, mask_y), norm).mean()
                 + cls.d_image(x_batch, g_aliased_x, norm).mean())
        identity = cls.d_image(x_batch, g_x, norm).mean()
        freq = cls._freq_term(x_batch, g_aliased_x, mask_x)
        wgan_g, wgan_d = cls.wgan_losses(D, G, x_batch, y_batch, weights.gp_coeff, rng, fake=g_y)
        total_g = weights.gamma * cycle + wgan_g + weights.alpha * identity + weights.beta * freq
        return {"cycle": cycle, "wgan_g": wgan_g, "wgan_d": wgan_d, "identity": identity,
                "freq": freq, "total_g": total_g, "total_d": wgan_d}

    @staticmethod
    def report(terms: Dict[str, torch.Tensor], weights: LossWeights) -> LossReport:
        """Float report; total_g recombined from the reported components"""
        return LossReport.combine(
            weights,
            cycle=float(terms["cycle"].detach()),
            wgan_g=float(terms["wgan_g"].detach()),
            wgan_d=float(terms["wgan_d"].detach()),
            identity=float(terms["identity"].detach()),
            freq=float(terms["freq"].detach()),
        )

    @classmethod
    def total_losses(cls, G: Generator, D, x_batch: torch.Tensor, y_batch: torch.Tensor, mask_x: torch.Tensor,
                     mask_y: torch.Tensor, weights: LossWeights, norm: Norm = "l1",
                     rng: Optional[torch.Generator] = None) -> LossReport:
        return cls.report(cls.evaluate(G, D, x_batch, y_batch, mask_x, mask_y, weights, norm, rng), weights)
