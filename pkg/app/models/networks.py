"""
Torch modules: U-Net generator on stacked real/imaginary coil channels and the
1x1 PatchGAN critic on SSoS images
"""

from typing import Any, Dict, Sequence

import torch
from torch import nn

from app.core.errors import ContractError


def conv_block(in_ch: int, out_ch: int, eps: float) -> nn.Sequential:
    """3x3 convolution -> instance norm -> ReLU"""
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
        nn.InstanceNorm2d(out_ch, eps=eps),
        nn.ReLU(inplace=True),
    )


def stage(in_ch: int, out_ch: int, eps: float) -> nn.Sequential:
    return nn.Sequential(
        conv_block(in_ch, out_ch, eps),
        conv_block(out_ch, out_ch, eps),
        conv_block(out_ch, out_ch, eps),
    )


class UNetGenerator(nn.Module):
    """Complex [B, C, H, W] -> complex [B, C, H, W]"""

    def __init__(self, num_coils: int, depth: int = 3, base_filters: int = 16,
                 residual: bool = False, norm_eps: float = 1e-5):
        super().__init__()
        self.num_coils = num_coils
        self.depth = depth
        self.base_filters = base_filters
        self.residual = residual
        self.norm_eps = norm_eps

        channels = 2 * num_coils
        widths = [base_filters * 2 ** s for s in range(depth)]
        self.encoders = nn.ModuleList()
        in_ch = channels
        for w in widths:
            self.encoders.append(stage(in_ch, w, norm_eps))
            in_ch = w
        self.pool = nn.AvgPool2d(kernel_size=2)

        self.ups = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for s in reversed(range(depth - 1)):
            self.ups.append(nn.Sequential(
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(widths[s + 1], widths[s], kernel_size=3, padding=1),
            ))
            self.decoders.append(stage(2 * widths[s], widths[s], norm_eps))

        self.head = nn.Conv2d(widths[0], channels, kernel_size=1)

    def architecture(self) -> Dict[str, Any]:
        return {
            "type": "unet",
            "num_coils": self.num_coils,
            "depth": self.depth,
            "base_filters": self.base_filters,
            "residual": self.residual,
            "norm_eps": self.norm_eps,
        }

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.num_coils:
            raise ContractError(f"expected [B, {self.num_coils}, H, W] coil images, got {tuple(x.shape)}")
        factor = 2 ** self.depth
        if x.shape[-2] % factor or x.shape[-1] % factor:
            raise ContractError(f"spatial dims {tuple(x.shape[-2:])} not divisible by {factor}")

        h = torch.cat([x.real, x.imag], dim=1).to(self.head.weight.dtype)
        skips = []
        out = h
        for s, encoder in enumerate(self.encoders):
            out = encoder(out)
            if s < self.depth - 1:
                skips.append(out)
                out = self.pool(out)
        for up, decoder in zip(self.ups, self.decoders):
            out = decoder(torch.cat([skips.pop(), up(out)], dim=1))
        out = self.head(out)
        if self.residual:
            out = out + h
        return torch.complex(out[:, :self.num_coils], out[:, self.num_coils:])


class PatchDiscriminator(nn.Module):
    """Stack of 1x1 convolutions; one realness score per pixel"""

    def __init__(self, widths: Sequence[int] = (64, 128, 1), leaky_slope: float = 0.2,
                 norm_eps: float = 1e-5):
        super().__init__()
        self.widths = tuple(widths)
        self.leaky_slope = leaky_slope
        self.norm_eps = norm_eps
        layers = []
        in_ch = 1
        for i, w in enumerate(self.widths):
            layers.append(nn.Conv2d(in_ch, w, kernel_size=1))
            if i < len(self.widths) - 1:
                layers.append(nn.InstanceNorm2d(w, eps=norm_eps))
                layers.append(nn.LeakyReLU(leaky_slope))
            in_ch = w
        self.net = nn.Sequential(*layers)

    def architecture(self) -> Dict[str, Any]:
        return {
            "type": "patch1x1",
            "widths": list(self.widths),
            "leaky_slope": self.leaky_slope,
            "norm_eps": self.norm_eps,
        }

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        if s.dim() != 4 or s.shape[1] != 1:
            raise ContractError(f"critic takes [B, 1, H, W] SSoS images, got {tuple(s.shape)}")
        return self.net(s.to(self.net[0].weight.dtype))


def weights_init_normal(m: nn.Module, std: float = 0.02):
    """N(0, std) convolution weights, zero biases"""
    if isinstance(m, nn.Conv2d):
        nn.init.normal_(m.weight.data, 0.0, std)
        if m.bias is not None:
            nn.init.constant_(m.bias.data, 0.0)
