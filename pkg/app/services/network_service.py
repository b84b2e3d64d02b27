"""
Network service: building, applying and checkpointing the generator and critic
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import torch
from torch import nn

from app.core.errors import ContractError, ParameterError
from app.models.networks import PatchDiscriminator, UNetGenerator, weights_init_normal
from app.schemas import MultiCoilImage, NetworkConfig, Role

logger = logging.getLogger(__name__)


class NetworkService:
    """Generator / critic construction and checkpoints"""

    @staticmethod
    def build_generator(num_coils: int, depth: int = 3, base_filters: int = 16, residual: bool = False,
                        norm_eps: float = 1e-5, init_std: float = 0.02,
                        seed: Optional[int] = None) -> UNetGenerator:
        if num_coils < 1 or depth < 1 or base_filters < 1:
            raise ParameterError("num_coils, depth and base_filters must be >= 1")
        if seed is not None:
            torch.manual_seed(seed)
        generator = UNetGenerator(num_coils, depth, base_filters, residual, norm_eps)
        generator.apply(lambda m: weights_init_normal(m, init_std))
        return generator

    @staticmethod
    def build_discriminator(widths: Sequence[int] = (64, 128, 1), leaky_slope: float = 0.2,
                            norm_eps: float = 1e-5, init_std: float = 0.02,
                            seed: Optional[int] = None) -> PatchDiscriminator:
        if not widths or widths[-1] != 1:
            raise ParameterError(f"critic widths must end with a single score channel, got {widths}")
        if seed is not None:
            torch.manual_seed(seed)
        critic = PatchDiscriminator(widths, leaky_slope, norm_eps)
        critic.apply(lambda m: weights_init_normal(m, init_std))
        return critic

    @classmethod
    def from_config(cls, config: NetworkConfig, init_std: float = 0.02, seed: Optional[int] = None):
        """(generator, critic) pair for a NetworkConfig"""
        generator = cls.build_generator(config.num_coils, config.depth, config.base_filters,
                                        config.residual, config.norm_eps, init_std, seed)
        critic = cls.build_discriminator(config.disc_widths, config.leaky_slope, config.norm_eps, init_std)
        return generator, critic

    @staticmethod
    def generator_apply(generator: nn.Module, y: MultiCoilImage) -> MultiCoilImage:
        """Inference on one normalized frame"""
        num_coils = getattr(generator, "num_coils", y.num_coils)
        if y.num_coils != num_coils:
            raise ContractError(f"generator expects {num_coils} coils, got {y.num_coils}")
        param = next(generator.parameters(), None)
        device = param.device if param is not None else torch.device("cpu")
        x = torch.from_numpy(np.ascontiguousarray(y.data)).to(torch.complex64).to(device)
        with torch.no_grad():
            out = generator(x[None])[0]
        return MultiCoilImage(data=out.cpu().numpy(), frame_index=y.frame_index, role=Role.reconstruction)

    @staticmethod
    def count_parameters(module: nn.Module) -> int:
        return sum(p.numel() for p in module.parameters())

    @staticmethod
    def save_checkpoint(path: Path, modules: Dict[str, nn.Module], optimizers: Optional[Dict[str, Any]] = None,
                        epoch: int = 0, extra: Optional[Dict[str, Any]] = None,
                        meta: Optional[Dict[str, Any]] = None) -> Path:
        """State dicts in a .pt file plus a JSON descriptor (architecture, epoch, meta) alongside"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        architecture = {name: m.architecture() for name, m in modules.items() if hasattr(m, "architecture")}
        payload = {
            "epoch": epoch,
            "architecture": architecture,
            "state": {name: m.state_dict() for name, m in modules.items()},
            "optimizers": {name: o.state_dict() for name, o in (optimizers or {}).items()},
            "extra": extra or {},
            "meta": meta or {},
        }
        torch.save(payload, path)
        path.with_suffix(".json").write_text(json.dumps({"epoch": epoch, "architecture": architecture,
                                                         "meta": meta or {}}, indent=2))
        logger.info(f"Checkpoint saved: {path} (epoch {epoch})")
        return path

    @staticmethod
    def load_checkpoint(path: Path) -> Dict[str, Any]:
        path = Path(path)
        if not path.exists():
            raise ParameterError(f"checkpoint not found: {path}")
        return torch.load(path, map_location="cpu", weights_only=False)

    @classmethod
    def modules_from_checkpoint(cls, payload: Dict[str, Any]) -> Dict[str, nn.Module]:
        """Rebuild every module described in a checkpoint and load its parameters"""
        modules = {}
        for name, arch in payload["architecture"].items():
            if arch["type"] == "unet":
                module = UNetGenerator(arch["num_coils"], arch["depth"], arch["base_filters"],
                                       arch["residual"], arch["norm_eps"])
            elif arch["type"] == "patch1x1":
                module = PatchDiscriminator(arch["widths"], arch["leaky_slope"], arch["norm_eps"])
            else:
                raise ParameterError(f"unknown architecture type {arch['type']!r}")
            module.load_state_dict(payload["state"][name])
            modules[name] = module
        return modules
