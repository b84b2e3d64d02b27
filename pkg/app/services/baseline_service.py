"""
Baseline service: conventional two-generator cycleGAN and the loss ablations
"""

import itertools
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
import torch
from torch import nn

from app.core.config import settings
from app.core.errors import TrainingDivergenceError
from app.schemas import (
    AblationConfig,
    AblationResult,
    AblationVariant,
    ExperimentConfig,
    LossReport,
    NetworkConfig,
    TrainConfig,
)
from app.services.dataset_service import DatasetService
from app.services.inference_service import InferenceService
from app.services.loss_service import LossService
from app.services.network_service import NetworkService
from app.services.training_service import Trainer, TrainingService

logger = logging.getLogger(__name__)


class ConventionalCycleGAN:
    """Forward generator G: Y -> X, backward generator H: X -> Y, one critic per domain"""

    def __init__(self, generator: nn.Module, backward_generator: nn.Module, critic_x: nn.Module,
                 critic_y: nn.Module):
        self.generator = generator
        self.backward_generator = backward_generator
        self.critic_x = critic_x
        self.critic_y = critic_y

    def modules(self) -> Dict[str, nn.Module]:
        return {
            "generator": self.generator,
            "backward_generator": self.backward_generator,
            "critic": self.critic_x,
            "critic_y": self.critic_y,
        }

    def parameter_count(self) -> int:
        return sum(NetworkService.count_parameters(m) for m in self.modules().values())


class ConventionalTrainer(Trainer):
    """Both generators share one Adam optimizer, both critics the other"""

    model_name = AblationVariant.conventional_cyclegan.value

    def __init__(self, model: ConventionalCycleGAN, config: TrainConfig, device: str = "cpu"):
        self.model = model
        for module in model.modules().values():
            module.to(device)
        super().__init__(model.generator, model.critic_x, config, device)

    def generator_parameters(self) -> Iterable[nn.Parameter]:
        return itertools.chain(self.model.generator.parameters(), self.model.backward_generator.parameters())

    def critic_parameters(self) -> Iterable[nn.Parameter]:
        return itertools.chain(self.model.critic_x.parameters(), self.model.critic_y.parameters())

    def modules(self) -> Dict[str, nn.Module]:
        return self.model.modules()

    def train_step(self, x_batch: torch.Tensor, y_batch: torch.Tensor, mask_x: torch.Tensor,
                   mask_y: torch.Tensor, step_index: int) -> LossReport:
        """Masks are accepted for interface parity; the learned backward map ignores them"""
        for module in self.modules().values():
            module.train()
        G, H = self.model.generator, self.model.backward_generator
        weights = self.config.weights
        norm = self.config.d_image_norm

        g_y = G(y_batch)
        h_x = H(x_batch)
        cycle = (LossService.d_image(y_batch, H(g_y), norm).mean()
                 + LossService.d_image(x_batch, G(h_x), norm).mean())
        identity = (LossService.d_image(x_batch, G(x_batch), norm).mean()
                    + LossService.d_image(y_batch, H(y_batch), norm).mean())
        wgan_g_x, wgan_d_x = LossService.wgan_losses(self.model.critic_x, G, x_batch, y_batch,
                                                     weights.gp_coeff, self.gp_rng, fake=g_y)
        wgan_g_y, wgan_d_y = LossService.wgan_losses(self.model.critic_y, H, y_batch, x_batch,
                                                     weights.gp_coeff, self.gp_rng, fake=h_x)
        wgan_g = wgan_g_x + wgan_g_y
        wgan_d = wgan_d_x + wgan_d_y
        total_g = weights.gamma * cycle + wgan_g + weights.alpha * identity

        report = LossReport.combine(weights, cycle=float(cycle.detach()), wgan_g=float(wgan_g.detach()),
                                    wgan_d=float(wgan_d.detach()), identity=float(identity.detach()), freq=0.0)
        if not report.is_finite():
            raise TrainingDivergenceError(f"non-finite loss at step {step_index}", report.model_dump())

        self.opt_g.zero_grad(set_to_none=True)
        total_g.backward()
        self.opt_g.step()
        self.g_updates += 1

        if (step_index + 1) % self.config.g_steps_per_d_step == 0:
            self.opt_d.zero_grad(set_to_none=True)
            wgan_d.backward()
            self.opt_d.step()
            self.d_updates += 1
        return report


class BaselineService:
    """Comparison runs under a shared training budget"""

    @staticmethod
    def build_conventional_cyclegan(network: NetworkConfig, init_std: float = 0.02,
                                    seed: Optional[int] = None) -> ConventionalCycleGAN:
        """Backward generator and second critic reuse the forward topology"""
        generator, critic_x = NetworkService.from_config(network, init_std, seed)
        backward = NetworkService.build_generator(network.num_coils, network.depth, network.base_filters,
                                                  network.residual, network.norm_eps, init_std)
        critic_y = NetworkService.build_discriminator(network.disc_widths, network.leaky_slope,
                                                      network.norm_eps, init_std)
        return ConventionalCycleGAN(generator, backward, critic_x, critic_y)

    @staticmethod
    def variant_config(variant: AblationVariant, config: ExperimentConfig) -> TrainConfig:
        """Shared TrainConfig with only the ablated weights changed"""
        ablation = AblationConfig.for_variant(variant)
        return config.train.model_copy(update={"weights": ablation.apply(config.train.weights)})

    @classmethod
    def run_ablation(cls, variant: AblationVariant, config: ExperimentConfig, dataset_dir: Path,
                     out_dir: Path) -> AblationResult:
        """Train one variant on the dataset, then score it on the held-out sequences"""
        variant = AblationVariant(variant)
        train_config = cls.variant_config(variant, config)
        manifest = DatasetService.verify(dataset_dir)
        schedule = DatasetService.schedule_from_manifest(manifest)
        dataset_x, dataset_y = DatasetService.load_training_data(dataset_dir, train_config.vs_choices)

        if variant == AblationVariant.conventional_cyclegan:
            model = cls.build_conventional_cyclegan(config.network, train_config.init_std, train_config.seed)
            trainer = ConventionalTrainer(model, train_config, settings.device)
        else:
            generator, critic = NetworkService.from_config(config.network, train_config.init_std, train_config.seed)
            trainer = Trainer(generator, critic, train_config, settings.device)
        logger.info(f"Ablation {variant.value}: weights {train_config.weights.model_dump()}")
        generator, summary = TrainingService.train(dataset_x, dataset_y, train_config, config.network,
                                                   Path(out_dir) / variant.value, schedule, trainer=trainer)

        held_out = DatasetService.split(manifest, "held_out") or [s["index"] for s in manifest.sequences]
        records = InferenceService.evaluate_generator(generator, dataset_dir, manifest, held_out,
                                                      train_config.vs_choices, config.evaluation, variant.value)
        count = sum(NetworkService.count_parameters(m) for m in trainer.modules().values())
        result = AblationResult(variant=variant, weights=train_config.weights,
                                checkpoint=summary.checkpoints[-1] if summary.checkpoints else "",
                                parameter_count=count, records=records)
        for vs in train_config.vs_choices:
            rows = [r for r in records if r.vs == vs]
            result.median_psnr_db[vs] = float(np.median([r.psnr_db for r in rows]))
            result.median_ssim[vs] = float(np.median([r.ssim for r in rows]))
        return result
