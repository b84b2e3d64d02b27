"""
Training service: normalization, learning-rate schedule, unpaired sampling and the
alternating generator / critic loop
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from app.core.config import settings
from app.core.errors import DegenerateInputError, ParameterError, TrainingDivergenceError
from app.schemas import (
    AliasedSample,
    LossReport,
    MultiCoilImage,
    NetworkConfig,
    SamplingSchedule,
    TrainConfig,
    TrainingSummary,
)
from app.services.loss_service import LossService
from app.services.metrics_service import MetricsService
from app.services.network_service import NetworkService
from app.services.sampling_service import SamplingService

logger = logging.getLogger(__name__)


class UnpairedSampler:
    """Independent index streams for domain X and domain Y.

    X indices, Y indices and the fresh masks used by the X-side loss terms each come
    from their own seeded generator, so no draw ever pairs an X sample with a Y sample.
    """

    def __init__(self, num_x: int, y_vs: Sequence[int], vs_choices: Sequence[int], seed: int,
                 mask_pool: Dict[int, List[np.ndarray]]):
        if num_x == 0 or len(y_vs) == 0:
            raise ParameterError("training needs non-empty X and Y datasets")
        self.num_x = num_x
        self.y_by_vs = {}
        for idx, vs in enumerate(y_vs):
            if vs in vs_choices:
                self.y_by_vs.setdefault(int(vs), []).append(idx)
        if not self.y_by_vs:
            raise ParameterError(f"no domain-Y sample built with a VS in {list(vs_choices)}")
        self.y_choices = sorted(self.y_by_vs)
        self.mask_pool = {vs: masks for vs, masks in mask_pool.items() if masks}
        if not self.mask_pool:
            raise ParameterError("empty mask pool")
        self.mask_choices = sorted(self.mask_pool)
        self.x_rng = np.random.default_rng([seed, 11])
        self.y_rng = np.random.default_rng([seed, 13])
        self.mask_rng = np.random.default_rng([seed, 17])

    def draw_x(self, batch_size: int) -> List[int]:
        return [int(i) for i in self.x_rng.integers(self.num_x, size=batch_size)]

    def draw_y(self, batch_size: int) -> List[int]:
        """VS uniform over the available choices, then a sample built with that VS"""
        out = []
        for _ in range(batch_size):
            vs = self.y_choices[int(self.y_rng.integers(len(self.y_choices)))]
            pool = self.y_by_vs[vs]
            out.append(pool[int(self.y_rng.integers(len(pool)))])
        return out

    def draw_masks(self, batch_size: int) -> List[np.ndarray]:
        out = []
        for _ in range(batch_size):
            vs = self.mask_choices[int(self.mask_rng.integers(len(self.mask_choices)))]
            pool = self.mask_pool[vs]
            out.append(pool[int(self.mask_rng.integers(len(pool)))])
        return out

    def state_dict(self) -> Dict[str, dict]:
        return {name: getattr(self, name).bit_generator.state for name in ("x_rng", "y_rng", "mask_rng")}

    def load_state_dict(self, state: Dict[str, dict]):
        for name, value in state.items():
            getattr(self, name).bit_generator.state = value


class Trainer:
    """One generator, one critic, two Adam optimizers"""

    model_name = "proposed"

    def __init__(self, generator: nn.Module, critic: nn.Module, config: TrainConfig, device: str = "cpu"):
        self.generator = generator.to(device)
        self.critic = critic.to(device)
        self.config = config
        self.device = device
        self.opt_g = self.build_optimizer(self.generator_parameters(), config)
        self.opt_d = self.build_optimizer(self.critic_parameters(), config)
        self.gp_rng = torch.Generator().manual_seed(config.seed)
        self.g_updates = 0
        self.d_updates = 0

    @staticmethod
    def build_optimizer(params: Iterable[nn.Parameter], config: TrainConfig) -> torch.optim.Optimizer:
        """Adam with the run's learning rate and betas; generator and critic share the settings"""
        return torch.optim.Adam(params, lr=config.lr, betas=(config.adam_beta1, config.adam_beta2))

    def generator_parameters(self) -> Iterable[nn.Parameter]:
        return self.generator.parameters()

    def critic_parameters(self) -> Iterable[nn.Parameter]:
        return self.critic.parameters()

    def modules(self) -> Dict[str, nn.Module]:
        return {"generator": self.generator, "critic": self.critic}

    def optimizers(self) -> Dict[str, torch.optim.Optimizer]:
        return {"generator": self.opt_g, "critic": self.opt_d}

    def set_lr(self, lr: float):
        for opt in self.optimizers().values():
            for group in opt.param_groups:
                group["lr"] = lr

    def train_step(self, x_batch: torch.Tensor, y_batch: torch.Tensor, mask_x: torch.Tensor,
                   mask_y: torch.Tensor, step_index: int) -> LossReport:
        """One generator update; a critic update on every g_steps_per_d_step-th step"""
        self.generator.train()
        self.critic.train()
        weights = self.config.weights
        terms = LossService.evaluate(self.generator, self.critic, x_batch, y_batch, mask_x, mask_y,
                                     weights, self.config.d_image_norm, self.gp_rng)
        report = LossService.report(terms, weights)
        if not report.is_finite():
            raise TrainingDivergenceError(f"non-finite loss at step {step_index}", report.model_dump())

        self.opt_g.zero_grad(set_to_none=True)
        terms["total_g"].backward()
        self.opt_g.step()
        self.g_updates += 1

        if (step_index + 1) % self.config.g_steps_per_d_step == 0:
            self.opt_d.zero_grad(set_to_none=True)
            terms["wgan_d"].backward()
            self.opt_d.step()
            self.d_updates += 1
            logger.debug(f"Step {step_index}: critic update {self.d_updates}")
        return report


class TrainingService:
    """Unsupervised training of the single-generator model"""

    @staticmethod
    def normalize(y: MultiCoilImage) -> Tuple[MultiCoilImage, float]:
        """Divide every coil by the standard deviation of the SSoS image"""
        scale = float(np.std(MetricsService.ssos_array(y.data)))
        if scale == 0.0 or not np.isfinite(scale):
            raise DegenerateInputError(f"frame {y.frame_index}: SSoS standard deviation is {scale}")
        return y.model_copy(update={"data": y.data / scale}), scale

    @staticmethod
    def denormalize(y: MultiCoilImage, scale: float) -> MultiCoilImage:
        return y.model_copy(update={"data": y.data * scale})

    @staticmethod
    def lr_at(epoch: int, config: TrainConfig) -> float:
        """Constant for phase 1, then linear decay toward 0 at `config.epochs`"""
        if epoch < 0 or epoch >= config.epochs:
            raise ParameterError(f"epoch {epoch} outside [0, {config.epochs})")
        if epoch < config.phase1_epochs:
            return config.lr
        return config.lr * (config.epochs - epoch) / (config.epochs - config.phase1_epochs)

    @staticmethod
    def mask_pool(schedule: Optional[SamplingSchedule], vs_choices: Sequence[int],
                  dataset_y: Sequence[AliasedSample]) -> Dict[int, List[np.ndarray]]:
        """Masks available to the X-side loss terms, keyed by VS"""
        pool: Dict[int, List[np.ndarray]] = {}
        if schedule is not None:
            for vs in vs_choices:
                pool[int(vs)] = [SamplingService.mask_for_frame(schedule, t, vs).mask
                                 for t in range(schedule.num_frames)]
            return pool
        for sample in dataset_y:
            if sample.mask.vs in vs_choices:
                pool.setdefault(int(sample.mask.vs), []).append(sample.mask.mask)
        return pool

    @staticmethod
    def _stack(images: Sequence[np.ndarray], device: str) -> torch.Tensor:
        return torch.from_numpy(np.stack(images).astype(np.complex64)).to(device)

    @staticmethod
    def _stack_masks(masks: Sequence[np.ndarray], device: str) -> torch.Tensor:
        return torch.from_numpy(np.stack(masks).astype(bool)).to(device)

    @classmethod
    def train(cls, dataset_x: Sequence[MultiCoilImage], dataset_y: Sequence[AliasedSample], config: TrainConfig,
              network: NetworkConfig, run_dir: Path, schedule: Optional[SamplingSchedule] = None,
              resume_from: Optional[Path] = None, trainer: Optional[Trainer] = None,
              ) -> Tuple[nn.Module, TrainingSummary]:
        """Run the epoch / step schedule, writing a JSON-lines log and per-epoch checkpoints"""
        if len(dataset_x) == 0 or len(dataset_y) == 0:
            raise ParameterError("empty training dataset")
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        device = settings.device

        if trainer is None:
            generator, critic = NetworkService.from_config(network, config.init_std, config.seed)
            trainer = Trainer(generator, critic, config, device)

        xs = [cls.normalize(x)[0].data for x in dataset_x]
        ys = [cls.normalize(s.image)[0].data for s in dataset_y]
        y_masks = [s.mask.mask for s in dataset_y]
        sampler = UnpairedSampler(len(xs), [s.mask.vs for s in dataset_y], config.vs_choices, config.seed,
                                  cls.mask_pool(schedule, config.vs_choices, dataset_y))
        steps_per_epoch = config.steps_per_epoch or max(1, len(dataset_y) // config.batch_size)

        start_epoch = 0
        if resume_from is not None:
            payload = NetworkService.load_checkpoint(resume_from)
            for name, module in trainer.modules().items():
                module.load_state_dict(payload["state"][name])
            for name, opt in trainer.optimizers().items():
                opt.load_state_dict(payload["optimizers"][name])
            sampler.load_state_dict(payload["extra"]["sampler"])
            trainer.gp_rng.set_state(payload["extra"]["gp_rng"])
            start_epoch = payload["epoch"] + 1
            logger.info(f"Resuming from {resume_from} at epoch {start_epoch}")
            if start_epoch >= config.epochs:
                raise ParameterError(f"checkpoint already covers all {config.epochs} epochs")

        log_path = run_dir / "train_log.jsonl"
        summary = TrainingSummary(run_dir=str(run_dir), log_path=str(log_path), start_epoch=start_epoch)
        with open(log_path, "a" if resume_from is not None else "w") as log:
            for epoch in range(start_epoch, config.epochs):
                lr = cls.lr_at(epoch, config)
                trainer.set_lr(lr)
                epoch_losses = []
                for s in range(steps_per_epoch):
                    step = epoch * steps_per_epoch + s
                    x_idx = sampler.draw_x(config.batch_size)
                    y_idx = sampler.draw_y(config.batch_size)
                    x_batch = cls._stack([xs[i] for i in x_idx], device)
                    y_batch = cls._stack([ys[i] for i in y_idx], device)
                    mask_x = cls._stack_masks(sampler.draw_masks(config.batch_size), device)
                    mask_y = cls._stack_masks([y_masks[i] for i in y_idx], device)
                    report = trainer.train_step(x_batch, y_batch, mask_x, mask_y, step)
                    epoch_losses.append(report.total_g)
                    log.write(json.dumps({"step": step, "epoch": epoch, "lr": lr, **report.model_dump()}) + "\n")
                    summary.steps += 1
                log.flush()
                summary.epoch_total_g.append(float(np.median(epoch_losses)))
                summary.epochs_completed = epoch + 1
                logger.info(f"Epoch {epoch + 1}/{config.epochs}: lr={lr:.6g} "
                            f"median total_g={summary.epoch_total_g[-1]:.4f}")

                if (epoch + 1) % config.checkpoint_every == 0 or epoch == config.epochs - 1:
                    path = NetworkService.save_checkpoint(
                        run_dir / f"epoch_{epoch:03d}.pt",
                        trainer.modules(),
                        trainer.optimizers(),
                        epoch=epoch,
                        extra={"sampler": sampler.state_dict(), "gp_rng": trainer.gp_rng.get_state()},
                        meta={"train_config": config.model_dump(), "vs_choices": list(config.vs_choices),
                              "model": trainer.model_name},
                    )
                    summary.checkpoints.append(str(path))

        summary.final_lr = cls.lr_at(config.epochs - 1, config)
        return trainer.generator, summary
