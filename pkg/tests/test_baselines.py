"""
Conventional cycleGAN and ablation tests
"""

import pytest
import torch
from torch import nn

from app.schemas import AblationConfig, AblationVariant, ExperimentConfig, NetworkConfig, TrainConfig
from app.services import (
    BaselineService,
    ConventionalCycleGAN,
    ConventionalTrainer,
    LossService,
    NetworkService,
    Trainer,
)

NETWORK = NetworkConfig(num_coils=2, depth=2, base_filters=4, disc_widths=(8, 1))


def batch(seed: int, shape=(1, 2, 8, 8)) -> torch.Tensor:
    g = torch.Generator().manual_seed(seed)
    return torch.complex(torch.randn(shape, generator=g), torch.randn(shape, generator=g))


def test_conventional_parameter_count_doubles():
    """Test two generator / critic pairs hold twice the parameters"""
    model = BaselineService.build_conventional_cyclegan(NETWORK, seed=0)
    generator, critic = NetworkService.from_config(NETWORK, seed=0)
    single = NetworkService.count_parameters(generator) + NetworkService.count_parameters(critic)
    assert model.parameter_count() == 2 * single


def test_identity_generators_zero_cycle():
    """Test both cycle residuals vanish for identity maps on a shared domain"""
    critic = NetworkService.build_discriminator((8, 1))
    model = ConventionalCycleGAN(nn.Identity(), nn.Identity(), critic, NetworkService.build_discriminator((8, 1)))
    x = batch(0)
    forward = LossService.d_image(x, model.backward_generator(model.generator(x)))
    backward = LossService.d_image(x, model.generator(model.backward_generator(x)))
    assert forward.item() == 0.0
    assert backward.item() == 0.0


def test_conventional_step_updates_all_networks():
    """Test one generator + critic step changes all four networks"""
    model = BaselineService.build_conventional_cyclegan(NETWORK, seed=0)
    trainer = ConventionalTrainer(model, TrainConfig(g_steps_per_d_step=1))
    before = {name: [p.clone() for p in m.parameters()] for name, m in model.modules().items()}
    masks = torch.ones(1, 8, 8, dtype=torch.bool)
    report = trainer.train_step(batch(0), batch(1), masks, masks, 0)
    assert report.freq == 0.0
    for name, module in model.modules().items():
        changed = any(not torch.equal(a, b) for a, b in zip(before[name], module.parameters()))
        assert changed, name


def test_conventional_trainer_shares_optimizer_setup():
    """Test both trainers build optimizers and the penalty stream the same way"""
    config = TrainConfig(lr=2e-4, adam_beta1=0.4, seed=7)
    model = BaselineService.build_conventional_cyclegan(NETWORK, seed=0)
    conventional = ConventionalTrainer(model, config)
    generator, critic = NetworkService.from_config(NETWORK, seed=0)
    proposed = Trainer(generator, critic, config)

    for name in ("generator", "critic"):
        a = conventional.optimizers()[name].param_groups[0]
        b = proposed.optimizers()[name].param_groups[0]
        assert (a["lr"], a["betas"]) == (b["lr"], b["betas"]) == (2e-4, (0.4, 0.999))
    g_params = {id(p) for p in conventional.opt_g.param_groups[0]["params"]}
    d_params = {id(p) for p in conventional.opt_d.param_groups[0]["params"]}
    assert g_params == {id(p) for name in ("generator", "backward_generator")
                        for p in model.modules()[name].parameters()}
    assert d_params == {id(p) for name in ("critic", "critic_y") for p in model.modules()[name].parameters()}
    assert torch.equal(conventional.gp_rng.get_state(), proposed.gp_rng.get_state())
    assert conventional.g_updates == conventional.d_updates == 0


def test_proposed_has_no_backward_network():
    """Test the single-generator trainer carries one generator and one critic only"""
    generator, critic = NetworkService.from_config(NETWORK, seed=0)
    trainer = Trainer(generator, critic, TrainConfig())
    assert set(trainer.modules()) == {"generator", "critic"}
    assert not hasattr(trainer, "backward_generator")


@pytest.mark.parametrize("variant,alpha,beta", [
    (AblationVariant.proposed, 1.0, 2.0),
    (AblationVariant.no_freq, 1.0, 0.0),
    (AblationVariant.no_identity, 0.0, 2.0),
    (AblationVariant.no_freq_no_identity, 0.0, 0.0),
])
def test_variant_config_zeroes_only_ablated_weights(variant, alpha, beta):
    """Test ablated configs differ only in the intended weights"""
    config = ExperimentConfig()
    ablated = BaselineService.variant_config(variant, config)
    assert ablated.weights.alpha == alpha
    assert ablated.weights.beta == beta
    assert ablated.weights.gamma == config.train.weights.gamma
    assert ablated.weights.gp_coeff == config.train.weights.gp_coeff
    assert ablated.model_dump(exclude={"weights"}) == config.train.model_dump(exclude={"weights"})


def test_ablation_config_flags_checked():
    """Test flags inconsistent with the variant are rejected"""
    with pytest.raises(ValueError):
        AblationConfig(variant=AblationVariant.no_freq, use_freq=True, use_identity=True)
    assert AblationConfig.for_variant(AblationVariant.conventional_cyclegan).use_freq is False


@pytest.mark.slow
def test_run_ablation_reports_metrics(tiny_dataset, tiny_config, tmp_path):
    """Test one ablation run trains, scores held-out frames and reports medians"""
    directory, manifest = tiny_dataset
    config = tiny_config.model_copy(update={"train": tiny_config.train.model_copy(update={"epochs": 1,
                                                                                         "phase1_epochs": 1})})
    result = BaselineService.run_ablation(AblationVariant.no_freq, config, directory, tmp_path)
    assert result.weights.beta == 0.0
    assert set(result.median_psnr_db) == {2, 3, 5}
    assert result.records
    assert all(r.method == "no_freq" for r in result.records)
    assert result.checkpoint.endswith(".pt")
