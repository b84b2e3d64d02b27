"""
Initialize services module
"""

from app.services.phantom_service import PhantomService
from app.services.sampling_service import SamplingService
from app.services.grappa_service import GrappaService
from app.services.metrics_service import MetricsService
from app.services.network_service import NetworkService
from app.services.loss_service import LossService
from app.services.training_service import Trainer, TrainingService, UnpairedSampler
from app.services.dataset_service import DatasetService
from app.services.inference_service import InferenceService
from app.services.baseline_service import BaselineService, ConventionalCycleGAN, ConventionalTrainer
from app.services.plot_service import PlotService
from app.services.experiment_service import ExperimentService

__all__ = [
    "PhantomService",
    "SamplingService",
    "GrappaService",
    "MetricsService",
    "NetworkService",
    "LossService",
    "Trainer",
    "TrainingService",
    "UnpairedSampler",
    "DatasetService",
    "InferenceService",
    "BaselineService",
    "ConventionalCycleGAN",
    "ConventionalTrainer",
    "PlotService",
    "ExperimentService",
]
