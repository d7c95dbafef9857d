"""Spectral neural networks for non-linear matrix sensing."""

from .activations import ActivationFn, get_activation
from .descent import Depth3Model, GradientMode, LinearModel, TrainConfig, train
from .diagnostics import fit_exponential, kkt_check, psnr
from .flow import FlowContext, Scheme, integrate
from .measurements import gen_commuting_ensemble, gen_gaussian_ensemble, gen_ground_truth, measure
from .model import SnnParams, near_zero_init, snn_forward, spectral_init

__version__ = "0.1.0"

__all__ = [
    "ActivationFn",
    "Depth3Model",
    "FlowContext",
    "GradientMode",
    "LinearModel",
    "Scheme",
    "SnnParams",
    "TrainConfig",
    "fit_exponential",
    "gen_commuting_ensemble",
    "gen_gaussian_ensemble",
    "gen_ground_truth",
    "get_activation",
    "integrate",
    "kkt_check",
    "measure",
    "near_zero_init",
    "psnr",
    "snn_forward",
    "spectral_init",
    "train",
]
