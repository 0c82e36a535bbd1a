"""Fourier-feature network ansatz with exact spatial and parameter derivatives."""

from dualperm.neural.ansatz import EvalBundle, FourierFeatureNet, PinnAnsatz, forward, init_params
from dualperm.neural.checkpoint import load_checkpoint, save_checkpoint
from dualperm.neural.gradients import GradientSet, gradient_set, param_gradients

__all__ = [
    "EvalBundle",
    "FourierFeatureNet",
    "PinnAnsatz",
    "forward",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "GradientSet",
    "gradient_set",
    "param_gradients",
]
