"""Loss assembly, loss balancing, optimization and the hybrid training loop."""

from dualperm.hybrid.balancing import anneal_coupling_weights, project_permeability, weight_scaling
from dualperm.hybrid.losses import CouplingTargets, coupling_loss, coupling_terms, pinn_losses
from dualperm.hybrid.optimizer import AdamState, adam_step, learning_rate
from dualperm.hybrid.trace import TraceRecord, TrainingTrace
from dualperm.hybrid.trainer import (
    TrainingResult,
    darcy_from_network,
    hybrid_train,
    pinn_train,
    reference_errors,
)

__all__ = [
    "anneal_coupling_weights",
    "project_permeability",
    "weight_scaling",
    "CouplingTargets",
    "coupling_loss",
    "coupling_terms",
    "pinn_losses",
    "AdamState",
    "adam_step",
    "learning_rate",
    "TraceRecord",
    "TrainingTrace",
    "TrainingResult",
    "darcy_from_network",
    "hybrid_train",
    "pinn_train",
    "reference_errors",
]
