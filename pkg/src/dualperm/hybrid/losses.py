"""
Loss Assembly.

PDE losses of the microscale network and the coarse-scale regularizer that
ties it to the Stokes-Brinkman field outside the tow:

    J_r   = mean over residual points of |grad p - mu lap u - f|^2
    J_div = mean over residual points of (div u)^2
    J_b   = mean over fiber-boundary points of |u|^2
    J_u   = mean over velocity coupling points of |u - u_SB|^2
    J_p   = mean over pressure coupling points of (p - p_SB)^2

The coupling regularizer is R = lambda_u J_u + lambda_p J_p.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from dualperm.geometry.sampling import PointSets
from dualperm.neural.ansatz import DTYPE, PinnAnsatz
from dualperm.solvers.grid import FlowState, sample_state


def as_tensor(points: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.asarray(points, dtype=float), dtype=DTYPE)


@dataclass
class CouplingTargets:
    """Coarse-field values interpolated to the coupling points."""

    velocity_points: torch.Tensor
    velocity_values: torch.Tensor
    pressure_points: torch.Tensor
    pressure_values: torch.Tensor

    @classmethod
    def from_state(
        cls, state: FlowState, velocity_points: np.ndarray, pressure_points: np.ndarray
    ) -> "CouplingTargets":
        """Bilinear samples of a coarse FlowState."""
        at_u = sample_state(state, velocity_points)
        at_p = sample_state(state, pressure_points)
        return cls(
            velocity_points=as_tensor(velocity_points),
            velocity_values=as_tensor(np.stack([at_u["u1"], at_u["u2"]], axis=1)),
            pressure_points=as_tensor(pressure_points),
            pressure_values=as_tensor(at_p["p"]),
        )


def pinn_losses(
    params: PinnAnsatz,
    residual_points: torch.Tensor,
    boundary_points: torch.Tensor,
    mu: float,
    body_force: Union[Sequence[float], Callable[[torch.Tensor], torch.Tensor]],
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Momentum residual, divergence and no-slip losses.

    Args:
        params: Network ansatz.
        residual_points: Interior and edge points (N_r, 2).
        boundary_points: Points on the fiber circles (N_b, 2).
        mu: Fluid viscosity.
        body_force: Constant body force f, or a callable returning f at the
            residual points (m, 2).

    Returns:
        (J_r, J_div, J_b), each a non-negative scalar tensor.
    """
    bundle = params.evaluate(residual_points)
    if callable(body_force):
        f = body_force(residual_points)
    else:
        f = torch.as_tensor(body_force, dtype=DTYPE)
    momentum = bundle.grad[:, 2, :] - mu * bundle.laplacian[:, 0:2] - f
    j_r = (momentum * momentum).sum(dim=1).mean()
    div = bundle.grad[:, 0, 0] + bundle.grad[:, 1, 1]
    j_div = (div * div).mean()

    if boundary_points.shape[0] == 0:
        j_b = torch.zeros((), dtype=DTYPE)
    else:
        u_b = params.evaluate(boundary_points, derivatives=False).value[:, 0:2]
        j_b = (u_b * u_b).sum(dim=1).mean()
    return j_r, j_div, j_b


def coupling_terms(params: PinnAnsatz, targets: CouplingTargets) -> Tuple[torch.Tensor, torch.Tensor]:
    """Unweighted velocity and pressure mismatch (J_u, J_p)."""
    u = params.evaluate(targets.velocity_points, derivatives=False).value[:, 0:2]
    du = u - targets.velocity_values
    p = params.evaluate(targets.pressure_points, derivatives=False).value[:, 2]
    dp = p - targets.pressure_values
    return (du * du).sum(dim=1).mean(), (dp * dp).mean()


def coupling_loss(
    params: PinnAnsatz, targets: CouplingTargets, weights: Mapping[str, float]
) -> torch.Tensor:
    """R = lambda_u J_u + lambda_p J_p."""
    j_u, j_p = coupling_terms(params, targets)
    return weights["u"] * j_u + weights["p"] * j_p


def loss_terms(
    params: PinnAnsatz,
    points: PointSets,
    mu: float,
    body_force: Sequence[float],
    targets: Optional[CouplingTargets] = None,
    tensors: Optional[Dict[str, torch.Tensor]] = None,
) -> Dict[str, torch.Tensor]:
    """All unweighted loss terms keyed r, div, b (and u, p when coupled)."""
    if tensors is None:
        tensors = point_tensors(points)
    j_r, j_div, j_b = pinn_losses(params, tensors["residual"], tensors["boundary"], mu, body_force)
    terms = {"r": j_r, "div": j_div, "b": j_b}
    if targets is not None:
        terms["u"], terms["p"] = coupling_terms(params, targets)
    return terms


def point_tensors(points: PointSets) -> Dict[str, torch.Tensor]:
    return {
        "residual": as_tensor(points.residual_points),
        "boundary": as_tensor(points.fiber_boundary),
    }


def weighted_total(terms: Mapping[str, torch.Tensor], weights: Mapping[str, float]) -> torch.Tensor:
    """J_lambda = sum of weighted terms present in both mappings."""
    return sum(weights[name] * value for name, value in terms.items() if name in weights)
