"""
Darcy Inversion.

Turns averaged velocities and pressure drops into permeabilities:

    darcy_scalar:  K = U / (mu PD)
    darcy_tensor:  K = mu U PD^-1, symmetrized

and wraps the reference micro solve into a PermeabilityEstimate whose band is
the min/max of K11 over a sweep of the averaging-window inset l_p.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from dualperm.config.constants import AVERAGING_BASE_BOX, LP_RANGE, LP_SAMPLES
from dualperm.config.solver_schemas import SolverConfig
from dualperm.geometry.cells import MicroCell, check_spd
from dualperm.solvers.grid import FlowState, Grid
from dualperm.solvers.stokes import solve_stokes_micro
from dualperm.upscaling.averaging import (
    AveragingWindow,
    fluid_mask,
    pressure_drop,
    volume_average_velocity,
)
from dualperm.utils.exceptions import SingularPressureDropError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

# Condition number above which PD is treated as singular
MAX_PD_CONDITION = 1e12


@dataclass(frozen=True)
class DarcyMatrices:
    """Averages of d solves; column k holds solve k.

    Attributes:
        U: U[j, k] = mean u_j of solve k.
        PD: PD[j, k] = pressure drop along x_j of solve k.
    """

    U: np.ndarray
    PD: np.ndarray


@dataclass(frozen=True)
class PermeabilityEstimate:
    """Micropermeability tensor with its averaging-window band."""

    tensor: np.ndarray
    band_low: float
    band_high: float
    window: AveragingWindow
    l_p_sweep: List[Tuple[float, float]] = field(default_factory=list)
    asymmetry: float = 0.0

    def __post_init__(self):
        check_spd(self.tensor, label="permeability estimate")
        k11 = float(self.tensor[0, 0])
        if not (self.band_low <= k11 <= self.band_high):
            raise ValueError(f"K11={k11} lies outside its band [{self.band_low}, {self.band_high}]")

    @property
    def k11(self) -> float:
        return float(self.tensor[0, 0])

    def to_record(self) -> dict:
        t = self.tensor
        return {
            "k11": float(t[0, 0]),
            "k12": float(t[0, 1]),
            "k21": float(t[1, 0]),
            "k22": float(t[1, 1]),
            "band_low": self.band_low,
            "band_high": self.band_high,
            "l_p_sweep": [[lp, k] for lp, k in self.l_p_sweep],
        }


def darcy_scalar(U: float, PD: float, mu: float) -> float:
    """K = U / (mu PD).

    Raises:
        SingularPressureDropError: If PD is zero.
    """
    if PD == 0:
        raise SingularPressureDropError("Pressure drop is zero")
    return float(U) / (float(mu) * float(PD))


def tensor_asymmetry(K: np.ndarray) -> float:
    """||K - K^T|| / ||K|| in the Frobenius norm."""
    norm = np.linalg.norm(K)
    return float(np.linalg.norm(K - K.T) / norm) if norm > 0 else 0.0


def darcy_tensor(
    U: np.ndarray, PD: np.ndarray, mu: float, return_asymmetry: bool = False
):
    """K = mu U PD^-1, returned as (K + K^T) / 2.

    With return_asymmetry the relative asymmetry of the raw K is returned too.

    Raises:
        SingularPressureDropError: If cond(PD) exceeds 1e12.
    """
    U = np.asarray(U, dtype=float)
    PD = np.asarray(PD, dtype=float)
    if np.linalg.cond(PD) > MAX_PD_CONDITION:
        raise SingularPressureDropError(f"Pressure-drop matrix is near-singular: {PD.tolist()}")
    K = mu * U @ np.linalg.inv(PD)
    asymmetry = tensor_asymmetry(K)
    if asymmetry > 1e-8:
        logger.debug("Symmetrized Darcy tensor", extra={"extra_fields": {"asymmetry": asymmetry}})
    symmetric = 0.5 * (K + K.T)
    if return_asymmetry:
        return symmetric, asymmetry
    return symmetric


def _along(vector: np.ndarray, direction: np.ndarray) -> float:
    return float(vector @ direction)


def rotated_force(config: SolverConfig) -> SolverConfig:
    """Same config with the body force turned by 90 degrees."""
    f1, f2 = config.body_force
    return config.model_copy(update={"body_force": (-f2, f1)})


def permeability_with_band(
    cell: MicroCell,
    grid: Grid,
    config: SolverConfig,
    l_p_range: Sequence[float] = LP_RANGE,
    n_samples: int = LP_SAMPLES,
    two_directions: bool = False,
    state: Optional[FlowState] = None,
    base_box: Sequence[float] = AVERAGING_BASE_BOX,
    cancellation_check: Optional[Callable[[], bool]] = None,
) -> PermeabilityEstimate:
    """Micropermeability of a fiber cell with its l_p uncertainty band.

    K11 at l_p = l_p_range[0] is the point value; the band is min/max of K11
    over n_samples equispaced insets. The single-direction path returns
    K11 * I. With two_directions a second solve with the force rotated by 90
    degrees gives the full tensor through darcy_tensor.

    Args:
        cell: The MicroCell.
        grid: MAC grid for the solve.
        config: Solver parameters; body_force sets the first direction.
        l_p_range: (l_p_min, l_p_max).
        n_samples: Number of sweep samples.
        two_directions: Solve along both axes and return the full tensor.
        state: A converged solve to reuse instead of solving.
        base_box: Window before the inset.
        cancellation_check: Polled between solver cycles.

    Returns:
        The PermeabilityEstimate.
    """
    if state is None:
        state = solve_stokes_micro(cell, grid, config, cancellation_check=cancellation_check)

    f = np.asarray(config.body_force, dtype=float)
    direction = f / np.linalg.norm(f)
    mask = fluid_mask(cell, state)

    sweep: List[Tuple[float, float]] = []
    for l_p in np.linspace(l_p_range[0], l_p_range[1], n_samples):
        window = AveragingWindow.from_bounds(base_box, float(l_p))
        U = volume_average_velocity(state, window, mask)
        PD = pressure_drop(state, window, f, mask)
        sweep.append((float(l_p), darcy_scalar(_along(U, direction), _along(PD, direction), config.mu)))

    values = [k for _, k in sweep]
    k11 = values[0]
    window = AveragingWindow.from_bounds(base_box, float(l_p_range[0]))

    asymmetry = 0.0
    if two_directions:
        config_2 = rotated_force(config)
        state_2 = solve_stokes_micro(cell, grid, config_2, cancellation_check=cancellation_check)
        columns_u, columns_pd = [], []
        for s, cfg in ((state, config), (state_2, config_2)):
            columns_u.append(volume_average_velocity(s, window, mask))
            columns_pd.append(pressure_drop(s, window, cfg.body_force, mask))
        matrices = DarcyMatrices(U=np.stack(columns_u, axis=1), PD=np.stack(columns_pd, axis=1))
        tensor, asymmetry = darcy_tensor(
            matrices.U, matrices.PD, config.mu, return_asymmetry=True
        )
        values.append(float(tensor[0, 0]))
    else:
        tensor = k11 * np.eye(2)

    estimate = PermeabilityEstimate(
        tensor=tensor,
        band_low=min(values),
        band_high=max(values),
        window=window,
        l_p_sweep=sweep,
        asymmetry=asymmetry,
    )
    logger.info(
        "Micropermeability estimated",
        extra={
            "extra_fields": {
                "k11": estimate.k11,
                "band_low": estimate.band_low,
                "band_high": estimate.band_high,
                "two_directions": two_directions,
            }
        },
    )
    return estimate


def meso_permeability(state: FlowState, config: SolverConfig) -> float:
    """Mesoscale permeability K[Z] along the force direction.

    Uses the superficial full-domain average of velocity and pressure gradient.
    """
    f = np.asarray(config.body_force, dtype=float)
    direction = f / np.linalg.norm(f)
    window = AveragingWindow.full_domain()
    U = volume_average_velocity(state, window)
    PD = pressure_drop(state, window, f)
    return darcy_scalar(_along(U, direction), _along(PD, direction), config.mu)
