"""
Volume Averaging.

Averages of cell-centered velocity and pressure gradient over a restricted
window. Within a window the average is taken over the cells selected by the
optional region mask (typically the fluid cells), i.e. the sum is divided by
the window's fluid measure.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from dualperm.config.constants import AVERAGING_BASE_BOX, BENCHMARK_TOW_BOX
from dualperm.geometry.cells import Box, MicroCell, signed_distance
from dualperm.solvers.grid import FlowState
from dualperm.utils.exceptions import AveragingError


@dataclass(frozen=True)
class AveragingWindow:
    """Base box shrunk by l_p on every side."""

    base_box: Box
    l_p: float = 0.0

    def __post_init__(self):
        if self.l_p < 0:
            raise AveragingError(f"l_p must be >= 0, got {self.l_p}")
        b = self.base_box
        if not (b.x_lo + self.l_p < b.x_hi - self.l_p and b.y_lo + self.l_p < b.y_hi - self.l_p):
            raise AveragingError(f"Inset l_p={self.l_p} empties the window {b.as_tuple()}")

    @classmethod
    def from_bounds(cls, bounds: Union[Box, Sequence[float]], l_p: float = 0.0) -> "AveragingWindow":
        box = bounds if isinstance(bounds, Box) else Box.from_tuple(bounds)
        return cls(base_box=box, l_p=l_p)

    @classmethod
    def full_domain(cls) -> "AveragingWindow":
        return cls(base_box=Box.unit(), l_p=0.0)

    @property
    def box(self) -> Box:
        return self.base_box.inset(self.l_p)


def fluid_mask(cell: MicroCell, state: FlowState) -> np.ndarray:
    """Cells whose center lies outside every fiber, shape (n, n)."""
    n = state.grid.n
    return (signed_distance(cell, state.grid.cell_centers()) > 0.0).reshape(n, n)


def _selection(state: FlowState, window: AveragingWindow, region_mask: Optional[np.ndarray]) -> np.ndarray:
    n = state.grid.n
    selected = window.box.contains(state.grid.cell_centers()).reshape(n, n)
    if region_mask is not None:
        selected &= np.asarray(region_mask, dtype=bool)
    if not selected.any():
        raise AveragingError(f"Averaging window {window.box.as_tuple()} selects no cells")
    return selected


def volume_average_velocity(
    state: FlowState, window: AveragingWindow, region_mask: Optional[np.ndarray] = None
) -> np.ndarray:
    """Mean cell-centered velocity over window ∩ region_mask.

    Returns:
        Array (2,).

    Raises:
        AveragingError: If no cell is selected.
    """
    selected = _selection(state, window, region_mask)
    velocity = state.cell_velocity()
    return np.array([velocity[0][selected].mean(), velocity[1][selected].mean()])


def pressure_drop(
    state: FlowState,
    window: AveragingWindow,
    f: Sequence[float],
    region_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """f minus the mean pressure gradient over window ∩ region_mask.

    Returns:
        Array (2,).
    """
    selected = _selection(state, window, region_mask)
    grad = state.pressure_gradient()
    mean_grad = np.array([grad[0][selected].mean(), grad[1][selected].mean()])
    return np.asarray(f, dtype=float) - mean_grad


def averaging_box_for(tow_box: Box) -> Box:
    """Averaging base box for a tow, scaled from the benchmark window.

    The benchmark window sits 0.0325 inside the 0.44-wide tow; other tows keep
    the same relative inset.
    """
    benchmark_tow = Box.from_tuple(BENCHMARK_TOW_BOX)
    if tow_box == benchmark_tow:
        return Box.from_tuple(AVERAGING_BASE_BOX)
    inset = (AVERAGING_BASE_BOX[0] - BENCHMARK_TOW_BOX[0]) / benchmark_tow.width
    return Box(
        x_lo=tow_box.x_lo + inset * tow_box.width,
        x_hi=tow_box.x_hi - inset * tow_box.width,
        y_lo=tow_box.y_lo + inset * tow_box.height,
        y_hi=tow_box.y_hi - inset * tow_box.height,
    )
