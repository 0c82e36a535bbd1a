"""
Staggered Grid and Flow Fields.

Layout on the unit square with n cells per side and spacing h = 1/n. All arrays
have shape (n, n) and are indexed [j, i] (row j along x2, column i along x1):

    u1[j, i]  at (i h,        (j + 1/2) h)   vertical faces
    u2[j, i]  at ((i + 1/2) h, j h)          horizontal faces
    p[j, i]   at ((i + 1/2) h, (j + 1/2) h)  cell centers

Index n wraps to 0, so the face at x1 = 1 is the face at x1 = 0.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from dualperm.config.constants import MIN_GRID_N


@dataclass(frozen=True)
class Grid:
    """Uniform MAC grid on the unit square."""

    n: int

    def __post_init__(self):
        if self.n < MIN_GRID_N:
            raise ValueError(f"Grid needs n >= {MIN_GRID_N}, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def _points(self, x_shift: float, y_shift: float) -> np.ndarray:
        idx = np.arange(self.n, dtype=float)
        y, x = np.meshgrid((idx + y_shift) * self.h, (idx + x_shift) * self.h, indexing="ij")
        return np.stack([x.ravel(), y.ravel()], axis=1)

    def u1_points(self) -> np.ndarray:
        """Vertical face centers, row-major (n*n, 2)."""
        return self._points(0.0, 0.5)

    def u2_points(self) -> np.ndarray:
        """Horizontal face centers, row-major (n*n, 2)."""
        return self._points(0.5, 0.0)

    def cell_centers(self) -> np.ndarray:
        """Cell centers, row-major (n*n, 2)."""
        return self._points(0.5, 0.5)


@dataclass(frozen=True)
class FlowState:
    """Discrete velocity pair and pressure on a Grid."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n, self.grid.n)
        for name in ("u1", "u2", "p"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, grid: Grid) -> "FlowState":
        z = np.zeros((grid.n, grid.n))
        return cls(grid=grid, u1=z, u2=z.copy(), p=z.copy())

    def cell_velocity(self) -> np.ndarray:
        """Velocity averaged from faces to cell centers, shape (2, n, n)."""
        uc1 = 0.5 * (self.u1 + np.roll(self.u1, -1, axis=1))
        uc2 = 0.5 * (self.u2 + np.roll(self.u2, -1, axis=0))
        return np.stack([uc1, uc2])

    def pressure_gradient(self) -> np.ndarray:
        """Central-difference pressure gradient at cell centers, shape (2, n, n)."""
        h = self.grid.h
        dp1 = (np.roll(self.p, -1, axis=1) - np.roll(self.p, 1, axis=1)) / (2.0 * h)
        dp2 = (np.roll(self.p, -1, axis=0) - np.roll(self.p, 1, axis=0)) / (2.0 * h)
        return np.stack([dp1, dp2])


def _periodic_interpolator(values: np.ndarray, x_shift: float, y_shift: float, h: float):
    """Linear interpolator over a staggered array padded by one periodic layer."""
    n = values.shape[0]
    padded = np.pad(values, 1, mode="wrap")
    coords_x = (np.arange(-1, n + 1) + x_shift) * h
    coords_y = (np.arange(-1, n + 1) + y_shift) * h
    return RegularGridInterpolator((coords_y, coords_x), padded, method="linear")


def sample_state(state: FlowState, points: np.ndarray) -> Dict[str, np.ndarray]:
    """Bilinear interpolation of a periodic FlowState at arbitrary points.

    Args:
        state: The FlowState.
        points: Array (m, 2); coordinates are wrapped into [0, 1).

    Returns:
        {"u1": (m,), "u2": (m,), "p": (m,)}.
    """
    h = state.grid.h
    pts = np.mod(np.atleast_2d(np.asarray(points, dtype=float)), 1.0)
    query = pts[:, ::-1]
    return {
        "u1": _periodic_interpolator(state.u1, 0.0, 0.5, h)(query),
        "u2": _periodic_interpolator(state.u2, 0.5, 0.0, h)(query),
        "p": _periodic_interpolator(state.p, 0.5, 0.5, h)(query),
    }
