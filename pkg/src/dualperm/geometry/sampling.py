"""
Collocation Sampling.

Draws the point sets a physics-informed network is trained on: interior fluid
points (stratified between the buffered tow and its complement), random points
on the four domain edges, equi-angular points on every fiber circle, and the
coupling points where the network is tied to the coarse Stokes-Brinkman field.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from dualperm.config.constants import BUFFER_BOX, COUPLING_EDGE_MARGIN
from dualperm.config.solver_schemas import SamplingConfig
from dualperm.geometry.cells import Box, MesoCell, MicroCell, signed_distance
from dualperm.utils.exceptions import CouplingSetError, SamplingError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

EDGE_NAMES = ("in", "out", "up", "down")


def _empty() -> np.ndarray:
    return np.zeros((0, 2))


@dataclass
class PointSets:
    """Collocation and coupling points of one training problem.

    Attributes:
        interior: Fluid points (n_inside + n_outside, 2), inside-split first.
        fiber_boundary: Points on the fiber circles.
        edges: Points on Γ_in (x=0), Γ_out (x=1), Γ_up (y=1), Γ_down (y=0).
        coupling_velocity: Points where the network velocity meets the coarse field.
        coupling_pressure: Points where the network pressure meets the coarse field.
        n_inside: Number of interior points drawn in the split box.
        seed: Seed the sets were drawn with.
    """

    interior: np.ndarray
    fiber_boundary: np.ndarray
    edges: Dict[str, np.ndarray]
    n_inside: int
    seed: int
    coupling_velocity: np.ndarray = field(default_factory=_empty)
    coupling_pressure: np.ndarray = field(default_factory=_empty)

    @property
    def edge_points(self) -> np.ndarray:
        return np.concatenate([self.edges[name] for name in EDGE_NAMES], axis=0)

    @property
    def residual_points(self) -> np.ndarray:
        """Points where the momentum and divergence residuals are enforced."""
        return np.concatenate([self.interior, self.edge_points], axis=0)

    @property
    def n_r(self) -> int:
        return len(self.interior) + len(self.edge_points)

    @property
    def n_b(self) -> int:
        return len(self.fiber_boundary)

    def counts(self) -> Dict[str, int]:
        return {
            "n_r": self.n_r,
            "n_inside": self.n_inside,
            "n_outside": len(self.interior) - self.n_inside,
            "n_b": self.n_b,
            "n_u": len(self.coupling_velocity),
            "n_p": len(self.coupling_pressure),
        }


def _rejection_fill(
    cell: MicroCell,
    rng: np.random.Generator,
    count: int,
    region: Box,
    exclude: Optional[Box],
    max_rounds: int,
) -> np.ndarray:
    """Draw count fluid points uniformly in region, minus exclude."""
    accepted = []
    n_accepted = 0
    batch = max(2 * count, 1024)
    for _ in range(max_rounds):
        x = rng.uniform(region.x_lo, region.x_hi, batch)
        y = rng.uniform(region.y_lo, region.y_hi, batch)
        pts = np.stack([x, y], axis=1)
        keep = signed_distance(cell, pts) > 0.0
        if exclude is not None:
            keep &= ~exclude.contains(pts, closed=True)
        pts = pts[keep]
        accepted.append(pts)
        n_accepted += len(pts)
        if n_accepted >= count:
            return np.concatenate(accepted, axis=0)[:count]
    raise SamplingError(
        f"Rejection sampling found {n_accepted}/{count} points in {region.as_tuple()} "
        f"after {max_rounds} rounds"
    )


def sample_collocation(
    cell: MicroCell,
    counts: SamplingConfig,
    split_box: Optional[Union[Box, Tuple[float, float, float, float]]] = None,
    seed: int = 0,
) -> PointSets:
    """Sample interior, edge and fiber-boundary collocation points.

    Args:
        cell: The MicroCell.
        counts: Per-region counts (inside/outside split, per edge, per fiber).
        split_box: Stratification box; defaults to counts.split_box.
        seed: RNG seed; equal seeds give identical point sets.

    Returns:
        PointSets with empty coupling sets.

    Raises:
        SamplingError: If a region cannot be filled within counts.max_rounds.
    """
    rng = np.random.default_rng(seed)
    if split_box is None:
        split_box = counts.split_box
    box = split_box if isinstance(split_box, Box) else Box.from_tuple(split_box)

    inside = _rejection_fill(cell, rng, counts.inside_split, box, None, counts.max_rounds)
    outside = _rejection_fill(
        cell, rng, counts.outside_split, cell.domain, box, counts.max_rounds
    )

    n = counts.points_per_edge
    t = rng.uniform(0.0, 1.0, (4, n))
    edges = {
        "in": np.stack([np.zeros(n), t[0]], axis=1),
        "out": np.stack([np.ones(n), t[1]], axis=1),
        "up": np.stack([t[2], np.ones(n)], axis=1),
        "down": np.stack([t[3], np.zeros(n)], axis=1),
    }

    m = counts.points_per_fiber
    theta = 2.0 * np.pi * np.arange(m) / m
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if cell.fibers:
        boundary = (cell.centers[:, None, :] + cell.radii[:, None, None] * ring[None]).reshape(-1, 2)
    else:
        boundary = _empty()

    sets = PointSets(
        interior=np.concatenate([inside, outside], axis=0),
        fiber_boundary=boundary,
        edges=edges,
        n_inside=len(inside),
        seed=seed,
    )
    logger.info("Sampled collocation points", extra={"extra_fields": sets.counts()})
    return sets


def build_coupling_sets(
    meso: MesoCell,
    mesh_points: np.ndarray,
    buffer_box: Union[Box, Tuple[float, float, float, float]] = BUFFER_BOX,
    edge_margin: float = COUPLING_EDGE_MARGIN,
    pressure_points: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Select coarse-mesh points where the network is coupled to the coarse field.

    A point is kept if it lies outside buffer_box and farther than edge_margin
    from the top and bottom edges. The same rule filters the pressure points.

    Args:
        meso: MesoCell; buffer_box must contain its porous box.
        mesh_points: Coarse-grid points for the velocity (m, 2).
        buffer_box: Buffered tow.
        edge_margin: Exclusion distance from Γ_up and Γ_down.
        pressure_points: Coarse-grid points for the pressure; defaults to mesh_points.

    Returns:
        (coupling_velocity, coupling_pressure).

    Raises:
        CouplingSetError: If buffer_box does not contain the porous box or no
            point survives.
    """
    box = buffer_box if isinstance(buffer_box, Box) else Box.from_tuple(buffer_box)
    porous = meso.porous_box
    if not (
        box.x_lo <= porous.x_lo
        and porous.x_hi <= box.x_hi
        and box.y_lo <= porous.y_lo
        and porous.y_hi <= box.y_hi
    ):
        raise CouplingSetError(
            f"Buffer box {box.as_tuple()} does not contain porous box {porous.as_tuple()}"
        )

    def keep(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        y = points[:, 1]
        mask = ~box.contains(points, closed=True)
        mask &= (y > edge_margin) & (y < 1.0 - edge_margin)
        return points[mask]

    velocity = keep(mesh_points)
    pressure = keep(mesh_points if pressure_points is None else pressure_points)
    if len(velocity) == 0 or len(pressure) == 0:
        raise CouplingSetError("No mesh point survives the coupling-set filter")
    return velocity, pressure
