"""
Segment Decomposition.

Tiles the porous box into n_x by n_y segments and computes each segment's
structural features (fiber area fraction, orientation, radius). The segment
features are what the surrogate maps to a per-segment permeability.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.integrate import quad

from dualperm.config.constants import MAX_SEGMENTS
from dualperm.geometry.cells import Box, MesoCell, MicroCell
from dualperm.utils.exceptions import SegmentCapError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SegmentGrid:
    """Regular tiling of the porous box with per-segment features.

    Attributes:
        porous_box: The tiled box.
        fvc: Array (n_y, n_x) of fiber area fractions.
        orientation: Array (n_y, n_x); always 0 for transverse discs.
        radius: Array (n_y, n_x) of fiber radii.
    """

    porous_box: Box
    fvc: np.ndarray
    orientation: np.ndarray
    radius: np.ndarray

    @property
    def n_x(self) -> int:
        return self.fvc.shape[1]

    @property
    def n_y(self) -> int:
        return self.fvc.shape[0]

    def segment_box(self, ix: int, iy: int) -> Box:
        box = self.porous_box
        dx, dy = box.width / self.n_x, box.height / self.n_y
        return Box(
            x_lo=box.x_lo + ix * dx,
            x_hi=box.x_lo + (ix + 1) * dx,
            y_lo=box.y_lo + iy * dy,
            y_hi=box.y_lo + (iy + 1) * dy,
        )

    @property
    def segment_area(self) -> float:
        return self.porous_box.area / (self.n_x * self.n_y)


def disc_box_overlap(cx: float, cy: float, r: float, box: Box) -> float:
    """Area of the intersection of a disc with an axis-aligned box.

    Integrates the clipped chord length over x; the chord kinks where the
    circle crosses y_lo or y_hi, and those abscissae are passed to quad.
    """
    a, b = max(box.x_lo, cx - r), min(box.x_hi, cx + r)
    if a >= b:
        return 0.0

    def chord(x: float) -> float:
        s = math.sqrt(max(r * r - (x - cx) ** 2, 0.0))
        return max(0.0, min(cy + s, box.y_hi) - max(cy - s, box.y_lo))

    kinks = []
    for y_edge in (box.y_lo, box.y_hi):
        dy = y_edge - cy
        if abs(dy) < r:
            w = math.sqrt(r * r - dy * dy)
            kinks.extend(x for x in (cx - w, cx + w) if a < x < b)

    area, _ = quad(chord, a, b, points=sorted(kinks) or None, epsabs=1e-14, epsrel=1e-12, limit=200)
    return area


def decompose_segments(
    meso: Union[MesoCell, Box, Sequence[float]], cell: MicroCell, n_x: int, n_y: int
) -> SegmentGrid:
    """Split the porous box into segments and compute their features.

    Args:
        meso: MesoCell whose porous box is tiled, or the porous box itself.
        cell: MicroCell whose fibers fill the tow.
        n_x: Segments along x.
        n_y: Segments along y.

    Returns:
        SegmentGrid with fvc = fiber overlap area / segment area.

    Raises:
        SegmentCapError: If n_x * n_y exceeds 255.
    """
    if n_x <= 0 or n_y <= 0:
        raise SegmentCapError(f"Segment counts must be positive, got {n_x}x{n_y}")
    if n_x * n_y > MAX_SEGMENTS:
        raise SegmentCapError(
            f"{n_x}x{n_y} = {n_x * n_y} segments exceeds the cap of {MAX_SEGMENTS}"
        )

    if isinstance(meso, MesoCell):
        porous_box = meso.porous_box
    else:
        porous_box = meso if isinstance(meso, Box) else Box.from_tuple(meso)

    fvc = np.zeros((n_y, n_x))
    template = SegmentGrid(
        porous_box=porous_box,
        fvc=fvc,
        orientation=np.zeros((n_y, n_x)),
        radius=np.zeros((n_y, n_x)),
    )

    for iy in range(n_y):
        for ix in range(n_x):
            seg = template.segment_box(ix, iy)
            overlap = sum(disc_box_overlap(f.cx, f.cy, f.r, seg) for f in cell.fibers)
            fvc[iy, ix] = overlap / seg.area

    radius = float(cell.radii.mean()) if cell.fibers else float("nan")
    grid = SegmentGrid(
        porous_box=porous_box,
        fvc=fvc,
        orientation=np.zeros((n_y, n_x)),
        radius=np.full((n_y, n_x), radius),
    )
    logger.info(
        "Decomposed tow into segments",
        extra={
            "extra_fields": {
                "n_x": n_x,
                "n_y": n_y,
                "fvc_min": float(fvc.min()),
                "fvc_max": float(fvc.max()),
            }
        },
    )
    return grid
