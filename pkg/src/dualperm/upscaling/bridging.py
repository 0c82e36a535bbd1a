"""
Segment-Wise Scale Bridging.

Maps every segment of a decomposed tow through a permeability predictor and
returns the field a MesoCell needs.
"""

import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from dualperm.config.constants import FVC_MAX, MAX_SEGMENTS
from dualperm.geometry.cells import check_spd
from dualperm.geometry.segments import SegmentGrid
from dualperm.surrogate.dataset import FeatureVector
from dualperm.utils.exceptions import ExtrapolationWarning, SegmentCapError
from dualperm.utils.logger import get_logger

logger = get_logger(__name__)

# Segment fvc is kept inside the open feature domain
_FVC_FLOOR = 1e-6


class PermeabilityPredictor(Protocol):
    """Anything that maps segment features to a 2x2 tensor."""

    def predict(self, features: FeatureVector) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantPredictor:
    """Predictor pinned to one isotropic value."""

    k11: float

    def predict(self, features: FeatureVector) -> np.ndarray:
        return self.k11 * np.eye(2)


def assign_segment_permeabilities(
    segments: SegmentGrid, predictor: PermeabilityPredictor
) -> np.ndarray:
    """Predict one tensor per segment.

    Args:
        segments: Decomposed tow.
        predictor: Emulator (or pinned) predictor.

    Returns:
        Field (n_y, n_x, 2, 2) for build_meso_cell.

    Raises:
        SegmentCapError: If the grid has more than 255 segments.
    """
    if segments.n_x * segments.n_y > MAX_SEGMENTS:
        raise SegmentCapError(f"{segments.n_x * segments.n_y} segments exceeds the cap")

    field = np.zeros((segments.n_y, segments.n_x, 2, 2))
    clamped = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ExtrapolationWarning)
        for iy in range(segments.n_y):
            for ix in range(segments.n_x):
                features = FeatureVector(
                    fvc=float(np.clip(segments.fvc[iy, ix], _FVC_FLOOR, FVC_MAX - _FVC_FLOOR)),
                    radius=float(segments.radius[iy, ix]),
                    orientation=float(segments.orientation[iy, ix]),
                )
                tensor = np.asarray(predictor.predict(features), dtype=float)
                check_spd(tensor, label=f"segment ({iy}, {ix})")
                field[iy, ix] = tensor
        clamped = sum(issubclass(w.category, ExtrapolationWarning) for w in caught)

    if clamped:
        message = f"{clamped} of {segments.n_x * segments.n_y} segments clamped to the emulator hull"
        logger.warning(message, extra={"extra_fields": {"clamped_segments": clamped}})
        warnings.warn(message, ExtrapolationWarning, stacklevel=2)
    return field
